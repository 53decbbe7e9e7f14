// Command-line harness: single runs, method comparisons, parameter sweeps,
// derivative checking, and reference-value queries.
//
// Exit codes: 0 success (a flagged divergence is still a successful run),
// 1 failed derivative check, 2 usage, 3 invalid configuration content,
// 4 file I/O failure.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "bilevel/config.hpp"
#include "bilevel/diagnostics.hpp"
#include "bilevel/experiment.hpp"
#include "bilevel/kernels.hpp"
#include "bilevel/linalg.hpp"
#include "bilevel/problems.hpp"
#include "bilevel/schedule.hpp"
#include "bilevel/trace.hpp"

namespace {

using namespace bilevel;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string fmt_opt(const std::optional<double>& v) {
  return v ? fmt(*v) : "-";
}

void write_text(const std::string& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << body;
  if (!out) throw IoError("write failed for " + path);
}

// Flag storage for the config-shaped subcommands. Flags the user passed are
// applied on top of --config, which is applied on top of defaults.
struct ConfigFlags {
  CLI::App* cmd = nullptr;

  std::string config_path;
  std::string problem_str, method_str, format_str, timing_str, out;
  std::uint64_t n = 0, seed = 0;
  double condition = 0.0;
  double p = 0.0, tau = 0.0, mu_bar = 0.0, beta = 0.0, eta_bar = 0.0,
         alpha_bar = 0.0, alpha_gain = 0.0;
  bool beta_decay = false;
  std::uint64_t inner_steps = 0, cg_max_iter = 0, ns_terms = 0, iters = 0;
  double inner_lr = 0.0, bda_mu = 0.0, cg_tol = 0.0, ns_lr = 0.0, ul_lr = 0.0;
  bool warm_start = true;
  double kkt_tol = 0.0, time_limit_s = 0.0;
  bool oracle = true;

  void attach_problem(CLI::App* s) {
    cmd = s;
    s->add_option("--problem", problem_str, "problem kind")
        ->check(CLI::IsMember({"llc", "llsc", "random-llsc"}));
    s->add_option("--n", n, "problem dimension");
    s->add_option("--seed", seed, "instance seed (random-llsc)");
    s->add_option("--condition", condition, "spectrum spread (random-llsc)");
  }

  void attach_run(CLI::App* s, bool with_method) {
    attach_problem(s);
    s->add_option("--config", config_path, "JSON config applied before flags");
    if (with_method)
      s->add_option("--method", method_str,
                    "slbamm-s1|slbamm-s2|slbamm-s3|slbamm-sc|rhg|bda|cg-aid|ns-aid");
    s->add_option("--p", p, "aggregation weight decay exponent");
    s->add_option("--tau", tau, "step-size decay exponent");
    s->add_option("--mu-bar", mu_bar, "initial aggregation weight");
    s->add_option("--beta", beta, "lower-level step size");
    s->add_flag("--beta-decay,!--no-beta-decay", beta_decay, "decay beta with k");
    s->add_option("--eta-bar", eta_bar, "multiplier step scale (slbamm-sc)");
    s->add_option("--alpha-bar", alpha_bar, "upper-level step scale (slbamm-sc)");
    s->add_option("--alpha-gain", alpha_gain, "extra factor on the upper-level step");
    s->add_option("--inner-steps", inner_steps, "inner iterations per outer step");
    s->add_option("--inner-lr", inner_lr, "inner learning rate");
    s->add_option("--bda-mu", bda_mu, "aggregation weight (bda)");
    s->add_option("--cg-tol", cg_tol, "linear-solve tolerance (cg-aid)");
    s->add_option("--cg-max-iter", cg_max_iter, "linear-solve iteration cap (cg-aid)");
    s->add_option("--ns-terms", ns_terms, "series terms (ns-aid)");
    s->add_option("--ns-lr", ns_lr, "series step size (ns-aid)");
    s->add_option("--ul-lr", ul_lr, "outer learning rate (baselines)");
    s->add_flag("--warm-start,!--cold-start", warm_start,
                "reuse the inner iterate across outer steps");
    s->add_option("--iters", iters, "iteration budget");
    s->add_option("--kkt-tol", kkt_tol,
                  "stop once the stationarity residual reaches this");
    s->add_option("--time-limit-s", time_limit_s, "wall-clock budget in seconds");
    s->add_option("--out", out, "output file path");
    s->add_option("--format", format_str, "trace format")
        ->check(CLI::IsMember({"csv", "json"}));
    s->add_flag("--oracle,!--no-oracle", oracle,
                "score iterates against closed-form reference values");
    s->add_option("--timing", timing_str, "reported clock")
        ->check(CLI::IsMember({"wall", "parallel"}));
  }

  bool passed(const char* name) const {
    const auto* opt = cmd->get_option_no_throw(name);
    return opt != nullptr && opt->count() > 0;
  }

  RunConfig build() const {
    RunConfig c;
    if (passed("--config")) c = load_config_file(config_path);
    if (passed("--problem")) c.problem = *parse_problem_kind(problem_str);
    if (passed("--n")) c.n = n;
    if (passed("--seed")) c.seed = seed;
    if (passed("--condition")) c.condition = condition;
    if (passed("--method")) {
      const auto m = parse_method(method_str);
      if (!m) throw ConfigError("unknown method \"" + method_str + "\"");
      c.method = *m;
    }
    if (passed("--p")) c.schedule.p = p;
    if (passed("--tau")) c.schedule.tau = tau;
    if (passed("--mu-bar")) c.schedule.mu_bar = mu_bar;
    if (passed("--beta")) c.schedule.beta = beta;
    if (passed("--beta-decay")) c.schedule.beta_decay = beta_decay;
    if (passed("--eta-bar")) c.schedule.eta_bar = eta_bar;
    if (passed("--alpha-bar")) c.schedule.alpha_bar = alpha_bar;
    if (passed("--alpha-gain")) c.schedule.alpha_gain = alpha_gain;
    if (passed("--inner-steps")) c.engine.inner_steps = inner_steps;
    if (passed("--inner-lr")) c.engine.inner_lr = inner_lr;
    if (passed("--bda-mu")) c.engine.bda_mu = bda_mu;
    if (passed("--cg-tol")) c.engine.cg_tol = cg_tol;
    if (passed("--cg-max-iter")) c.engine.cg_max_iter = cg_max_iter;
    if (passed("--ns-terms")) c.engine.ns_terms = ns_terms;
    if (passed("--ns-lr")) c.engine.ns_lr = ns_lr;
    if (passed("--ul-lr")) c.ul_lr = ul_lr;
    if (passed("--warm-start")) c.warm_start = warm_start;
    if (passed("--iters")) c.max_iters = iters;
    if (passed("--kkt-tol")) c.kkt_tol = kkt_tol;
    if (passed("--time-limit-s")) c.time_limit_s = time_limit_s;
    if (passed("--out")) c.out = out;
    if (passed("--format")) c.format = *parse_trace_format(format_str);
    if (passed("--oracle")) c.oracle = oracle;
    if (passed("--timing")) c.timing = *parse_timing_mode(timing_str);
    sync_method(c);
    return c;
  }

  // run/compare/sweep refuse to start from nothing but defaults
  bool names_a_problem() const {
    return passed("--config") || passed("--problem");
  }
};

int reject(const RunConfig& c) {
  const auto errs = validate_config(c);
  for (const auto& e : errs) std::cerr << "config error: " << e << "\n";
  return errs.empty() ? 0 : 3;
}

void print_schedule_warnings(const RunConfig& c) {
  if (!c.method.is_solver) return;
  const auto inst = make_problem(c.problem, c.n, c.seed, c.condition);
  const auto meta = inst.problem->metadata();
  for (const auto& w : schedule_warnings(c.schedule, &meta))
    std::cerr << "warning: " << w << "\n";
}

int cmd_run(const ConfigFlags& f) {
  if (!f.names_a_problem()) {
    std::cerr << "run: pass --problem or --config\n";
    return 2;
  }
  const RunConfig cfg = f.build();
  if (const int rc = reject(cfg)) return rc;
  print_schedule_warnings(cfg);

  const Trace t = run_experiment(cfg);
  const auto line = [](const char* key, const std::string& value) {
    std::printf("%-12s%s\n", key, value.c_str());
  };
  line("method", method_name(cfg.method));
  line("problem", std::string(problem_kind_name(cfg.problem)) +
                      " n=" + std::to_string(cfg.n) +
                      " seed=" + std::to_string(cfg.seed));
  line("backend", t.meta.kernel_backend);
  line("status", t.meta.status + " (" + t.meta.stop + ")");
  line("iterations", std::to_string(t.meta.iterations));
  if (!t.records.empty()) {
    const auto& last = t.records.back();
    line("final-F", fmt(last.F));
    line("final-kkt", fmt_opt(last.kkt));
    line("final-x-err", fmt_opt(last.x_err));
    line("final-dx", fmt_opt(last.dx_norm));
  }
  line("flagged", std::to_string(t.meta.flagged_solves));
  if (!cfg.out.empty()) {
    write_trace(t, cfg.out, cfg.format);
    line("trace", cfg.out);
  }
  return 0;
}

int cmd_compare(const ConfigFlags& f, const std::vector<std::string>& method_names,
                const std::string& metric_str, double target) {
  if (!f.names_a_problem()) {
    std::cerr << "compare: pass --problem or --config\n";
    return 2;
  }
  std::vector<MethodSpec> methods;
  for (const auto& name : method_names) {
    const auto m = parse_method(name);
    if (!m) throw ConfigError("unknown method \"" + name + "\"");
    methods.push_back(*m);
  }
  const auto metric = parse_compare_metric(metric_str);
  if (!metric) throw ConfigError("unknown metric \"" + metric_str + "\"");

  const RunConfig base = f.build();
  const auto res = run_compare(base, methods, *metric, target);
  std::cout << compare_table(res);
  if (!base.out.empty()) write_text(base.out, compare_to_json(res).dump(2) + "\n");
  return 0;
}

int cmd_sweep(const ConfigFlags& f, const std::string& param_str,
              const std::vector<double>& values, const std::string& out_dir) {
  if (!f.names_a_problem()) {
    std::cerr << "sweep: pass --problem or --config\n";
    return 2;
  }
  const auto param = parse_sweep_param(param_str);
  if (!param) throw ConfigError("unknown sweep parameter \"" + param_str + "\"");

  const RunConfig base = f.build();
  const auto res = run_sweep(base, *param, values);
  std::cout << sweep_table(res);

  if (!out_dir.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create directory " + out_dir);
    for (const auto& pt : res.points) {
      const std::string path = out_dir + "/" + std::string(sweep_param_name(*param)) +
                               "-" + fmt(pt.value) +
                               (base.format == TraceFormat::csv ? ".csv" : ".json");
      write_trace(pt.trace, path, base.format);
    }
  }
  if (!base.out.empty()) write_text(base.out, sweep_to_json(res).dump(2) + "\n");
  return 0;
}

int cmd_check(const ConfigFlags& f, std::size_t points, double radius,
              std::uint64_t check_seed, double threshold) {
  const auto inst = make_problem(f.passed("--problem")
                                     ? *parse_problem_kind(f.problem_str)
                                     : ProblemKind::llc,
                                 f.passed("--n") ? f.n : 100, f.seed,
                                 f.passed("--condition") ? f.condition : 100.0);
  const auto report =
      check_derivatives(*inst.problem, points, radius, check_seed, threshold);
  std::size_t ok = 0;
  for (const auto& c : report.checks) {
    std::printf("%-10s max rel err %-12s %s\n", c.name.c_str(),
                fmt(c.max_rel_err).c_str(), c.pass ? "ok" : "FAIL");
    if (c.pass) ++ok;
  }
  std::printf("derivative check: %s (%zu/%zu under %s)\n",
              report.pass ? "PASS" : "FAIL", ok, report.checks.size(),
              fmt(report.threshold).c_str());
  return report.pass ? 0 : 1;
}

int cmd_oracle(const ConfigFlags& f, double mu, const std::vector<double>& x_list,
               double x_fill, bool have_x) {
  if (!(mu >= 0.0 && mu <= 1.0))
    throw ConfigError("mu must lie in [0, 1]");
  const auto inst = make_problem(*parse_problem_kind(f.problem_str), f.n, f.seed,
                                 f.passed("--condition") ? f.condition : 100.0);
  const std::size_t dim = inst.problem->dim_x();
  Vector x;
  if (have_x) {
    if (x_list.size() != dim)
      throw ConfigError("--x has " + std::to_string(x_list.size()) +
                        " entries, the problem needs " + std::to_string(dim));
    x = x_list;
  } else {
    x = constant_vector(dim, x_fill);
  }
  const auto ov = inst.oracle(x, mu);
  if (!ov)
    throw ConfigError("reference values are undefined for this problem at mu=" +
                      fmt(mu));
  const nlohmann::json j = {{"mu", mu},
                            {"phi", ov->phi},
                            {"y-star", ov->y_star},
                            {"v-star", ov->v_star},
                            {"grad-phi", ov->grad_phi}};
  std::cout << j.dump(2) << "\n";
  return 0;
}

int apply_backend(const std::string& name) {
  using kernels::Backend;
  if (name.empty()) return 0;
  Backend b = Backend::scalar;
  if (name == "auto")
    b = kernels::detect_backend();
  else if (name == "scalar")
    b = Backend::scalar;
  else if (name == "avx2")
    b = Backend::avx2;
  else if (name == "neon")
    b = Backend::neon;
  kernels::use_backend(b);  // throws when unavailable on this machine
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Matrix-free bilevel optimization benchmark harness"};
  app.require_subcommand(1);

  std::string backend_str;
  app.add_option("--backend", backend_str, "kernel backend")
      ->check(CLI::IsMember({"scalar", "avx2", "neon", "auto"}));

  auto* run = app.add_subcommand("run", "run one method and write its trace");
  ConfigFlags run_flags;
  run_flags.attach_run(run, true);

  auto* compare =
      app.add_subcommand("compare", "race several methods to a metric target");
  ConfigFlags cmp_flags;
  cmp_flags.attach_run(compare, false);
  std::vector<std::string> method_names;
  std::string metric_str = "dx-norm";
  double target = 0.0;
  compare->add_option("--methods", method_names, "comma-separated method list")
      ->delimiter(',')
      ->required();
  compare->add_option("--metric", metric_str, "kkt|dx-norm|x-err|hypergrad-err");
  compare->add_option("--target", target, "metric value to reach")->required();

  auto* sweep = app.add_subcommand("sweep", "rerun one config along a parameter axis");
  ConfigFlags sweep_flags;
  sweep_flags.attach_run(sweep, true);
  std::string param_str;
  std::vector<double> values;
  std::string out_dir;
  sweep->add_option("--param", param_str, "n|p|tau|beta|inner-steps|ns-terms|cg-tol")
      ->required();
  sweep->add_option("--values", values, "comma-separated parameter values")
      ->delimiter(',')
      ->required();
  sweep->add_option("--out-dir", out_dir, "directory for one trace per value");

  auto* check =
      app.add_subcommand("check", "compare analytic derivatives to finite differences");
  ConfigFlags check_flags;
  check_flags.attach_problem(check);
  check->get_option("--problem")->required();
  std::uint64_t points = 20, check_seed = 0;
  double radius = 2.0, threshold = 1e-6;
  check->add_option("--points", points, "random probe points");
  check->add_option("--radius", radius, "probe coordinate bound");
  check->add_option("--check-seed", check_seed, "probe seed");
  check->add_option("--threshold", threshold, "max relative error allowed");

  auto* oracle =
      app.add_subcommand("oracle", "print closed-form reference values at a point");
  ConfigFlags oracle_flags;
  oracle_flags.attach_problem(oracle);
  oracle->get_option("--problem")->required();
  double mu = 0.0, x_fill = 0.0;
  std::vector<double> x_list;
  oracle->add_option("--mu", mu, "aggregation weight the references are taken at");
  auto* opt_x = oracle->add_option("--x", x_list, "upper-level point, comma-separated")
                    ->delimiter(',');
  oracle->add_option("--x-fill", x_fill, "constant upper-level point")->excludes(opt_x);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    apply_backend(backend_str);
    if (app.got_subcommand(run)) return cmd_run(run_flags);
    if (app.got_subcommand(compare))
      return cmd_compare(cmp_flags, method_names, metric_str, target);
    if (app.got_subcommand(sweep))
      return cmd_sweep(sweep_flags, param_str, values, out_dir);
    if (app.got_subcommand(check))
      return cmd_check(check_flags, points, radius, check_seed, threshold);
    if (app.got_subcommand(oracle))
      return cmd_oracle(oracle_flags, mu, x_list, x_fill,
                        oracle->count("--x") > 0);
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 2;
}
