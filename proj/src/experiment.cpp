#include "bilevel/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <utility>

#include "bilevel/baselines.hpp"
#include "bilevel/diagnostics.hpp"
#include "bilevel/kernels.hpp"
#include "bilevel/linalg.hpp"
#include "bilevel/problems.hpp"
#include "bilevel/solver.hpp"

namespace bilevel {

namespace {

RunBudget budget_from(const RunConfig& cfg) {
  RunBudget b;
  b.max_iters = cfg.max_iters;
  b.kkt_tol = cfg.kkt_tol;
  b.wall_clock_limit_s = cfg.time_limit_s;
  return b;
}

// The aggregation weight a baseline engine actually optimizes against; its
// reference values are scored at this mu.
double engine_mu(const HypergradEngine& e) {
  return e.kind == EngineKind::bda ? e.bda_mu : 0.0;
}

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string fmt_opt(const std::optional<double>& v) {
  return v ? fmt_double(*v) : "-";
}

std::string fmt_opt_count(const std::optional<std::size_t>& v) {
  return v ? std::to_string(*v) : "-";
}

nlohmann::json opt_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json();
}

nlohmann::json opt_json(const std::optional<std::size_t>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json();
}

std::string render_table(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width;
  for (const auto& row : rows) {
    if (width.size() < row.size()) width.resize(row.size(), 0);
    for (std::size_t i = 0; i < row.size(); ++i)
      width[i] = std::max(width[i], row[i].size());
  }
  std::string out;
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      out += row[i];
      if (i + 1 < row.size())
        out.append(width[i] - row[i].size() + 2, ' ');
    }
    out += '\n';
  }
  return out;
}

}  // namespace

Trace run_experiment(const RunConfig& raw) {
  RunConfig cfg = raw;
  sync_method(cfg);
  if (const auto errs = validate_config(cfg); !errs.empty())
    throw ConfigError("invalid config: " + errs.front());

  const ProblemInstance inst =
      make_problem(cfg.problem, cfg.n, cfg.seed, cfg.condition);
  const BilevelProblem& p = *inst.problem;

  Trace t;
  t.meta.config = config_to_json(cfg);
  t.meta.kernel_backend =
      std::string(kernels::backend_name(kernels::active_backend()));
  t.meta.x_star_norm = norm(inst.x_star);
  t.meta.f_star = inst.f_star;

  const RunBudget budget = budget_from(cfg);
  RunStatus status;

  if (cfg.method.is_solver) {
    const auto observer = [&](const IterationEvent& ev) {
      IterateRecord r;
      r.k = ev.k;
      r.wall_time_s = ev.wall_s;
      r.parallel_time_s = ev.parallel_s;
      r.F = p.eval_F(ev.state->x, ev.state->y);
      r.kkt = ev.kkt;
      r.mu = ev.sizes.mu;
      r.alpha = ev.sizes.alpha;
      r.beta = ev.sizes.beta;
      r.eta = ev.sizes.eta;
      r.dx_norm = norm(ev.directions->d_x);
      if (cfg.oracle) {
        r.x_err = norm_diff(ev.state->x, inst.x_star);
        if (const auto ov = inst.oracle(ev.state->x, ev.sizes.mu)) {
          r.y_err = norm_diff(ev.state->y, ov->y_star);
          r.v_err = norm_diff(ev.state->v, ov->v_star);
          Vector gap = ev.directions->d_x;
          axpy(-1.0, ov->grad_phi, gap);
          r.hypergrad_err = norm(gap);
          r.grad_phi_norm = norm(ov->grad_phi);
          if (const auto lv = lyapunov_value(p, cfg.schedule, ev.k, *ev.state, *ov))
            r.lyapunov_V = lv->V;
        }
      }
      t.records.push_back(std::move(r));
    };
    status = slbamm_run(p, cfg.schedule, zero_state(p), budget, observer);
  } else {
    const HypergradEngine& e = cfg.engine;
    const double mu = engine_mu(e);
    const auto observer = [&](const OuterEvent& ev) {
      IterateRecord r;
      r.k = ev.k;
      r.wall_time_s = ev.wall_s;
      r.parallel_time_s = ev.parallel_s;
      r.F = p.eval_F(*ev.x, ev.grad->y);
      r.kkt = ev.kkt;
      r.mu = mu;
      r.alpha = cfg.ul_lr;
      r.beta = e.inner_lr;
      r.dx_norm = norm(ev.grad->g);
      if (ev.grad->solve && !ev.grad->solve->converged) ++t.meta.flagged_solves;
      if (cfg.oracle) {
        r.x_err = norm_diff(*ev.x, inst.x_star);
        if (const auto ov = inst.oracle(*ev.x, mu)) {
          r.y_err = norm_diff(ev.grad->y, ov->y_star);
          if (ev.grad->v) r.v_err = norm_diff(*ev.grad->v, ov->v_star);
          Vector gap = ev.grad->g;
          axpy(-1.0, ov->grad_phi, gap);
          r.hypergrad_err = norm(gap);
          r.grad_phi_norm = norm(ov->grad_phi);
        }
      }
      t.records.push_back(std::move(r));
    };
    status = outer_loop(e, p, Vector(p.dim_x(), 0.0), Vector(p.dim_y(), 0.0),
                        cfg.ul_lr, budget, cfg.warm_start, observer);
  }

  t.meta.status = status.stop == StopReason::diverged ? "diverged" : "ok";
  t.meta.stop = std::string(stop_reason_name(status.stop));
  t.meta.iterations = status.iterations;
  t.meta.diverged_at = status.diverged_at;
  return t;
}

std::string_view compare_metric_name(CompareMetric m) {
  switch (m) {
    case CompareMetric::kkt:
      return "kkt";
    case CompareMetric::dx_norm:
      return "dx-norm";
    case CompareMetric::x_err:
      return "x-err";
    case CompareMetric::hypergrad_err:
      return "hypergrad-err";
  }
  return "unknown";
}

std::optional<CompareMetric> parse_compare_metric(std::string_view name) {
  if (name == "kkt") return CompareMetric::kkt;
  if (name == "dx-norm") return CompareMetric::dx_norm;
  if (name == "x-err") return CompareMetric::x_err;
  if (name == "hypergrad-err") return CompareMetric::hypergrad_err;
  return std::nullopt;
}

std::optional<double> record_metric(const IterateRecord& r, CompareMetric m) {
  switch (m) {
    case CompareMetric::kkt:
      return r.kkt;
    case CompareMetric::dx_norm:
      return r.dx_norm;
    case CompareMetric::x_err:
      return r.x_err;
    case CompareMetric::hypergrad_err:
      return r.hypergrad_err;
  }
  return std::nullopt;
}

CompareResult run_compare(const RunConfig& base,
                          const std::vector<MethodSpec>& methods,
                          CompareMetric metric, double target) {
  CompareResult out;
  out.metric = metric;
  out.target = target;
  out.timing = base.timing;
  for (const auto& m : methods) {
    RunConfig cfg = base;
    cfg.method = m;
    Trace tr = run_experiment(cfg);

    CompareRow row;
    row.method = method_name(m);
    row.iterations = tr.meta.iterations;
    row.stop = tr.meta.stop;
    for (const auto& rec : tr.records) {
      const auto v = record_metric(rec, metric);
      if (v && *v <= target) {
        row.iterations_to_target = rec.k;
        row.time_to_target_s = base.timing == TimingMode::wall
                                   ? rec.wall_time_s
                                   : rec.parallel_time_s;
        break;
      }
    }
    if (!tr.records.empty())
      row.final_metric = record_metric(tr.records.back(), metric);
    out.rows.push_back(std::move(row));
    out.traces.push_back(std::move(tr));
  }
  return out;
}

std::string compare_table(const CompareResult& r) {
  const std::string metric(compare_metric_name(r.metric));
  std::vector<std::vector<std::string>> rows;
  rows.push_back({"method", "iters-to-target", "time-to-target-s",
                  "final-" + metric, "iters", "stop"});
  for (const auto& row : r.rows)
    rows.push_back({row.method, fmt_opt_count(row.iterations_to_target),
                    fmt_opt(row.time_to_target_s), fmt_opt(row.final_metric),
                    std::to_string(row.iterations), row.stop});
  return render_table(rows);
}

nlohmann::json compare_to_json(const CompareResult& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : r.rows)
    rows.push_back({{"method", row.method},
                    {"iterations-to-target", opt_json(row.iterations_to_target)},
                    {"time-to-target-s", opt_json(row.time_to_target_s)},
                    {"final-metric", opt_json(row.final_metric)},
                    {"iterations", row.iterations},
                    {"stop", row.stop}});
  return {{"metric", std::string(compare_metric_name(r.metric))},
          {"target", r.target},
          {"timing", std::string(timing_mode_name(r.timing))},
          {"rows", rows}};
}

std::string_view sweep_param_name(SweepParam p) {
  switch (p) {
    case SweepParam::n:
      return "n";
    case SweepParam::p:
      return "p";
    case SweepParam::tau:
      return "tau";
    case SweepParam::beta:
      return "beta";
    case SweepParam::inner_steps:
      return "inner-steps";
    case SweepParam::ns_terms:
      return "ns-terms";
    case SweepParam::cg_tol:
      return "cg-tol";
  }
  return "unknown";
}

std::optional<SweepParam> parse_sweep_param(std::string_view name) {
  if (name == "n") return SweepParam::n;
  if (name == "p") return SweepParam::p;
  if (name == "tau") return SweepParam::tau;
  if (name == "beta") return SweepParam::beta;
  if (name == "inner-steps") return SweepParam::inner_steps;
  if (name == "ns-terms") return SweepParam::ns_terms;
  if (name == "cg-tol") return SweepParam::cg_tol;
  return std::nullopt;
}

RunConfig apply_sweep_value(RunConfig base, SweepParam param, double value) {
  const auto count = [](double v) {
    return static_cast<std::size_t>(std::llround(std::max(0.0, v)));
  };
  switch (param) {
    case SweepParam::n:
      base.n = count(value);
      break;
    case SweepParam::p:
      base.schedule.p = value;
      break;
    case SweepParam::tau:
      base.schedule.tau = value;
      break;
    case SweepParam::beta:
      base.schedule.beta = value;
      break;
    case SweepParam::inner_steps:
      base.engine.inner_steps = count(value);
      break;
    case SweepParam::ns_terms:
      base.engine.ns_terms = count(value);
      break;
    case SweepParam::cg_tol:
      base.engine.cg_tol = value;
      break;
  }
  return base;
}

SweepResult run_sweep(const RunConfig& base, SweepParam param,
                      const std::vector<double>& values) {
  RunConfig shared = base;
  if (!shared.time_limit_s) shared.time_limit_s = 60.0;
  SweepResult out;
  out.param = param;
  for (const double v : values) {
    SweepPoint pt;
    pt.value = v;
    pt.trace = run_experiment(apply_sweep_value(shared, param, v));
    out.points.push_back(std::move(pt));
  }
  return out;
}

std::string sweep_table(const SweepResult& r) {
  std::vector<std::vector<std::string>> rows;
  rows.push_back({std::string(sweep_param_name(r.param)), "iters", "final-F",
                  "final-kkt", "final-x-err", "wall-s", "stop"});
  for (const auto& pt : r.points) {
    const auto& recs = pt.trace.records;
    if (recs.empty()) {
      rows.push_back({fmt_double(pt.value), std::to_string(pt.trace.meta.iterations),
                      "-", "-", "-", "-", pt.trace.meta.stop});
      continue;
    }
    const auto& last = recs.back();
    rows.push_back({fmt_double(pt.value), std::to_string(pt.trace.meta.iterations),
                    fmt_double(last.F), fmt_opt(last.kkt), fmt_opt(last.x_err),
                    fmt_double(last.wall_time_s), pt.trace.meta.stop});
  }
  return render_table(rows);
}

nlohmann::json sweep_to_json(const SweepResult& r) {
  nlohmann::json points = nlohmann::json::array();
  for (const auto& pt : r.points) {
    nlohmann::json final_row;
    if (!pt.trace.records.empty()) {
      const auto& last = pt.trace.records.back();
      final_row = {{"F", last.F},
                   {"kkt", opt_json(last.kkt)},
                   {"x-err", opt_json(last.x_err)},
                   {"wall-time-s", last.wall_time_s}};
    }
    points.push_back({{"value", pt.value},
                      {"iterations", pt.trace.meta.iterations},
                      {"status", pt.trace.meta.status},
                      {"stop", pt.trace.meta.stop},
                      {"flagged-solves", pt.trace.meta.flagged_solves},
                      {"final", final_row}});
  }
  return {{"param", std::string(sweep_param_name(r.param))}, {"points", points}};
}

}  // namespace bilevel
