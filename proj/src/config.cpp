#include "bilevel/config.hpp"

#include <cmath>
#include <fstream>
#include <utility>

namespace bilevel {

namespace {

[[noreturn]] void bad(const std::string& msg) { throw ConfigError(msg); }

double get_double(const nlohmann::json& v, const std::string& key) {
  if (!v.is_number()) bad("key \"" + key + "\" must be a number");
  return v.get<double>();
}

std::size_t get_count(const nlohmann::json& v, const std::string& key) {
  // Signed storage is fine as long as the value is a nonnegative integer.
  if (v.is_number_unsigned()) return v.get<std::size_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0)
    return static_cast<std::size_t>(v.get<std::int64_t>());
  bad("key \"" + key + "\" must be a nonnegative integer");
}

bool get_bool(const nlohmann::json& v, const std::string& key) {
  if (!v.is_boolean()) bad("key \"" + key + "\" must be a boolean");
  return v.get<bool>();
}

std::string get_string(const nlohmann::json& v, const std::string& key) {
  if (!v.is_string()) bad("key \"" + key + "\" must be a string");
  return v.get<std::string>();
}

std::optional<double> get_opt_double(const nlohmann::json& v,
                                     const std::string& key) {
  if (v.is_null()) return std::nullopt;
  return get_double(v, key);
}

void expect_object(const nlohmann::json& v, const std::string& key) {
  if (!v.is_object()) bad("key \"" + key + "\" must be an object");
}

}  // namespace

std::string_view timing_mode_name(TimingMode m) {
  return m == TimingMode::wall ? "wall" : "parallel";
}

std::optional<TimingMode> parse_timing_mode(std::string_view name) {
  if (name == "wall") return TimingMode::wall;
  if (name == "parallel") return TimingMode::parallel;
  return std::nullopt;
}

std::string method_name(const MethodSpec& m) {
  if (m.is_solver) return "slbamm-" + std::string(strategy_name(m.strategy));
  return std::string(engine_name(m.engine));
}

std::optional<MethodSpec> parse_method(std::string_view name) {
  MethodSpec m;
  constexpr std::string_view prefix = "slbamm-";
  if (name.substr(0, prefix.size()) == prefix) {
    const auto s = parse_strategy(name.substr(prefix.size()));
    if (!s) return std::nullopt;
    m.is_solver = true;
    m.strategy = *s;
    return m;
  }
  const auto e = parse_engine(name);
  if (!e) return std::nullopt;
  m.is_solver = false;
  m.engine = *e;
  return m;
}

bool method_has_multiplier(const MethodSpec& m) {
  return m.is_solver || m.engine == EngineKind::cg_aid ||
         m.engine == EngineKind::ns_aid;
}

void sync_method(RunConfig& c) {
  c.engine.kind = c.method.engine;
  if (c.method.is_solver) c.schedule.strategy = c.method.strategy;
}

nlohmann::json config_to_json(const RunConfig& c) {
  return {
      {"problem",
       {{"kind", std::string(problem_kind_name(c.problem))},
        {"n", c.n},
        {"seed", c.seed},
        {"condition", c.condition}}},
      {"method", method_name(c.method)},
      {"schedule",
       {{"p", c.schedule.p},
        {"tau", c.schedule.tau},
        {"mu-bar", c.schedule.mu_bar},
        {"beta", c.schedule.beta},
        {"beta-decay", c.schedule.beta_decay},
        {"eta-bar", c.schedule.eta_bar},
        {"alpha-bar", c.schedule.alpha_bar},
        {"alpha-gain", c.schedule.alpha_gain}}},
      {"engine",
       {{"inner-steps", c.engine.inner_steps},
        {"inner-lr", c.engine.inner_lr},
        {"bda-mu", c.engine.bda_mu},
        {"cg-tol", c.engine.cg_tol},
        {"cg-max-iter", c.engine.cg_max_iter},
        {"ns-terms", c.engine.ns_terms},
        {"ns-lr", c.engine.ns_lr},
        {"ul-lr", c.ul_lr},
        {"warm-start", c.warm_start}}},
      {"budget",
       {{"iters", c.max_iters},
        {"kkt-tol", c.kkt_tol ? nlohmann::json(*c.kkt_tol) : nlohmann::json()},
        {"time-limit-s",
         c.time_limit_s ? nlohmann::json(*c.time_limit_s) : nlohmann::json()}}},
      {"output",
       {{"path", c.out},
        {"format", std::string(trace_format_name(c.format))},
        {"oracle", c.oracle},
        {"timing", std::string(timing_mode_name(c.timing))}}}};
}

RunConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) bad("config root must be an object");
  RunConfig c;
  for (const auto& [section, value] : j.items()) {
    if (section == "problem") {
      expect_object(value, section);
      for (const auto& [key, v] : value.items()) {
        const std::string full = section + "." + key;
        if (key == "kind") {
          const auto k = parse_problem_kind(get_string(v, full));
          if (!k) bad("unknown problem kind \"" + v.get<std::string>() + "\"");
          c.problem = *k;
        } else if (key == "n") {
          c.n = get_count(v, full);
        } else if (key == "seed") {
          c.seed = get_count(v, full);
        } else if (key == "condition") {
          c.condition = get_double(v, full);
        } else {
          bad("unknown key \"" + full + "\"");
        }
      }
    } else if (section == "method") {
      const auto m = parse_method(get_string(value, section));
      if (!m) bad("unknown method \"" + value.get<std::string>() + "\"");
      c.method = *m;
    } else if (section == "schedule") {
      expect_object(value, section);
      for (const auto& [key, v] : value.items()) {
        const std::string full = section + "." + key;
        if (key == "p") c.schedule.p = get_double(v, full);
        else if (key == "tau") c.schedule.tau = get_double(v, full);
        else if (key == "mu-bar") c.schedule.mu_bar = get_double(v, full);
        else if (key == "beta") c.schedule.beta = get_double(v, full);
        else if (key == "beta-decay") c.schedule.beta_decay = get_bool(v, full);
        else if (key == "eta-bar") c.schedule.eta_bar = get_double(v, full);
        else if (key == "alpha-bar") c.schedule.alpha_bar = get_double(v, full);
        else if (key == "alpha-gain") c.schedule.alpha_gain = get_double(v, full);
        else bad("unknown key \"" + full + "\"");
      }
    } else if (section == "engine") {
      expect_object(value, section);
      for (const auto& [key, v] : value.items()) {
        const std::string full = section + "." + key;
        if (key == "inner-steps") c.engine.inner_steps = get_count(v, full);
        else if (key == "inner-lr") c.engine.inner_lr = get_double(v, full);
        else if (key == "bda-mu") c.engine.bda_mu = get_double(v, full);
        else if (key == "cg-tol") c.engine.cg_tol = get_double(v, full);
        else if (key == "cg-max-iter") c.engine.cg_max_iter = get_count(v, full);
        else if (key == "ns-terms") c.engine.ns_terms = get_count(v, full);
        else if (key == "ns-lr") c.engine.ns_lr = get_double(v, full);
        else if (key == "ul-lr") c.ul_lr = get_double(v, full);
        else if (key == "warm-start") c.warm_start = get_bool(v, full);
        else bad("unknown key \"" + full + "\"");
      }
    } else if (section == "budget") {
      expect_object(value, section);
      for (const auto& [key, v] : value.items()) {
        const std::string full = section + "." + key;
        if (key == "iters") c.max_iters = get_count(v, full);
        else if (key == "kkt-tol") c.kkt_tol = get_opt_double(v, full);
        else if (key == "time-limit-s") c.time_limit_s = get_opt_double(v, full);
        else bad("unknown key \"" + full + "\"");
      }
    } else if (section == "output") {
      expect_object(value, section);
      for (const auto& [key, v] : value.items()) {
        const std::string full = section + "." + key;
        if (key == "path") {
          c.out = get_string(v, full);
        } else if (key == "format") {
          const auto f = parse_trace_format(get_string(v, full));
          if (!f) bad("unknown trace format \"" + v.get<std::string>() + "\"");
          c.format = *f;
        } else if (key == "oracle") {
          c.oracle = get_bool(v, full);
        } else if (key == "timing") {
          const auto t = parse_timing_mode(get_string(v, full));
          if (!t) bad("unknown timing mode \"" + v.get<std::string>() + "\"");
          c.timing = *t;
        } else {
          bad("unknown key \"" + full + "\"");
        }
      }
    } else {
      bad("unknown key \"" + section + "\"");
    }
  }
  sync_method(c);
  return c;
}

RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path + " for reading");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    bad("malformed config file " + path + ": " + e.what());
  }
  return config_from_json(j);
}

std::vector<std::string> validate_config(const RunConfig& c) {
  std::vector<std::string> errs;
  if (c.n < 1) errs.push_back("n must be at least 1");
  if (c.problem == ProblemKind::random_llsc &&
      !(std::isfinite(c.condition) && c.condition >= 1.0))
    errs.push_back("condition must be a finite number >= 1");
  if (c.method.is_solver) {
    for (const auto& e : schedule_errors(c.schedule))
      errs.push_back("schedule: " + e);
  } else {
    for (const auto& e : engine_errors(c.engine)) errs.push_back("engine: " + e);
    if (!(std::isfinite(c.ul_lr) && c.ul_lr >= 0.0))
      errs.push_back("ul-lr must be finite and nonnegative");
  }
  if (c.max_iters < 1) errs.push_back("iters must be at least 1");
  if (c.kkt_tol) {
    if (!(std::isfinite(*c.kkt_tol) && *c.kkt_tol > 0.0))
      errs.push_back("kkt-tol must be positive");
    if (!method_has_multiplier(c.method))
      errs.push_back(
          "kkt-tol requires a method that maintains a multiplier "
          "(the solver or an AID engine)");
  }
  if (c.time_limit_s && !(std::isfinite(*c.time_limit_s) && *c.time_limit_s > 0.0))
    errs.push_back("time-limit-s must be positive");
  return errs;
}

}  // namespace bilevel
