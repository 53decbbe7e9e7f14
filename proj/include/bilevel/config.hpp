#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "bilevel/baselines.hpp"
#include "bilevel/problems.hpp"
#include "bilevel/schedule.hpp"
#include "bilevel/trace.hpp"

namespace bilevel {

// Malformed or out-of-contract configuration content.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Which clock a single reported time refers to: elapsed wall clock, or the
// per-step max-over-update-blocks accounting that models the three updates
// running in parallel.
enum class TimingMode { wall, parallel };

std::string_view timing_mode_name(TimingMode m);
std::optional<TimingMode> parse_timing_mode(std::string_view name);

// A method is either the single-loop solver under one of its step-size
// strategies or one of the baseline hypergradient engines.
struct MethodSpec {
  bool is_solver = true;
  Strategy strategy = Strategy::s3;     // meaningful when is_solver
  EngineKind engine = EngineKind::rhg;  // meaningful otherwise

  bool operator==(const MethodSpec&) const = default;
};

// "slbamm-s1" ... "slbamm-sc", "rhg", "bda", "cg-aid", "ns-aid".
std::string method_name(const MethodSpec& m);
std::optional<MethodSpec> parse_method(std::string_view name);

// Whether the method maintains a multiplier estimate, making the
// stationarity residual (and a kkt-tol stop) available.
bool method_has_multiplier(const MethodSpec& m);

struct RunConfig {
  // problem
  ProblemKind problem = ProblemKind::llc;
  std::size_t n = 100;
  std::uint64_t seed = 0;
  double condition = 100.0;  // spectrum spread, random-llsc only

  // method
  MethodSpec method;
  ScheduleParams schedule;
  HypergradEngine engine;  // engine.kind follows method.engine
  double ul_lr = 0.005;    // outer step size, baseline methods
  bool warm_start = true;  // reuse the previous inner iterate, baseline methods

  // budget
  std::size_t max_iters = 4000;
  std::optional<double> kkt_tol;
  std::optional<double> time_limit_s;

  // output
  std::string out;  // empty: no trace file written
  TraceFormat format = TraceFormat::csv;
  bool oracle = true;  // attach closed-form reference values where defined
  TimingMode timing = TimingMode::wall;

  bool operator==(const RunConfig&) const = default;
};

// Makes the dependent fields agree with the method: engine.kind always, and
// schedule.strategy for solver methods. Callers that assemble a RunConfig by
// hand should pass it through here before running.
void sync_method(RunConfig& c);

nlohmann::json config_to_json(const RunConfig& c);

// Applies the document on top of defaults. Strict about content: unknown
// keys anywhere, wrong value types, and unparsable names throw ConfigError
// naming the offending key.
RunConfig config_from_json(const nlohmann::json& j);

// IoError when the file cannot be read, ConfigError for malformed JSON or
// contract violations inside it.
RunConfig load_config_file(const std::string& path);

// Semantic range checks; empty means the config is runnable.
std::vector<std::string> validate_config(const RunConfig& c);

}  // namespace bilevel
