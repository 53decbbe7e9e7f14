#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bilevel/config.hpp"
#include "bilevel/trace.hpp"

namespace bilevel {

// Runs one configured experiment from the zero initial point and returns the
// full trace. Record k holds the state entering iteration k together with
// the direction computed there, so a run that exhausts an iteration budget
// of K yields K + 1 records and the last one scores the final state. Throws
// ConfigError when validate_config rejects cfg. Writes no files.
Trace run_experiment(const RunConfig& cfg);

enum class CompareMetric { kkt, dx_norm, x_err, hypergrad_err };

std::string_view compare_metric_name(CompareMetric m);
std::optional<CompareMetric> parse_compare_metric(std::string_view name);

// The metric's value on one record; nullopt when the record does not carry
// that field (kkt without a multiplier, x_err without reference values).
std::optional<double> record_metric(const IterateRecord& r, CompareMetric m);

// One method's progress toward the target, measured on its own trace.
struct CompareRow {
  std::string method;
  std::optional<std::size_t> iterations_to_target;  // first k at or below target
  std::optional<double> time_to_target_s;           // clock picked by cfg.timing
  std::optional<double> final_metric;
  std::size_t iterations = 0;
  std::string stop;
};

struct CompareResult {
  CompareMetric metric = CompareMetric::dx_norm;
  double target = 0.0;
  TimingMode timing = TimingMode::wall;
  std::vector<CompareRow> rows;
  std::vector<Trace> traces;  // same order as rows
};

// Runs base once per method, everything else shared, and reports the first
// iteration whose metric reaches the target.
CompareResult run_compare(const RunConfig& base,
                          const std::vector<MethodSpec>& methods,
                          CompareMetric metric, double target);

// Fixed-width text table over the rows; one line each, header first.
std::string compare_table(const CompareResult& r);
nlohmann::json compare_to_json(const CompareResult& r);

// Scalar knob a sweep moves along. Integer-valued axes take the value
// rounded to the nearest nonnegative integer.
enum class SweepParam { n, p, tau, beta, inner_steps, ns_terms, cg_tol };

std::string_view sweep_param_name(SweepParam p);
std::optional<SweepParam> parse_sweep_param(std::string_view name);

// base with the axis set to value.
RunConfig apply_sweep_value(RunConfig base, SweepParam param, double value);

struct SweepPoint {
  double value = 0.0;
  Trace trace;
};

struct SweepResult {
  SweepParam param = SweepParam::n;
  std::vector<SweepPoint> points;
};

// One full run per value. A 60 s time limit is imposed on each point when
// base carries none, so open-ended sweeps cannot hang.
SweepResult run_sweep(const RunConfig& base, SweepParam param,
                      const std::vector<double>& values);

std::string sweep_table(const SweepResult& r);
nlohmann::json sweep_to_json(const SweepResult& r);

}  // namespace bilevel
