#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace bilevel {

// File-system failure (as opposed to malformed content).
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One row of run history. Optional fields are absent when the information
// does not exist for the method or problem at hand: kkt needs a multiplier,
// the error fields need closed-form reference values at the row's mu, eta
// belongs to the three-way solver only.
struct IterateRecord {
  std::size_t k = 0;
  double wall_time_s = 0.0;
  double parallel_time_s = 0.0;
  double F = 0.0;
  std::optional<double> kkt;
  std::optional<double> x_err;
  std::optional<double> y_err;
  std::optional<double> v_err;
  std::optional<double> hypergrad_err;
  std::optional<double> grad_phi_norm;
  double mu = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  std::optional<double> eta;
  std::optional<double> lyapunov_V;
  // Norm of the UL direction; carried in memory and JSON but not a CSV
  // column (the CSV schema is frozen).
  std::optional<double> dx_norm;

  bool operator==(const IterateRecord&) const = default;
};

struct TraceMeta {
  nlohmann::json config;  // resolved run configuration
  std::string status;     // "ok" or "diverged"
  std::string stop;       // stop reason name
  std::size_t iterations = 0;
  std::optional<std::size_t> diverged_at;
  std::optional<double> x_star_norm;  // reference scale for x_err
  std::optional<double> f_star;       // bilevel optimal value
  std::string kernel_backend;
  std::size_t flagged_solves = 0;  // linear solves that ended non-converged

  bool operator==(const TraceMeta&) const = default;
};

struct Trace {
  TraceMeta meta;
  std::vector<IterateRecord> records;

  bool operator==(const Trace&) const = default;
};

enum class TraceFormat { csv, json };

std::string_view trace_format_name(TraceFormat f);
std::optional<TraceFormat> parse_trace_format(std::string_view name);

// The frozen CSV schema.
std::string_view csv_header();

// CSV: header plus one row per record, absent values as empty fields,
// floats as shortest round-trip decimals. JSON: object with "meta" and
// "records", absent values as null. Throws std::runtime_error naming the
// path on I/O failure.
void write_trace(const Trace& t, const std::string& path, TraceFormat format);

std::string trace_to_csv(const Trace& t);
nlohmann::json trace_to_json(const Trace& t);

// Inverse of trace_to_json; the round trip is lossless.
Trace trace_from_json(const nlohmann::json& j);
Trace read_trace_json(const std::string& path);

}  // namespace bilevel
