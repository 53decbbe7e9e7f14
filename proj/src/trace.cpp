#include "bilevel/trace.hpp"

#include <charconv>
#include <fstream>

namespace bilevel {

namespace {

constexpr std::string_view kCsvHeader =
    "k,wall_time_s,parallel_time_s,F,kkt,x_err,y_err,v_err,hypergrad_err,"
    "grad_phi_norm,mu,alpha,beta,eta,lyapunov_V";

void append_double(std::string& out, double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, res.ptr);
}

void append_field(std::string& out, double v) {
  out.push_back(',');
  append_double(out, v);
}

void append_field(std::string& out, const std::optional<double>& v) {
  out.push_back(',');
  if (v) append_double(out, *v);
}

nlohmann::json opt_json(const std::optional<double>& v) {
  if (v) return *v;
  return nullptr;
}

nlohmann::json opt_json(const std::optional<std::size_t>& v) {
  if (v) return *v;
  return nullptr;
}

std::optional<double> opt_double(const nlohmann::json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

}  // namespace

std::string_view trace_format_name(TraceFormat f) {
  return f == TraceFormat::csv ? "csv" : "json";
}

std::optional<TraceFormat> parse_trace_format(std::string_view name) {
  if (name == "csv") return TraceFormat::csv;
  if (name == "json") return TraceFormat::json;
  return std::nullopt;
}

std::string_view csv_header() { return kCsvHeader; }

std::string trace_to_csv(const Trace& t) {
  std::string out(kCsvHeader);
  out.push_back('\n');
  for (const IterateRecord& r : t.records) {
    out += std::to_string(r.k);
    append_field(out, r.wall_time_s);
    append_field(out, r.parallel_time_s);
    append_field(out, r.F);
    append_field(out, r.kkt);
    append_field(out, r.x_err);
    append_field(out, r.y_err);
    append_field(out, r.v_err);
    append_field(out, r.hypergrad_err);
    append_field(out, r.grad_phi_norm);
    append_field(out, r.mu);
    append_field(out, r.alpha);
    append_field(out, r.beta);
    append_field(out, r.eta);
    append_field(out, r.lyapunov_V);
    out.push_back('\n');
  }
  return out;
}

nlohmann::json trace_to_json(const Trace& t) {
  nlohmann::json meta{{"config", t.meta.config},
                      {"status", t.meta.status},
                      {"stop", t.meta.stop},
                      {"iterations", t.meta.iterations},
                      {"diverged_at", opt_json(t.meta.diverged_at)},
                      {"x_star_norm", opt_json(t.meta.x_star_norm)},
                      {"f_star", opt_json(t.meta.f_star)},
                      {"kernel_backend", t.meta.kernel_backend},
                      {"flagged_solves", t.meta.flagged_solves}};
  nlohmann::json records = nlohmann::json::array();
  for (const IterateRecord& r : t.records) {
    records.push_back({{"k", r.k},
                       {"wall_time_s", r.wall_time_s},
                       {"parallel_time_s", r.parallel_time_s},
                       {"F", r.F},
                       {"kkt", opt_json(r.kkt)},
                       {"x_err", opt_json(r.x_err)},
                       {"y_err", opt_json(r.y_err)},
                       {"v_err", opt_json(r.v_err)},
                       {"hypergrad_err", opt_json(r.hypergrad_err)},
                       {"grad_phi_norm", opt_json(r.grad_phi_norm)},
                       {"mu", r.mu},
                       {"alpha", r.alpha},
                       {"beta", r.beta},
                       {"eta", opt_json(r.eta)},
                       {"lyapunov_V", opt_json(r.lyapunov_V)},
                       {"dx_norm", opt_json(r.dx_norm)}});
  }
  return {{"meta", std::move(meta)}, {"records", std::move(records)}};
}

Trace trace_from_json(const nlohmann::json& j) {
  Trace t;
  const auto& meta = j.at("meta");
  t.meta.config = meta.at("config");
  t.meta.status = meta.at("status").get<std::string>();
  t.meta.stop = meta.at("stop").get<std::string>();
  t.meta.iterations = meta.at("iterations").get<std::size_t>();
  if (!meta.at("diverged_at").is_null())
    t.meta.diverged_at = meta.at("diverged_at").get<std::size_t>();
  t.meta.x_star_norm = opt_double(meta.at("x_star_norm"));
  t.meta.f_star = opt_double(meta.at("f_star"));
  t.meta.kernel_backend = meta.at("kernel_backend").get<std::string>();
  t.meta.flagged_solves = meta.at("flagged_solves").get<std::size_t>();

  for (const auto& rj : j.at("records")) {
    IterateRecord r;
    r.k = rj.at("k").get<std::size_t>();
    r.wall_time_s = rj.at("wall_time_s").get<double>();
    r.parallel_time_s = rj.at("parallel_time_s").get<double>();
    r.F = rj.at("F").get<double>();
    r.kkt = opt_double(rj.at("kkt"));
    r.x_err = opt_double(rj.at("x_err"));
    r.y_err = opt_double(rj.at("y_err"));
    r.v_err = opt_double(rj.at("v_err"));
    r.hypergrad_err = opt_double(rj.at("hypergrad_err"));
    r.grad_phi_norm = opt_double(rj.at("grad_phi_norm"));
    r.mu = rj.at("mu").get<double>();
    r.alpha = rj.at("alpha").get<double>();
    r.beta = rj.at("beta").get<double>();
    r.eta = opt_double(rj.at("eta"));
    r.lyapunov_V = opt_double(rj.at("lyapunov_V"));
    r.dx_norm = opt_double(rj.at("dx_norm"));
    t.records.push_back(std::move(r));
  }
  return t;
}

void write_trace(const Trace& t, const std::string& path, TraceFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  if (format == TraceFormat::csv) {
    out << trace_to_csv(t);
  } else {
    out << trace_to_json(t).dump(2) << '\n';
  }
  out.flush();
  if (!out) throw IoError("write failed for " + path);
}

Trace read_trace_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path + " for reading");
  nlohmann::json j;
  in >> j;
  return trace_from_json(j);
}

}  // namespace bilevel
