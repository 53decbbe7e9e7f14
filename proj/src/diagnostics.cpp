#include "bilevel/diagnostics.hpp"

#include <cmath>
#include <random>

#include "bilevel/linalg.hpp"

namespace bilevel {

namespace {

constexpr double kFdStep = 1e-5;

// Uniform in [-radius, radius] / sqrt(n) per component, so |v| <= radius.
// Uses raw engine output for cross-platform determinism.
Vector bounded_point(std::mt19937_64& rng, std::size_t n, double radius) {
  Vector v(n);
  const double scale = radius / std::sqrt(static_cast<double>(n));
  for (auto& e : v) e = scale * (2.0 * ((rng() >> 11) * 0x1p-53) - 1.0);
  return v;
}

double rel_err(const Vector& got, const Vector& want) {
  return norm_diff(got, want) / std::max(1.0, norm(want));
}

struct Probe {
  Vector x, y, vy;  // point plus a direction probe in the y block
};

void fold(DerivativeCheck& check, const Probe& pt, double err) {
  if (err > check.max_rel_err || check.worst_x.empty()) {
    check.max_rel_err = err;
    check.worst_x = pt.x;
    check.worst_y = pt.y;
  }
}

}  // namespace

DerivativeReport check_derivatives(const BilevelProblem& p, std::size_t num_points,
                                   double radius, std::uint64_t seed,
                                   double threshold) {
  DerivativeReport report;
  report.threshold = threshold;
  report.checks.resize(7);
  const char* names[] = {"grad_x_F", "grad_y_F", "grad_y_f", "hvp_yy_F",
                         "hvp_yy_f", "jvp_xy_F", "jvp_xy_f"};
  for (std::size_t i = 0; i < 7; ++i) report.checks[i].name = names[i];

  std::mt19937_64 rng(seed);
  for (std::size_t pt_idx = 0; pt_idx < num_points; ++pt_idx) {
    Probe pt;
    pt.x = bounded_point(rng, p.dim_x(), radius);
    pt.y = bounded_point(rng, p.dim_y(), radius);
    pt.vy = bounded_point(rng, p.dim_y(), 1.0);

    const auto F_of_x = [&](const Vector& x) { return p.eval_F(x, pt.y); };
    const auto F_of_y = [&](const Vector& y) { return p.eval_F(pt.x, y); };
    const auto f_of_y = [&](const Vector& y) { return p.eval_f(pt.x, y); };
    const auto gyF = [&](const Vector& y) { return p.grad_y_F(pt.x, y); };
    const auto gyf = [&](const Vector& y) { return p.grad_y_f(pt.x, y); };
    const auto gxF = [&](const Vector& y) { return p.grad_x_F(pt.x, y); };

    fold(report.checks[0], pt,
         rel_err(p.grad_x_F(pt.x, pt.y), fd_gradient(F_of_x, pt.x, kFdStep)));
    fold(report.checks[1], pt,
         rel_err(p.grad_y_F(pt.x, pt.y), fd_gradient(F_of_y, pt.y, kFdStep)));
    fold(report.checks[2], pt,
         rel_err(p.grad_y_f(pt.x, pt.y), fd_gradient(f_of_y, pt.y, kFdStep)));
    fold(report.checks[3], pt,
         rel_err(p.hvp_yy_F(pt.x, pt.y, pt.vy), fd_hvp(gyF, pt.y, pt.vy, kFdStep)));
    fold(report.checks[4], pt,
         rel_err(p.hvp_yy_f(pt.x, pt.y, pt.vy), fd_hvp(gyf, pt.y, pt.vy, kFdStep)));
    // The mixed F-action equals the derivative of grad_x_F along the
    // y-probe; the two orders of differentiation coincide for smooth
    // objectives. f exposes no x-gradient, so its mixed action is checked
    // as the x-gradient of the scalar <grad_y_f, probe> instead.
    fold(report.checks[5], pt,
         rel_err(p.jvp_xy_F(pt.x, pt.y, pt.vy), fd_hvp(gxF, pt.y, pt.vy, kFdStep)));
    const auto f_pairing = [&](const Vector& x) {
      return dot(p.grad_y_f(x, pt.y), pt.vy);
    };
    fold(report.checks[6], pt,
         rel_err(p.jvp_xy_f(pt.x, pt.y, pt.vy),
                 fd_gradient(f_pairing, pt.x, kFdStep)));
  }

  report.pass = true;
  for (auto& c : report.checks) {
    c.pass = c.max_rel_err <= threshold;
    report.pass = report.pass && c.pass;
  }
  return report;
}

LyapunovCoefficients lyapunov_coefficients(Strategy s, std::size_t k, double tau,
                                           double sigma) {
  const double d = static_cast<double>(k) + 1.0;
  const double slow = std::pow(d, -tau / 2.0);
  const double fast = std::pow(d, -tau);
  switch (s) {
    case Strategy::s1:
      return {fast * sigma * sigma, slow * sigma * sigma,
              fast * std::pow(sigma, 6)};
    case Strategy::s2:
      return {fast, slow, fast * std::pow(sigma, 3)};
    case Strategy::s3:
      return {fast, slow, fast * sigma * sigma};
    case Strategy::sc:
      return {1.0, 1.0, 1.0};
  }
  return {};
}

std::optional<LyapunovValue> lyapunov_value(const BilevelProblem& p,
                                            const ScheduleParams& sp, std::size_t k,
                                            const SolverState& state,
                                            const OracleValues& oracle) {
  const ProblemMetadata& meta = p.metadata();
  if (!meta.F_lower_bound) return std::nullopt;
  double sigma = 0.0;
  const double mu = schedule_step_sizes(sp, k).mu;
  if (sp.strategy != Strategy::sc) {
    const auto s = agg_sigma(AggregationContext(p, mu));
    if (!s) return std::nullopt;
    sigma = *s;
  }

  LyapunovValue out;
  out.coeffs = lyapunov_coefficients(sp.strategy, k, sp.tau, sigma);
  out.objective_gap =
      out.coeffs.a * (p.eval_F(state.x, oracle.y_star) - *meta.F_lower_bound);
  const double dy = norm_diff(state.y, oracle.y_star);
  const double dv = norm_diff(state.v, oracle.v_star);
  out.y_term = out.coeffs.b * dy * dy;
  out.v_term = out.coeffs.c * dv * dv;
  out.V = out.objective_gap + out.y_term + out.v_term;
  return out;
}

ErrorDecomposition error_decomposition(const BilevelProblem& p, const Vector& x_star,
                                       const OracleValues& oracle,
                                       const SolverState& state, const Vector& d_x) {
  ErrorDecomposition out;
  out.x_err = norm_diff(state.x, x_star);
  out.y_err = norm_diff(state.y, oracle.y_star);
  out.v_err = norm_diff(state.v, oracle.v_star);
  out.hypergrad_err = norm_diff(d_x, oracle.grad_phi);
  out.kkt = kkt_residual(p, state.x, state.y, state.v);
  return out;
}

}  // namespace bilevel
