#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bilevel/problem.hpp"
#include "bilevel/problems.hpp"
#include "bilevel/schedule.hpp"
#include "bilevel/solver.hpp"

namespace bilevel {

// One derivative action compared against its central-difference estimate.
struct DerivativeCheck {
  std::string name;  // "grad_x_F", "hvp_yy_f", ...
  double max_rel_err = 0.0;
  Vector worst_x;  // point with the largest error
  Vector worst_y;
  bool pass = false;
};

struct DerivativeReport {
  double threshold = 0.0;
  std::vector<DerivativeCheck> checks;
  bool pass = false;  // every check under the threshold
};

// Compares all seven analytic derivative actions against finite differences
// at num_points seeded random points with |x|, |y| <= radius. Failures are
// reported in the result, never thrown.
DerivativeReport check_derivatives(const BilevelProblem& p, std::size_t num_points,
                                   double radius, std::uint64_t seed,
                                   double threshold = 1e-6);

struct LyapunovCoefficients {
  double a = 1.0;
  double b = 1.0;
  double c = 1.0;
};

// Weights of the three descent terms. sigma is the blended strong-convexity
// modulus at the mu in force at iteration k; it enters the mu > 0 strategies
// only. All three weights are positive and nonincreasing in k.
LyapunovCoefficients lyapunov_coefficients(Strategy s, std::size_t k, double tau,
                                           double sigma);

struct LyapunovValue {
  double V = 0.0;
  double objective_gap = 0.0;  // a * (F(x, y*_mu(x)) - F_lower_bound)
  double y_term = 0.0;         // b * |y - y*_mu(x)|^2
  double v_term = 0.0;         // c * |v - v*_mu(x)|^2
  LyapunovCoefficients coeffs;
};

// Descent quantity tracked by the convergence analysis, evaluated with
// closed-form reference values at the schedule's mu_k. Returns nullopt when
// the problem does not expose the needed metadata (F_lower_bound always;
// both strong-convexity moduli for the mu > 0 strategies), so the feature
// quietly disables itself on problems without that information.
std::optional<LyapunovValue> lyapunov_value(const BilevelProblem& p,
                                            const ScheduleParams& sp, std::size_t k,
                                            const SolverState& state,
                                            const OracleValues& oracle);

struct ErrorDecomposition {
  double x_err = 0.0;
  double y_err = 0.0;
  double v_err = 0.0;
  double hypergrad_err = 0.0;
  double kkt = 0.0;
};

// Distances to the reference solution: |x - x_star|, |y - y*_mu(x)|,
// |v - v*_mu(x)|, |d_x - grad_phi_mu(x)|, plus the stationarity residual
// (same code path as the solver's measure).
ErrorDecomposition error_decomposition(const BilevelProblem& p, const Vector& x_star,
                                       const OracleValues& oracle,
                                       const SolverState& state, const Vector& d_x);

}  // namespace bilevel
