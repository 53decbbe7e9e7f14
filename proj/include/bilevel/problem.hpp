#pragma once

#include <map>
#include <optional>
#include <string>

#include "bilevel/linalg.hpp"

namespace bilevel {

// Optional curvature and smoothness data a problem can expose. sigma_F and
// sigma_f are strong-convexity moduli of F(x, .) and f(x, .); F_lower_bound
// is a global lower bound on F. lipschitz holds named smoothness constants
// (e.g. "L_F_y2", "L_f_y2" for the Lipschitz moduli of the y-gradients).
struct ProblemMetadata {
  std::optional<double> sigma_F;
  std::optional<double> sigma_f;
  std::optional<double> F_lower_bound;
  std::map<std::string, double> lipschitz;
};

// Everything one coupled-direction iteration consumes at a single point
// (x, y, v): the outer gradients, the inner y-gradient, and the
// second-order actions on v. The F-side actions are filled only on request;
// the aggregation endpoints never read them.
struct StepOracles {
  Vector grad_x_F;
  Vector grad_y_F;
  Vector grad_y_f;
  Vector hvp_yy_f;
  Vector jvp_xy_f;
  Vector hvp_yy_F;
  Vector jvp_xy_F;
};

// Two-level problem: outer objective F(x, y), inner objective f(x, y), with
// first-order oracles plus matrix-free second-order actions in y. All
// second-order information enters through Hessian-vector products hvp_yy_*
// (v in R^m -> R^m) and mixed products jvp_xy_* (v in R^m -> R^n), so no
// Hessian is ever materialized.
class BilevelProblem {
 public:
  virtual ~BilevelProblem() = default;

  virtual std::size_t dim_x() const = 0;
  virtual std::size_t dim_y() const = 0;

  virtual double eval_F(const Vector& x, const Vector& y) const = 0;
  virtual double eval_f(const Vector& x, const Vector& y) const = 0;

  virtual Vector grad_x_F(const Vector& x, const Vector& y) const = 0;
  virtual Vector grad_y_F(const Vector& x, const Vector& y) const = 0;
  virtual Vector grad_y_f(const Vector& x, const Vector& y) const = 0;

  virtual Vector hvp_yy_F(const Vector& x, const Vector& y, const Vector& v) const = 0;
  virtual Vector hvp_yy_f(const Vector& x, const Vector& y, const Vector& v) const = 0;
  virtual Vector jvp_xy_F(const Vector& x, const Vector& y, const Vector& v) const = 0;
  virtual Vector jvp_xy_f(const Vector& x, const Vector& y, const Vector& v) const = 0;

  // The whole per-iteration bundle in one call. The default forwards to the
  // individual oracles; problems whose pieces share work (one dense matvec
  // feeding several outputs) should override it. Overrides must return
  // bitwise the same values as the default, so nothing downstream depends
  // on which path ran.
  virtual StepOracles step_oracles(const Vector& x, const Vector& y,
                                   const Vector& v, bool with_F_actions) const;

  virtual const ProblemMetadata& metadata() const {
    static const ProblemMetadata empty;
    return empty;
  }
};

void check_x_dim(const BilevelProblem& p, const Vector& x, const char* what);
void check_y_dim(const BilevelProblem& p, const Vector& y, const char* what);

// Binds a problem to a mixing weight mu in [0, 1] for the blended inner
// objective mu * F + (1 - mu) * f.
struct AggregationContext {
  AggregationContext(const BilevelProblem& problem, double mu);

  const BilevelProblem* problem;
  double mu;
};

// Convex combination of the strong-convexity moduli; empty if either side is
// missing (except at the endpoints, where only one side is needed).
std::optional<double> agg_sigma(const AggregationContext& ctx);

// Gradient of the blended objective in y. Exactly mu * grad_y_F + (1 - mu)
// * grad_y_f with one multiply and one add per element, so the result is
// bitwise reproducible across kernel backends. At mu = 0 or mu = 1 only the
// active side is evaluated.
Vector agg_grad_y(const AggregationContext& ctx, const Vector& x, const Vector& y);

// Hessian action of the blended objective in y applied to v.
Vector agg_hvp_yy(const AggregationContext& ctx, const Vector& x,
                  const Vector& y, const Vector& v);

// Mixed second-derivative action of the blended objective applied to v.
Vector agg_jvp_xy(const AggregationContext& ctx, const Vector& x,
                  const Vector& y, const Vector& v);

}  // namespace bilevel
