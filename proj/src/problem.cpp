#include "bilevel/problem.hpp"

#include <cmath>
#include <string>

namespace bilevel {

void check_x_dim(const BilevelProblem& p, const Vector& x, const char* what) {
  if (x.size() != p.dim_x())
    throw std::invalid_argument(std::string(what) + ": x has dimension " +
                                std::to_string(x.size()) + ", expected " +
                                std::to_string(p.dim_x()));
}

void check_y_dim(const BilevelProblem& p, const Vector& y, const char* what) {
  if (y.size() != p.dim_y())
    throw std::invalid_argument(std::string(what) + ": y has dimension " +
                                std::to_string(y.size()) + ", expected " +
                                std::to_string(p.dim_y()));
}

StepOracles BilevelProblem::step_oracles(const Vector& x, const Vector& y,
                                         const Vector& v,
                                         bool with_F_actions) const {
  StepOracles o;
  o.grad_x_F = grad_x_F(x, y);
  o.grad_y_F = grad_y_F(x, y);
  o.grad_y_f = grad_y_f(x, y);
  o.hvp_yy_f = hvp_yy_f(x, y, v);
  o.jvp_xy_f = jvp_xy_f(x, y, v);
  if (with_F_actions) {
    o.hvp_yy_F = hvp_yy_F(x, y, v);
    o.jvp_xy_F = jvp_xy_F(x, y, v);
  }
  return o;
}

AggregationContext::AggregationContext(const BilevelProblem& problem, double mu)
    : problem(&problem), mu(mu) {
  if (!(mu >= 0.0 && mu <= 1.0))
    throw std::invalid_argument("AggregationContext: mu must lie in [0, 1], got " +
                                std::to_string(mu));
}

std::optional<double> agg_sigma(const AggregationContext& ctx) {
  const ProblemMetadata& meta = ctx.problem->metadata();
  if (ctx.mu == 0.0) return meta.sigma_f;
  if (ctx.mu == 1.0) return meta.sigma_F;
  if (!meta.sigma_F || !meta.sigma_f) return std::nullopt;
  return ctx.mu * *meta.sigma_F + (1.0 - ctx.mu) * *meta.sigma_f;
}

namespace {

template <typename ActionF, typename Actionf>
Vector blend(const AggregationContext& ctx, ActionF&& upper, Actionf&& lower) {
  if (ctx.mu == 0.0) return lower();
  if (ctx.mu == 1.0) return upper();
  return combine(ctx.mu, upper(), 1.0 - ctx.mu, lower());
}

}  // namespace

Vector agg_grad_y(const AggregationContext& ctx, const Vector& x, const Vector& y) {
  const BilevelProblem& p = *ctx.problem;
  check_x_dim(p, x, "agg_grad_y");
  check_y_dim(p, y, "agg_grad_y");
  return blend(ctx, [&] { return p.grad_y_F(x, y); },
               [&] { return p.grad_y_f(x, y); });
}

Vector agg_hvp_yy(const AggregationContext& ctx, const Vector& x,
                  const Vector& y, const Vector& v) {
  const BilevelProblem& p = *ctx.problem;
  check_x_dim(p, x, "agg_hvp_yy");
  check_y_dim(p, y, "agg_hvp_yy");
  check_y_dim(p, v, "agg_hvp_yy");
  return blend(ctx, [&] { return p.hvp_yy_F(x, y, v); },
               [&] { return p.hvp_yy_f(x, y, v); });
}

Vector agg_jvp_xy(const AggregationContext& ctx, const Vector& x,
                  const Vector& y, const Vector& v) {
  const BilevelProblem& p = *ctx.problem;
  check_x_dim(p, x, "agg_jvp_xy");
  check_y_dim(p, y, "agg_jvp_xy");
  check_y_dim(p, v, "agg_jvp_xy");
  return blend(ctx, [&] { return p.jvp_xy_F(x, y, v); },
               [&] { return p.jvp_xy_f(x, y, v); });
}

}  // namespace bilevel
