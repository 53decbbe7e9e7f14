#include "bilevel/baselines.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>
#include <utility>

#include "bilevel/linalg.hpp"

namespace bilevel {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Invented threshold: the series has no tolerance parameter of its own, so a
// solve is called converged when it matches the CG-style relative residual
// at 1e-6.
constexpr double kNsResidualRelTol = 1e-6;

}  // namespace

std::string_view engine_name(EngineKind k) {
  switch (k) {
    case EngineKind::rhg:
      return "rhg";
    case EngineKind::bda:
      return "bda";
    case EngineKind::cg_aid:
      return "cg-aid";
    case EngineKind::ns_aid:
      return "ns-aid";
  }
  return "?";
}

std::optional<EngineKind> parse_engine(std::string_view name) {
  for (EngineKind k : {EngineKind::rhg, EngineKind::bda, EngineKind::cg_aid,
                       EngineKind::ns_aid})
    if (name == engine_name(k)) return k;
  return std::nullopt;
}

std::vector<std::string> engine_errors(const HypergradEngine& e) {
  std::vector<std::string> errs;
  const auto positive = [&](double value, const char* name) {
    if (!(std::isfinite(value) && value > 0.0))
      errs.push_back(std::string(name) + " must be positive and finite");
  };
  if (e.inner_steps < 1) errs.push_back("inner-steps must be at least 1");
  positive(e.inner_lr, "inner-lr");
  switch (e.kind) {
    case EngineKind::bda:
      if (!(std::isfinite(e.bda_mu) && e.bda_mu > 0.0 && e.bda_mu < 1.0))
        errs.push_back("bda-mu must lie strictly between 0 and 1");
      break;
    case EngineKind::cg_aid:
      positive(e.cg_tol, "cg-tol");
      if (e.cg_max_iter < 1) errs.push_back("cg-max-iter must be at least 1");
      break;
    case EngineKind::ns_aid:
      positive(e.ns_lr, "ns-lr");
      break;
    case EngineKind::rhg:
      break;
  }
  return errs;
}

std::vector<Vector> inner_gd(const BilevelProblem& p, double mu, const Vector& x,
                             const Vector& y0, double beta, std::size_t T) {
  if (T < 1) throw std::invalid_argument("inner_gd: T must be at least 1");
  const AggregationContext ctx(p, mu);
  std::vector<Vector> path;
  path.reserve(T + 1);
  path.push_back(y0);
  for (std::size_t t = 1; t <= T; ++t) {
    Vector y = path.back();
    axpy(-beta, agg_grad_y(ctx, x, path.back()), y);
    if (!all_finite(y))
      throw NumericalError("inner_gd: non-finite iterate at step " +
                           std::to_string(t));
    path.push_back(std::move(y));
  }
  return path;
}

UnrolledGrad rhg_hypergradient(const BilevelProblem& p, double mu, const Vector& x,
                               const Vector& y0, double beta, std::size_t T) {
  const std::vector<Vector> path = inner_gd(p, mu, x, y0, beta, T);
  const AggregationContext ctx(p, mu);
  Vector a = p.grad_y_F(x, path[T]);
  Vector g = p.grad_x_F(x, path[T]);
  for (std::size_t t = T; t >= 1; --t) {
    const Vector& y_prev = path[t - 1];
    axpy(-beta, agg_jvp_xy(ctx, x, y_prev, a), g);
    axpy(-beta, agg_hvp_yy(ctx, x, y_prev, a), a);
  }
  return {std::move(g), path[T]};
}

AidGrad aid_cg_hypergradient(const BilevelProblem& p, const Vector& x,
                             const Vector& y, double tol, std::size_t max_iter) {
  const LinearOperator hessian{
      p.dim_y(), [&](const Vector& w) { return p.hvp_yy_f(x, y, w); }};
  CgResult cg = cg_solve(hessian, p.grad_y_F(x, y), tol, max_iter);
  Vector g = p.grad_x_F(x, y);
  axpy(-1.0, p.jvp_xy_f(x, y, cg.x), g);
  return {std::move(g), std::move(cg.x),
          {cg.iterations, cg.residual_norm, cg.converged}};
}

AidGrad aid_ns_hypergradient(const BilevelProblem& p, const Vector& x,
                             const Vector& y, double beta, std::size_t terms) {
  const Vector b = p.grad_y_F(x, y);
  Vector s = b;
  Vector v = scaled(beta, b);
  for (std::size_t i = 1; i <= terms; ++i) {
    axpy(-beta, p.hvp_yy_f(x, y, s), s);
    axpy(beta, s, v);
  }
  const Vector residual = combine(1.0, p.hvp_yy_f(x, y, v), -1.0, b);
  const double rn = norm(residual);
  LinearSolveInfo info{terms + 1, rn,
                       rn <= kNsResidualRelTol * std::max(1.0, norm(b))};
  Vector g = p.grad_x_F(x, y);
  axpy(-1.0, p.jvp_xy_f(x, y, v), g);
  return {std::move(g), std::move(v), info};
}

HypergradResult hypergradient(const HypergradEngine& e, const BilevelProblem& p,
                              const Vector& x, const Vector& y0) {
  switch (e.kind) {
    case EngineKind::rhg: {
      UnrolledGrad u = rhg_hypergradient(p, 0.0, x, y0, e.inner_lr, e.inner_steps);
      return {std::move(u.g), std::move(u.y_t), std::nullopt, std::nullopt};
    }
    case EngineKind::bda: {
      UnrolledGrad u =
          rhg_hypergradient(p, e.bda_mu, x, y0, e.inner_lr, e.inner_steps);
      return {std::move(u.g), std::move(u.y_t), std::nullopt, std::nullopt};
    }
    case EngineKind::cg_aid: {
      Vector y = inner_gd(p, 0.0, x, y0, e.inner_lr, e.inner_steps).back();
      AidGrad a = aid_cg_hypergradient(p, x, y, e.cg_tol, e.cg_max_iter);
      return {std::move(a.g), std::move(y), std::move(a.v), a.solve};
    }
    case EngineKind::ns_aid: {
      Vector y = inner_gd(p, 0.0, x, y0, e.inner_lr, e.inner_steps).back();
      AidGrad a = aid_ns_hypergradient(p, x, y, e.ns_lr, e.ns_terms);
      return {std::move(a.g), std::move(y), std::move(a.v), a.solve};
    }
  }
  throw std::logic_error("hypergradient: unknown engine kind");
}

RunStatus outer_loop(const HypergradEngine& e, const BilevelProblem& p,
                     Vector x0, Vector y0, double ul_lr, const RunBudget& budget,
                     bool warm_start_y, const OuterObserver& observer,
                     Vector* final_x) {
  if (budget.max_iters < 1)
    throw std::invalid_argument("outer_loop: max_iters must be at least 1");
  if (const auto errs = engine_errors(e); !errs.empty())
    throw std::invalid_argument("outer_loop: " + errs.front());
  if (!all_finite(x0) || !all_finite(y0))
    throw std::invalid_argument("outer_loop: non-finite initial state");
  const bool has_multiplier =
      e.kind == EngineKind::cg_aid || e.kind == EngineKind::ns_aid;
  if (budget.kkt_tol && !has_multiplier)
    throw std::invalid_argument(
        "outer_loop: kkt-tol requires an engine that maintains a multiplier");

  RunStatus status;
  Vector x = std::move(x0);
  Vector y_init = std::move(y0);
  const auto t0 = Clock::now();
  double parallel = 0.0;
  std::size_t k = 0;
  while (true) {
    const auto block_start = Clock::now();
    HypergradResult hg;
    try {
      hg = hypergradient(e, p, x, y_init);
    } catch (const NumericalError&) {
      status.stop = StopReason::diverged;
      status.iterations = k > 0 ? k - 1 : 0;
      status.diverged_at = k;
      break;
    }
    const double block_compute = seconds_since(block_start);

    std::optional<double> kkt;
    if (hg.v) kkt = kkt_residual(p, x, hg.y, *hg.v);
    status.iterations = k;
    if (observer) {
      OuterEvent ev;
      ev.k = k;
      ev.x = &x;
      ev.grad = &hg;
      ev.kkt = kkt;
      ev.wall_s = seconds_since(t0);
      ev.parallel_s = parallel;
      observer(ev);
    }

    if (budget.kkt_tol && kkt && *kkt <= *budget.kkt_tol) {
      status.stop = StopReason::kkt_tol_reached;
      break;
    }
    if (k == budget.max_iters) {
      status.stop = StopReason::budget_exhausted;
      break;
    }
    if (budget.wall_clock_limit_s &&
        seconds_since(t0) >= *budget.wall_clock_limit_s) {
      status.stop = StopReason::time_limit;
      break;
    }

    const auto apply_start = Clock::now();
    axpy(-ul_lr, hg.g, x);
    parallel += block_compute + seconds_since(apply_start);
    if (warm_start_y) y_init = std::move(hg.y);
    ++k;
    if (!all_finite(x)) {
      status.stop = StopReason::diverged;
      status.iterations = k - 1;
      status.diverged_at = k;
      break;
    }
  }
  if (final_x && status.stop != StopReason::diverged) *final_x = std::move(x);
  return status;
}

}  // namespace bilevel
