#include "bilevel/solver.hpp"

#include <chrono>
#include <cmath>

namespace bilevel {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void check_state_dims(const BilevelProblem& p, const SolverState& s, const char* what) {
  check_x_dim(p, s.x, what);
  check_y_dim(p, s.y, what);
  check_y_dim(p, s.v, what);
}

// Two-sided blend matching agg_*: the endpoints return the active side
// untouched and never read the other one.
Vector blend_mu(double mu, const Vector& upper, const Vector& lower) {
  if (mu == 0.0) return lower;
  if (mu == 1.0) return upper;
  return combine(mu, upper, 1.0 - mu, lower);
}

// Directions assembled from one shared oracle bundle, with per-lane timing.
// Each lane's reading is the bundle cost it has to wait for plus its own
// O(n) assembly; a three-way parallel implementation would take the max.
Directions timed_directions(const BilevelProblem& p, double mu,
                            const SolverState& s, StepTimings& t,
                            StepOracles* oracles_out = nullptr) {
  if (!(mu >= 0.0 && mu <= 1.0))
    throw std::invalid_argument("update directions: mu must lie in [0, 1], got " +
                                std::to_string(mu));
  auto t0 = Clock::now();
  StepOracles o = p.step_oracles(s.x, s.y, s.v, mu > 0.0);
  const double shared = seconds_since(t0);
  Directions d;

  t0 = Clock::now();
  d.d_y = blend_mu(mu, o.grad_y_F, o.grad_y_f);
  t.y = shared + seconds_since(t0);

  t0 = Clock::now();
  d.d_v = o.grad_y_F;
  axpy(-1.0, blend_mu(mu, o.hvp_yy_F, o.hvp_yy_f), d.d_v);
  t.v = shared + seconds_since(t0);

  t0 = Clock::now();
  d.d_x = o.grad_x_F;
  axpy(-1.0, blend_mu(mu, o.jvp_xy_F, o.jvp_xy_f), d.d_x);
  t.x = shared + seconds_since(t0);

  if (oracles_out != nullptr) *oracles_out = std::move(o);
  return d;
}

// Residual from pieces already in hand; same arithmetic as kkt_residual.
double kkt_from(const StepOracles& o) {
  Vector b1 = o.grad_x_F;
  axpy(-1.0, o.jvp_xy_f, b1);
  Vector b2 = o.grad_y_F;
  axpy(-1.0, o.hvp_yy_f, b2);
  return dot(b1, b1) + dot(b2, b2) + dot(o.grad_y_f, o.grad_y_f);
}

// Applies the three updates in place, adding each block's cost to t.
void timed_apply(SolverState& s, const Directions& d, const StepSizes& sizes,
                 StepTimings& t) {
  auto t0 = Clock::now();
  axpy(-sizes.beta, d.d_y, s.y);
  t.y += seconds_since(t0);

  t0 = Clock::now();
  axpy(sizes.eta, d.d_v, s.v);
  t.v += seconds_since(t0);

  t0 = Clock::now();
  axpy(-sizes.alpha, d.d_x, s.x);
  t.x += seconds_since(t0);

  s.k += 1;
}

bool state_finite(const SolverState& s) {
  return all_finite(s.x) && all_finite(s.y) && all_finite(s.v);
}

}  // namespace

SolverState zero_state(const BilevelProblem& p) {
  SolverState s;
  s.x = Vector(p.dim_x(), 0.0);
  s.y = Vector(p.dim_y(), 0.0);
  s.v = Vector(p.dim_y(), 0.0);
  return s;
}

Directions step_directions(const BilevelProblem& p, double mu, const Vector& x,
                           const Vector& y, const Vector& v) {
  SolverState s;
  s.x = x;
  s.y = y;
  s.v = v;
  check_state_dims(p, s, "step_directions");
  StepTimings t;
  return timed_directions(p, mu, s, t);
}

double kkt_residual(const BilevelProblem& p, const Vector& x, const Vector& y,
                    const Vector& v) {
  check_x_dim(p, x, "kkt_residual");
  check_y_dim(p, y, "kkt_residual");
  check_y_dim(p, v, "kkt_residual");
  return kkt_from(p.step_oracles(x, y, v, false));
}

SolverState slbamm_step(const BilevelProblem& p, const SolverState& state,
                        const StepSizes& sizes, StepTimings* timings,
                        Directions* directions_out) {
  check_state_dims(p, state, "slbamm_step");
  StepTimings t;
  Directions d = timed_directions(p, sizes.mu, state, t);
  SolverState next = state;
  timed_apply(next, d, sizes, t);
  if (timings != nullptr) *timings = t;
  if (directions_out != nullptr) *directions_out = std::move(d);
  if (!state_finite(next))
    throw DivergenceError("slbamm_step: non-finite state at iteration " +
                              std::to_string(next.k),
                          state);
  return next;
}

std::string_view stop_reason_name(StopReason r) {
  switch (r) {
    case StopReason::budget_exhausted:
      return "budget-exhausted";
    case StopReason::kkt_tol_reached:
      return "kkt-tol-reached";
    case StopReason::time_limit:
      return "time-limit";
    case StopReason::diverged:
      return "diverged";
  }
  return "unknown";
}

RunStatus slbamm_run(const BilevelProblem& p, const ScheduleParams& sp,
                     SolverState init, const RunBudget& budget,
                     const IterationObserver& observer,
                     SolverState* final_state) {
  if (budget.max_iters < 1)
    throw std::invalid_argument("slbamm_run: max_iters must be >= 1");
  check_state_dims(p, init, "slbamm_run");
  if (!state_finite(init))
    throw std::invalid_argument("slbamm_run: initial state must be finite");

  SolverState state = std::move(init);
  state.k = 0;
  RunStatus status;
  double parallel_s = 0.0;
  const auto t_start = Clock::now();

  for (std::size_t k = 0;; ++k) {
    const StepSizes sizes = schedule_step_sizes(sp, k);
    StepTimings t;
    StepOracles oracles;
    const Directions d = timed_directions(p, sizes.mu, state, t, &oracles);
    const double kkt = kkt_from(oracles);

    if (observer) {
      IterationEvent ev;
      ev.k = k;
      ev.state = &state;
      ev.sizes = sizes;
      ev.directions = &d;
      ev.kkt = kkt;
      ev.wall_s = seconds_since(t_start);
      ev.parallel_s = parallel_s;
      observer(ev);
    }

    status.iterations = k;
    if (budget.kkt_tol && kkt <= *budget.kkt_tol) {
      status.stop = StopReason::kkt_tol_reached;
      break;
    }
    if (k == budget.max_iters) {
      status.stop = StopReason::budget_exhausted;
      break;
    }
    if (budget.wall_clock_limit_s &&
        seconds_since(t_start) >= *budget.wall_clock_limit_s) {
      status.stop = StopReason::time_limit;
      break;
    }

    timed_apply(state, d, sizes, t);
    parallel_s += t.max_block();
    if (!state_finite(state)) {
      status.stop = StopReason::diverged;
      status.diverged_at = k + 1;
      break;
    }
  }

  if (final_state != nullptr && status.stop != StopReason::diverged)
    *final_state = std::move(state);
  return status;
}

}  // namespace bilevel
