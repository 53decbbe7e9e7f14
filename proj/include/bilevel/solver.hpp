#pragma once

#include <functional>
#include <optional>
#include <stdexcept>

#include "bilevel/problem.hpp"
#include "bilevel/schedule.hpp"

namespace bilevel {

struct SolverState {
  std::size_t k = 0;
  Vector x;
  Vector y;
  Vector v;
};

// All-zero initial state matching the problem's dimensions.
SolverState zero_state(const BilevelProblem& p);

struct Directions {
  Vector d_y;
  Vector d_v;
  Vector d_x;
};

// Update directions at (x, y, v) for mixing weight mu:
//   d_y = grad_y of the blend
//   d_v = grad_y_F - (blended Hessian) v
//   d_x = grad_x_F - (blended mixed action) v
Directions step_directions(const BilevelProblem& p, double mu, const Vector& x,
                           const Vector& y, const Vector& v);

// Squared norm of the full first-order optimality residual
//   |grad_x_F - jvp_xy_f(v)|^2 + |grad_y_F - hvp_yy_f(v)|^2 + |grad_y_f|^2
// at (x, y, v). Always measured against the inner objective f itself, not
// the blend, so runs with mu > 0 are scored against the original problem.
double kkt_residual(const BilevelProblem& p, const Vector& x, const Vector& y,
                    const Vector& v);

// A step produced a non-finite state. last_finite holds the incoming state.
struct DivergenceError : std::runtime_error {
  DivergenceError(const std::string& msg, SolverState last)
      : std::runtime_error(msg), last_finite(std::move(last)) {}
  SolverState last_finite;
};

// Seconds each update lane would take on its own worker: the shared oracle
// evaluation it has to wait for, plus that lane's assembly and apply. The
// lanes overlap, so a three-way parallel implementation pays the max.
struct StepTimings {
  double y = 0.0;
  double v = 0.0;
  double x = 0.0;
  double max_block() const { return std::max(y, std::max(v, x)); }
};

// One iteration: y' = y - beta d_y, v' = v + eta d_v, x' = x - alpha d_x,
// with every direction evaluated at the incoming state, so the three updates
// commute. Throws DivergenceError if the new state is non-finite.
SolverState slbamm_step(const BilevelProblem& p, const SolverState& state,
                        const StepSizes& sizes, StepTimings* timings = nullptr,
                        Directions* directions_out = nullptr);

struct RunBudget {
  std::size_t max_iters = 4000;
  std::optional<double> kkt_tol;
  std::optional<double> wall_clock_limit_s;
};

enum class StopReason { budget_exhausted, kkt_tol_reached, time_limit, diverged };

std::string_view stop_reason_name(StopReason r);

struct RunStatus {
  StopReason stop = StopReason::budget_exhausted;
  // Steps applied; state indices 0..iterations were observed finite.
  std::size_t iterations = 0;
  // State index that went non-finite (one past the last recorded state).
  std::optional<std::size_t> diverged_at;
};

// Everything an observer sees at state index k. Directions are evaluated at
// this state (they drive the step k -> k+1, and give the final state a
// first-class gradient estimate). parallel_s accumulates, per applied step,
// the max over the three update lanes of oracle-plus-assembly-plus-apply
// time; wall_s is elapsed real time including observer and residual
// bookkeeping, so parallel_s <= wall_s.
struct IterationEvent {
  std::size_t k = 0;
  const SolverState* state = nullptr;
  StepSizes sizes;
  const Directions* directions = nullptr;
  double kkt = 0.0;
  double wall_s = 0.0;
  double parallel_s = 0.0;
};

using IterationObserver = std::function<void(const IterationEvent&)>;

// Runs the single-loop iteration from init until the budget stops it:
// max_iters steps, the optional KKT threshold, the optional wall-clock
// limit, or divergence (the run ends cleanly with the partial history;
// nothing is thrown). The observer fires once per finite state, state 0
// included. Deterministic given identical inputs up to the timing fields.
RunStatus slbamm_run(const BilevelProblem& p, const ScheduleParams& sp,
                     SolverState init, const RunBudget& budget,
                     const IterationObserver& observer = {},
                     SolverState* final_state = nullptr);

}  // namespace bilevel
