#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bilevel/problem.hpp"
#include "bilevel/solver.hpp"

namespace bilevel {

// Comparison hypergradient engines. rhg and bda differentiate through an
// unrolled inner descent (bda descends on the mu-blend instead of f alone);
// cg_aid and ns_aid first locate the inner solution, then approximate the
// implicit multiplier by a linear solve in the inner Hessian.
enum class EngineKind { rhg, bda, cg_aid, ns_aid };

std::string_view engine_name(EngineKind k);
std::optional<EngineKind> parse_engine(std::string_view name);

struct HypergradEngine {
  EngineKind kind = EngineKind::rhg;
  std::size_t inner_steps = 100;  // T; inner descent budget, also locates y for AID
  double inner_lr = 0.1;          // inner descent step size
  double bda_mu = 0.1;            // blend weight, bda only
  double cg_tol = 1e-10;          // relative residual target, cg_aid only
  std::size_t cg_max_iter = 500;  // cg_aid only
  std::size_t ns_terms = 40;      // M; series length, ns_aid only
  double ns_lr = 0.1;             // series step size, ns_aid only

  bool operator==(const HypergradEngine&) const = default;
};

// Hard parameter errors (empty when the engine is usable).
std::vector<std::string> engine_errors(const HypergradEngine& e);

// T steps of gradient descent on the mu-blend in y starting from y0. Returns
// all T + 1 iterates; reverse-mode differentiation needs the full path.
// Throws std::invalid_argument for T = 0 and NumericalError naming the step
// at which an iterate went non-finite.
std::vector<Vector> inner_gd(const BilevelProblem& p, double mu, const Vector& x,
                             const Vector& y0, double beta, std::size_t T);

// Outcome of the linear solve behind an AID hypergradient. converged means
// |H v - b| <= tol * max(1, |b|); on a singular inner Hessian the best
// iterate is still returned with converged = false.
struct LinearSolveInfo {
  std::size_t iterations = 0;
  double residual_norm = 0.0;
  bool converged = false;
};

struct UnrolledGrad {
  Vector g;    // d/dx of F(x, y_T(x)) holding y0 fixed
  Vector y_t;  // final inner iterate y_T
};

// Reverse-mode differentiation through inner_gd: the adjoint starts at
// grad_y_F(x, y_T) and is pulled back through each inner step, accumulating
// the mixed-block contribution into g. mu = 0 is plain unrolling; mu > 0
// unrolls the blended descent.
UnrolledGrad rhg_hypergradient(const BilevelProblem& p, double mu, const Vector& x,
                               const Vector& y0, double beta, std::size_t T);

struct AidGrad {
  Vector g;  // grad_x_F - jvp_xy_f(v)
  Vector v;  // approximate solution of hvp_yy_f(.) v = grad_y_F
  LinearSolveInfo solve;
};

// Implicit differentiation at y (which should approximate the inner
// minimizer): v solves the inner-Hessian system by conjugate gradients.
AidGrad aid_cg_hypergradient(const BilevelProblem& p, const Vector& x,
                             const Vector& y, double tol, std::size_t max_iter);

// Same formula with v built from the truncated series
//   v = beta * sum_{i=0}^{M} (I - beta H)^i b,  b = grad_y_F, H = hvp_yy_f,
// via the recursion s_{i+1} = s_i - beta H s_i. Needs beta * lambda_max(H) < 1
// to converge; this is not enforced. The residual |H v - b| is always
// measured so a truncated or non-convergent series is flagged.
AidGrad aid_ns_hypergradient(const BilevelProblem& p, const Vector& x,
                             const Vector& y, double beta, std::size_t terms);

// One engine evaluation at x, starting the inner descent from y0.
struct HypergradResult {
  Vector g;                             // UL direction d_x
  Vector y;                             // inner iterate the direction was formed at
  std::optional<Vector> v;              // multiplier, AID engines only
  std::optional<LinearSolveInfo> solve; // linear-solve diagnostics, AID engines only
};

HypergradResult hypergradient(const HypergradEngine& e, const BilevelProblem& p,
                              const Vector& x, const Vector& y0);

// Observer view at outer state x_k. grad is the engine output at x_k (it
// drives the step to x_{k+1}; the final state gets a scoring-only
// evaluation). kkt is filled when the engine produced a multiplier.
// parallel_s accumulates engine-plus-apply time per applied step; wall_s is
// total elapsed time including scoring, so parallel_s <= wall_s. A baseline
// step has a single update block, unlike the three-way solver accounting.
struct OuterEvent {
  std::size_t k = 0;
  const Vector* x = nullptr;
  const HypergradResult* grad = nullptr;
  std::optional<double> kkt;
  double wall_s = 0.0;
  double parallel_s = 0.0;
};

using OuterObserver = std::function<void(const OuterEvent&)>;

// Outer descent x_{k+1} = x_k - ul_lr * g_k. warm_start_y feeds each
// evaluation the previous inner iterate instead of y0. budget.kkt_tol is
// accepted only for engines that produce a multiplier (AID); requesting it
// for rhg/bda throws std::invalid_argument. Divergence, whether a non-finite
// x or a blown-up inner loop, ends the run with the partial history;
// nothing is thrown. Observer fires once per scored state, state 0 included.
RunStatus outer_loop(const HypergradEngine& e, const BilevelProblem& p,
                     Vector x0, Vector y0, double ul_lr, const RunBudget& budget,
                     bool warm_start_y = true, const OuterObserver& observer = {},
                     Vector* final_x = nullptr);

}  // namespace bilevel
