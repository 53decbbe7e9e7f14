// Acceptance gate. Each numbered criterion is one self-contained check that
// prints a single pass/fail line with the measured quantities; tolerances
// are pinned in code. Run everything or one criterion with --criterion N.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <iterator>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "bilevel/baselines.hpp"
#include "bilevel/config.hpp"
#include "bilevel/diagnostics.hpp"
#include "bilevel/experiment.hpp"
#include "bilevel/linalg.hpp"
#include "bilevel/problems.hpp"
#include "bilevel/schedule.hpp"
#include "bilevel/solver.hpp"
#include "bilevel/trace.hpp"

namespace {

using namespace bilevel;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string str(const char* fmt, ...) {
  char buf[512];
  va_list args;
  va_start(args, fmt);
  std::vsnprintf(buf, sizeof buf, fmt, args);
  va_end(args);
  return buf;
}

// Deterministic uniform draw independent of the standard library's
// distribution implementations.
double urand(std::mt19937_64& rng, double lo, double hi) {
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return lo + u * (hi - lo);
}

Vector random_vector(std::mt19937_64& rng, std::size_t n, double lo, double hi) {
  Vector v(n);
  for (auto& e : v) e = urand(rng, lo, hi);
  return v;
}

double rms(const Vector& a, const Vector& b) {
  return norm_diff(a, b) / std::sqrt(static_cast<double>(a.size()));
}

// Convergence on the convex-only problem, strategy S3, dimension 100: the
// iterate must land at the true optimum e and the stationarity residual
// must fall three orders below its early value.
Outcome criterion_1() {
  RunConfig cfg;
  cfg.problem = ProblemKind::llc;
  cfg.n = 100;
  cfg.method = *parse_method("slbamm-s3");
  cfg.max_iters = 4000;
  const auto t0 = Clock::now();
  const Trace t = run_experiment(cfg);
  const double wall = seconds_since(t0);

  const double kkt10 = *t.records.at(10).kkt;
  const double kkt_final = *t.records.back().kkt;
  const double x_rms = *t.records.back().x_err / 10.0;
  const double decay = kkt_final / kkt10;

  Outcome o;
  o.pass = x_rms <= 5e-2 && decay <= 1e-3 && wall <= 30.0;
  o.detail = str("x rms err %.3g (<= 0.05), kkt %.3g / k10 %.3g = %.3g (<= 1e-3), %.2f s (<= 30)",
                 x_rms, kkt_final, kkt10, decay, wall);
  return o;
}

// The unrolled baseline stalls at the wrong fixed point e/2 on the
// convex-only problem, and both implicit engines flag their linear solves
// on its singular Hessian.
Outcome criterion_2() {
  const auto inst = make_problem(ProblemKind::llc, 100, 0, 0.0);
  const BilevelProblem& p = *inst.problem;

  HypergradEngine e;
  e.kind = EngineKind::rhg;
  RunBudget budget;
  budget.max_iters = 500;
  Vector fx;
  outer_loop(e, p, Vector(p.dim_x(), 0.0), Vector(p.dim_y(), 0.0), 0.005, budget,
             true, {}, &fx);
  const Vector half = constant_vector(100, 0.5);
  const double to_half = rms(fx, half);
  const double to_star = rms(fx, inst.x_star);

  std::size_t flagged[2] = {0, 0};
  const EngineKind kinds[2] = {EngineKind::cg_aid, EngineKind::ns_aid};
  for (int i = 0; i < 2; ++i) {
    RunConfig cfg;
    cfg.problem = ProblemKind::llc;
    cfg.n = 100;
    cfg.method.is_solver = false;
    cfg.method.engine = kinds[i];
    cfg.max_iters = 20;
    flagged[i] = run_experiment(cfg).meta.flagged_solves;
  }

  Outcome o;
  o.pass = to_half <= 1e-2 && to_star >= 0.4 && flagged[0] >= 1 && flagged[1] >= 1;
  o.detail = str("rhg rms to e/2 %.3g (<= 0.01), to e %.3g (>= 0.4); flagged solves cg %zu, ns %zu (>= 1)",
                 to_half, to_star, flagged[0], flagged[1]);
  return o;
}

// Holding the aggregation weight at zero removes the correction that makes
// the solver exact here: it must drift to the same wrong point e/2.
Outcome criterion_3() {
  const auto inst = make_problem(ProblemKind::llc, 100, 0, 0.0);
  const BilevelProblem& p = *inst.problem;
  ScheduleParams sp;
  sp.strategy = Strategy::sc;  // mu_k identically zero
  RunBudget budget;
  budget.max_iters = 4000;
  SolverState fin;
  slbamm_run(p, sp, zero_state(p), budget, {}, &fin);

  const double to_half = rms(fin.x, constant_vector(100, 0.5));
  const double to_star = rms(fin.x, inst.x_star);
  Outcome o;
  o.pass = to_half <= 1e-2 && to_star >= 0.4;
  o.detail = str("rms to e/2 %.3g (<= 0.01), to e %.3g (>= 0.4)", to_half, to_star);
  return o;
}

// On the strongly convex identity instance the strongly-convex schedule must
// hit e/2 to three digits and the upper-level direction must agree with the
// exact gradient.
Outcome criterion_4() {
  const auto inst = make_problem(ProblemKind::llsc, 100, 0, 0.0);
  const BilevelProblem& p = *inst.problem;
  ScheduleParams sp;
  sp.strategy = Strategy::sc;
  RunBudget budget;
  budget.max_iters = 4000;
  const auto t0 = Clock::now();
  SolverState fin;
  slbamm_run(p, sp, zero_state(p), budget, {}, &fin);
  const double wall = seconds_since(t0);

  const double rel = norm_diff(fin.x, inst.x_star) / norm(inst.x_star);
  const Directions d = step_directions(p, 0.0, fin.x, fin.y, fin.v);
  const auto ov = inst.oracle(fin.x, 0.0);
  Vector gap = d.d_x;
  axpy(-1.0, ov->grad_phi, gap);
  const double dir_err = norm(gap);

  Outcome o;
  o.pass = rel <= 1e-3 && dir_err <= 1e-3 && wall <= 30.0;
  o.detail = str("|x - e/2| / |e/2| = %.3g (<= 1e-3), |d_x - grad_phi| = %.3g (<= 1e-3), %.2f s (<= 30)",
                 rel, dir_err, wall);
  return o;
}

// The implicit and unrolled engines reproduce the analytic gradient, and
// the truncated-series error halves per extra term at step size 1/2 on the
// identity instance.
Outcome criterion_5() {
  std::mt19937_64 rng(7);

  double worst_cg = 0.0;
  for (int i = 0; i < 50; ++i) {
    const std::size_t n = 2 + static_cast<std::size_t>(i % 15);
    const double cond[] = {1.0, 10.0, 100.0};
    const auto inst =
        make_problem(ProblemKind::random_llsc, n, 1000 + i, cond[i % 3]);
    const Vector x = random_vector(rng, n, -2.0, 2.0);
    const auto ov = *inst.oracle(x, 0.0);
    const auto g = aid_cg_hypergradient(*inst.problem, x, ov.y_star, 1e-10, 500);
    worst_cg = std::max(worst_cg, norm_diff(g.g, ov.grad_phi));
  }

  const auto ident = make_problem(ProblemKind::llsc, 8, 0, 0.0);
  const Vector x = random_vector(rng, 8, -2.0, 2.0);
  const auto ov = *ident.oracle(x, 0.0);
  const auto ug = rhg_hypergradient(*ident.problem, 0.0, x,
                                    Vector(ident.problem->dim_y(), 0.0), 0.5, 1000);
  const double rhg_err = norm_diff(ug.g, ov.grad_phi);

  double worst_ratio_gap = 0.0;
  double prev = norm_diff(aid_ns_hypergradient(*ident.problem, x, ov.y_star, 0.5, 4).g,
                          ov.grad_phi);
  for (std::size_t m = 5; m <= 12; ++m) {
    const double err = norm_diff(
        aid_ns_hypergradient(*ident.problem, x, ov.y_star, 0.5, m).g, ov.grad_phi);
    worst_ratio_gap = std::max(worst_ratio_gap, std::fabs(err / prev - 0.5));
    prev = err;
  }

  Outcome o;
  o.pass = worst_cg <= 1e-8 && rhg_err <= 1e-6 && worst_ratio_gap <= 0.05;
  o.detail = str("cg worst err %.3g (<= 1e-8, 50 instances), rhg err %.3g (<= 1e-6), ns halving off by %.3g (<= 0.05)",
                 worst_cg, rhg_err, worst_ratio_gap);
  return o;
}

// At the reference (y*, v*) the stationarity residual coincides with the
// squared gradient norm, and vanishes at the optimum.
Outcome criterion_6() {
  const auto inst = make_problem(ProblemKind::llsc, 16, 0, 0.0);
  const BilevelProblem& p = *inst.problem;
  std::mt19937_64 rng(11);

  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const Vector x = random_vector(rng, 16, -3.0, 3.0);
    const auto ov = *inst.oracle(x, 0.0);
    const double kkt = kkt_residual(p, x, ov.y_star, ov.v_star);
    const double g2 = dot(ov.grad_phi, ov.grad_phi);
    worst = std::max(worst, std::fabs(kkt - g2));
  }

  const auto at_star = *inst.oracle(inst.x_star, 0.0);
  const double kkt_star =
      kkt_residual(p, inst.x_star, at_star.y_star, at_star.v_star);

  Outcome o;
  o.pass = worst <= 1e-10 && kkt_star <= 1e-20;
  o.detail = str("|kkt - |grad_phi|^2| worst %.3g (<= 1e-10, 100 points), at e/2 %.3g (<= 1e-20)",
                 worst, kkt_star);
  return o;
}

// Forwards everything, breaks one first-order action.
struct BrokenGradient final : BilevelProblem {
  const BilevelProblem& inner;
  explicit BrokenGradient(const BilevelProblem& p) : inner(p) {}
  std::size_t dim_x() const override { return inner.dim_x(); }
  std::size_t dim_y() const override { return inner.dim_y(); }
  double eval_F(const Vector& x, const Vector& y) const override {
    return inner.eval_F(x, y);
  }
  double eval_f(const Vector& x, const Vector& y) const override {
    return inner.eval_f(x, y);
  }
  Vector grad_x_F(const Vector& x, const Vector& y) const override {
    return inner.grad_x_F(x, y);
  }
  Vector grad_y_F(const Vector& x, const Vector& y) const override {
    Vector g = inner.grad_y_F(x, y);
    g[0] += 1.0;
    return g;
  }
  Vector grad_y_f(const Vector& x, const Vector& y) const override {
    return inner.grad_y_f(x, y);
  }
  Vector hvp_yy_F(const Vector& x, const Vector& y, const Vector& v) const override {
    return inner.hvp_yy_F(x, y, v);
  }
  Vector hvp_yy_f(const Vector& x, const Vector& y, const Vector& v) const override {
    return inner.hvp_yy_f(x, y, v);
  }
  Vector jvp_xy_F(const Vector& x, const Vector& y, const Vector& v) const override {
    return inner.jvp_xy_F(x, y, v);
  }
  Vector jvp_xy_f(const Vector& x, const Vector& y, const Vector& v) const override {
    return inner.jvp_xy_f(x, y, v);
  }
};

// Every analytic derivative action matches finite differences on all three
// problem families, and an injected fault is caught.
Outcome criterion_7() {
  std::vector<std::string> failed;
  const auto probe = [&](const BilevelProblem& p, const std::string& name) {
    if (!check_derivatives(p, 20, 2.0, 0, 1e-6).pass) failed.push_back(name);
  };
  probe(*make_problem(ProblemKind::llc, 7, 0, 0.0).problem, "llc");
  probe(*make_problem(ProblemKind::llsc, 7, 0, 0.0).problem, "llsc");
  for (std::uint64_t seed = 0; seed < 10; ++seed)
    probe(*make_problem(ProblemKind::random_llsc, 5 + seed % 5, seed, 50.0).problem,
          "random-" + std::to_string(seed));

  const auto base = make_problem(ProblemKind::llsc, 6, 0, 0.0);
  const BrokenGradient broken(*base.problem);
  const bool fault_caught = !check_derivatives(broken, 20, 2.0, 0, 1e-6).pass;

  Outcome o;
  o.pass = failed.empty() && fault_caught;
  o.detail = str("%zu/12 families clean, injected fault %s", 12 - failed.size(),
                 fault_caught ? "caught" : "MISSED");
  return o;
}

// Step sizes at k = 0 under the documented defaults, pinned to 1e-15.
Outcome criterion_8() {
  struct Want {
    Strategy s;
    double mu, beta, eta, alpha;
  };
  const Want wants[] = {
      {Strategy::s1, 0.9, 0.1, 0.081, 0.04782969},
      {Strategy::s2, 0.9, 0.1, 0.09, 0.059049},
      {Strategy::s3, 0.9, 0.1, 0.1, 0.0729},
      {Strategy::sc, 0.0, 0.1, 0.1, 0.1},
  };
  double worst = 0.0;
  for (const auto& w : wants) {
    ScheduleParams sp;
    sp.strategy = w.s;
    const StepSizes got = schedule_step_sizes(sp, 0);
    worst = std::max({worst, std::fabs(got.mu - w.mu), std::fabs(got.beta - w.beta),
                      std::fabs(got.eta - w.eta), std::fabs(got.alpha - w.alpha)});
  }
  Outcome o;
  o.pass = worst <= 1e-15;
  o.detail = str("worst |step - pinned| = %.3g (<= 1e-15)", worst);
  return o;
}

// The descent quantity stays bounded along the criterion-1 run and the
// reference errors collapse by two orders between k = 10 and the end.
Outcome criterion_9() {
  RunConfig cfg;
  cfg.problem = ProblemKind::llc;
  cfg.n = 100;
  cfg.method = *parse_method("slbamm-s3");
  cfg.max_iters = 4000;
  const Trace t = run_experiment(cfg);

  const double v0 = *t.records.front().lyapunov_V;
  double vmax = 0.0;
  for (const auto& r : t.records) vmax = std::max(vmax, *r.lyapunov_V);
  const double y10 = *t.records.at(10).y_err, y_end = *t.records.back().y_err;
  const double v10 = *t.records.at(10).v_err, v_end = *t.records.back().v_err;

  Outcome o;
  o.pass = vmax <= 10.0 * v0 && y_end <= 1e-2 * y10 && v_end <= 1e-2 * v10;
  o.detail = str("max V %.3g vs 10 V0 %.3g; y err %.3g vs 1e-2 * %.3g; v err %.3g vs 1e-2 * %.3g",
                 vmax, 10.0 * v0, y_end, y10, v_end, v10);
  return o;
}

// Dense-instance scaling: per-iteration cost grows with the matvec, i.e.
// quadratically within a generous band, and the large size stays fast.
Outcome criterion_10() {
  // Best of three per size: interference from the host only ever slows a
  // run down, so the minimum estimates the intrinsic per-iteration cost.
  const auto timed_run = [](std::size_t n) {
    const auto inst = make_problem(ProblemKind::random_llsc, n, 42, 100.0);
    ScheduleParams sp;
    sp.strategy = Strategy::sc;
    RunBudget budget;
    budget.max_iters = 1000;
    double best = std::numeric_limits<double>::infinity();
    for (int rep = 0; rep < 3; ++rep) {
      const auto t0 = Clock::now();
      slbamm_run(*inst.problem, sp, zero_state(*inst.problem), budget);
      best = std::min(best, seconds_since(t0));
    }
    return best;
  };
  const double w256 = timed_run(256);
  const double w1024 = timed_run(1024);
  const double ratio = w1024 / w256;

  Outcome o;
  o.pass = ratio >= 8.0 && ratio <= 32.0 && w1024 <= 120.0;
  o.detail = str("per-iter ratio 1024/256 = %.2f (in [8, 32]), 1000 iters at n=1024 in %.2f s (<= 120)",
                 ratio, w1024);
  return o;
}

// Harness contracts: reruns agree modulo clocks, the parallel clock never
// exceeds wall, the CSV header is frozen, configs survive the json round
// trip.
Outcome criterion_11() {
  bool deterministic = true, clocks_ordered = true;
  const auto strip = [](Trace t) {
    for (auto& r : t.records) r.wall_time_s = r.parallel_time_s = 0.0;
    return t;
  };
  for (const char* method : {"slbamm-s3", "cg-aid"}) {
    RunConfig cfg;
    cfg.problem = ProblemKind::llsc;
    cfg.n = 6;
    cfg.method = *parse_method(method);
    cfg.max_iters = 30;
    const Trace a = run_experiment(cfg);
    const Trace b = run_experiment(cfg);
    deterministic = deterministic && strip(a) == strip(b);
    for (const auto& r : a.records)
      clocks_ordered = clocks_ordered && r.parallel_time_s <= r.wall_time_s;
  }

  const bool header_frozen =
      csv_header() ==
      "k,wall_time_s,parallel_time_s,F,kkt,x_err,y_err,v_err,hypergrad_err,"
      "grad_phi_norm,mu,alpha,beta,eta,lyapunov_V";

  RunConfig c;
  c.problem = ProblemKind::random_llsc;
  c.n = 12;
  c.seed = 3;
  c.method = *parse_method("ns-aid");
  sync_method(c);
  c.kkt_tol = 1e-7;
  c.format = TraceFormat::json;
  c.timing = TimingMode::parallel;
  const bool round_trips = config_from_json(config_to_json(c)) == c &&
                           config_from_json(config_to_json(RunConfig{})) == RunConfig{};

  Outcome o;
  o.pass = deterministic && clocks_ordered && header_frozen && round_trips;
  o.detail = str("determinism %s, parallel <= wall %s, csv header %s, config round-trip %s",
                 deterministic ? "ok" : "BROKEN", clocks_ordered ? "ok" : "BROKEN",
                 header_frozen ? "ok" : "BROKEN", round_trips ? "ok" : "BROKEN");
  return o;
}

using CriterionFn = Outcome (*)();

const CriterionFn kCriteria[] = {criterion_1, criterion_2, criterion_3,
                                 criterion_4, criterion_5, criterion_6,
                                 criterion_7, criterion_8, criterion_9,
                                 criterion_10, criterion_11};

}  // namespace

int main(int argc, char** argv) {
  int selected = 0;  // 0 = all
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--criterion" && i + 1 < argc) {
      selected = std::atoi(argv[++i]);
    } else {
      std::fprintf(stderr, "usage: acceptance [--criterion N]\n");
      return 2;
    }
  }
  const int total = static_cast<int>(std::size(kCriteria));
  if (selected < 0 || selected > total) {
    std::fprintf(stderr, "criterion must lie in 1..%d\n", total);
    return 2;
  }

  bool all_pass = true;
  for (int i = 1; i <= total; ++i) {
    if (selected != 0 && selected != i) continue;
    const Outcome o = kCriteria[i - 1]();
    std::printf("criterion %d: %s  %s\n", i, o.pass ? "PASS" : "FAIL",
                o.detail.c_str());
    all_pass = all_pass && o.pass;
  }
  return all_pass ? 0 : 1;
}
