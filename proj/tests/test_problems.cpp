#include "bilevel/problems.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "doctest.h"

using namespace bilevel;

namespace {

Vector random_vec(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Vector v(n);
  for (auto& x : v) x = 2.0 * ((rng() >> 11) * 0x1p-53) - 1.0;
  return v;
}

void check_close(const Vector& got, const Vector& want, double tol) {
  REQUIRE(got.size() == want.size());
  for (std::size_t i = 0; i < got.size(); ++i)
    CHECK(got[i] == doctest::Approx(want[i]).epsilon(tol).scale(1.0));
}

}  // namespace

TEST_CASE("convex toy problem evaluations at a fixed point") {
  const LLCProblem p(2);
  const Vector x{0.5, 2.0};
  const Vector y{1.0, -1.0, 0.0, 1.0};
  const Vector v{1.0, 2.0, 3.0, 4.0};

  CHECK(p.eval_F(x, y) == 2.625);
  CHECK(p.eval_f(x, y) == 2.5);
  CHECK(p.grad_x_F(x, y) == Vector{0.5, 1.0});
  CHECK(p.grad_y_F(x, y) == Vector{0.0, -2.0, -0.5, -1.0});
  CHECK(p.grad_y_f(x, y) == Vector{0.5, -3.0, 0.0, 0.0});
  CHECK(p.hvp_yy_F(x, y, v) == v);
  CHECK(p.hvp_yy_f(x, y, v) == Vector{1.0, 2.0, 0.0, 0.0});
  CHECK(p.jvp_xy_F(x, y, v) == Vector{-3.0, -4.0});
  CHECK(p.jvp_xy_f(x, y, v) == Vector{-1.0, -2.0});

  CHECK(*p.metadata().sigma_F == 1.0);
  CHECK(*p.metadata().sigma_f == 0.0);
  CHECK(*p.metadata().F_lower_bound == 0.0);
  CHECK(p.x_star() == Vector{1.0, 1.0});
}

TEST_CASE("convex toy reference values") {
  const Vector x{0.5, 2.0};
  const OracleValues o = llc_oracle(2, x, 0.5);
  CHECK(o.y_star == Vector{0.75, 1.5, 0.5, 2.0});
  CHECK(o.v_star == Vector{-0.25, 0.5, 0.0, 0.0});
  CHECK(o.phi == doctest::Approx(0.15625).epsilon(1e-15));
  check_close(o.grad_phi, Vector{-0.125, 0.25}, 1e-15);

  CHECK_THROWS_AS(llc_oracle(2, x, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(llc_oracle(2, x, -0.5), std::invalid_argument);
  CHECK_THROWS_AS(llc_oracle(2, x, 1.5), std::invalid_argument);
  CHECK_THROWS_AS(llc_oracle(3, x, 0.5), std::invalid_argument);
}

TEST_CASE("convex toy reference satisfies its optimality system") {
  // grad_y of the blend vanishes at y*, and the blended Hessian maps v* to
  // grad_y_F(x, y*).
  const std::size_t n = 5;
  const LLCProblem p(n);
  const Vector x = random_vec(n, 7);
  for (double mu : {0.9, 0.5, 0.05}) {
    const AggregationContext ctx(p, mu);
    const OracleValues o = llc_oracle(n, x, mu);
    CHECK(norm(agg_grad_y(ctx, x, o.y_star)) <= 1e-14);
    const Vector want = p.grad_y_F(x, o.y_star);
    check_close(agg_hvp_yy(ctx, x, o.y_star, o.v_star), want, 1e-13);
  }
}

TEST_CASE("strongly convex toy problem evaluations at a fixed point") {
  Matrix a(2, 2);
  a(0, 0) = 2.0; a(0, 1) = 1.0;
  a(1, 0) = 1.0; a(1, 1) = 3.0;
  const LLSCProblem p(a, Vector{1.0, 2.0});
  const Vector x{1.0, 1.0};
  const Vector y{2.0, 0.0};
  const Vector v{1.0, 1.0};

  CHECK(p.eval_F(x, y) == 4.5);
  CHECK(p.eval_f(x, y) == 2.0);
  CHECK(p.grad_x_F(x, y) == Vector{0.0, -1.0});
  CHECK(p.grad_y_F(x, y) == Vector{4.0, 2.0});
  CHECK(p.grad_y_f(x, y) == Vector{3.0, 1.0});
  CHECK(p.hvp_yy_F(x, y, v) == Vector{3.0, 4.0});
  CHECK(p.hvp_yy_f(x, y, v) == Vector{3.0, 4.0});
  CHECK(p.jvp_xy_F(x, y, v) == Vector{0.0, 0.0});
  CHECK(p.jvp_xy_f(x, y, v) == Vector{-1.0, -1.0});

  // eigenvalues of A are (5 +- sqrt(5)) / 2; metadata holds estimates
  CHECK(*p.metadata().sigma_f ==
        doctest::Approx((5.0 - std::sqrt(5.0)) / 2.0).epsilon(1e-6));
  CHECK(p.metadata().lipschitz.at("L_f_y2") ==
        doctest::Approx((5.0 + std::sqrt(5.0)) / 2.0).epsilon(1e-6));

  // (A + I) x* = A z0 with A z0 = (4, 7): x* = (9/11, 17/11)
  check_close(p.x_star(), Vector{9.0 / 11.0, 17.0 / 11.0}, 1e-12);
}

TEST_CASE("strongly convex toy reference values") {
  Matrix a(2, 2);
  a(0, 0) = 2.0; a(0, 1) = 1.0;
  a(1, 0) = 1.0; a(1, 1) = 3.0;
  const LLSCProblem p(a, Vector{1.0, 2.0});
  const Vector x{1.0, 1.0};

  const OracleValues o0 = p.oracle(x, 0.0);
  check_close(o0.y_star, Vector{0.4, 0.2}, 1e-13);
  check_close(o0.v_star, o0.y_star, 1e-15);
  CHECK(o0.phi == doctest::Approx(0.8).epsilon(1e-13));
  check_close(o0.grad_phi, Vector{0.4, -0.8}, 1e-13);
  check_close(llsc_oracle(a, Vector{1.0, 2.0}, x).grad_phi, o0.grad_phi, 1e-15);

  const OracleValues oh = p.oracle(x, 0.5);
  check_close(oh.y_star, Vector{0.2, 0.1}, 1e-13);
  CHECK(oh.phi == doctest::Approx(0.575).epsilon(1e-13));
  check_close(oh.grad_phi, Vector{0.1, -0.95}, 1e-13);

  CHECK_THROWS_AS(p.oracle(x, -0.1), std::invalid_argument);
}

TEST_CASE("identity instance optimum") {
  const LLSCProblem p = LLSCProblem::identity(3);
  check_close(p.x_star(), Vector(3, 0.5), 1e-14);
  const OracleValues o = p.oracle(Vector(3, 0.5), 0.0);
  CHECK(o.phi == doctest::Approx(0.75).epsilon(1e-14));  // n / 4
  CHECK(norm(o.grad_phi) <= 1e-14);
  check_close(o.y_star, Vector(3, 0.5), 1e-14);
}

TEST_CASE("non-SPD matrix is rejected at construction") {
  Matrix a(2, 2);
  a(0, 0) = 1.0; a(0, 1) = 2.0;
  a(1, 0) = 2.0; a(1, 1) = 1.0;
  CHECK_THROWS_AS(LLSCProblem(a, Vector{0.0, 0.0}), NumericalError);
}

TEST_CASE("seeded instances are reproducible") {
  const ProblemInstance a = make_problem(ProblemKind::random_llsc, 12, 5, 100.0);
  const ProblemInstance b = make_problem(ProblemKind::random_llsc, 12, 5, 100.0);
  const ProblemInstance c = make_problem(ProblemKind::random_llsc, 12, 6, 100.0);
  const auto& pa = dynamic_cast<const LLSCProblem&>(*a.problem);
  const auto& pb = dynamic_cast<const LLSCProblem&>(*b.problem);
  const auto& pc = dynamic_cast<const LLSCProblem&>(*c.problem);
  CHECK(pa.a().data() == pb.a().data());
  CHECK(pa.a().data() != pc.a().data());
}

TEST_CASE("generated spectrum spans the requested conditioning") {
  const double kappa = 250.0;
  const ProblemInstance inst = make_problem(ProblemKind::random_llsc, 16, 9, kappa);
  const auto& p = dynamic_cast<const LLSCProblem&>(*inst.problem);
  CHECK(*p.metadata().sigma_f == 1.0);
  CHECK(p.metadata().lipschitz.at("L_f_y2") == kappa);

  // Rayleigh quotients live inside the stated spectrum.
  for (std::uint64_t s = 0; s < 100; ++s) {
    const Vector u = random_vec(16, 400 + s);
    const double rq = dot(u, p.a().apply(u)) / dot(u, u);
    CHECK(rq >= 1.0 - 1e-9);
    CHECK(rq <= kappa + 1e-9);
  }
}

TEST_CASE("blended curvature lower-bounds Rayleigh quotients") {
  for (auto [kind, n] : {std::pair{ProblemKind::llc, std::size_t{6}},
                         std::pair{ProblemKind::llsc, std::size_t{6}},
                         std::pair{ProblemKind::random_llsc, std::size_t{6}}}) {
    const ProblemInstance inst = make_problem(kind, n, 17, 30.0);
    const BilevelProblem& p = *inst.problem;
    const Vector x = random_vec(p.dim_x(), 31);
    const Vector y = random_vec(p.dim_y(), 32);
    for (double mu : {0.0, 0.3, 0.9, 1.0}) {
      const AggregationContext ctx(p, mu);
      const double sigma = agg_sigma(ctx).value();
      for (std::uint64_t s = 0; s < 100; ++s) {
        const Vector u = random_vec(p.dim_y(), 500 + s);
        const double rq = dot(u, agg_hvp_yy(ctx, x, y, u)) / dot(u, u);
        CHECK(rq >= sigma - 1e-9);
      }
    }
  }
}

TEST_CASE("multiplier reference obeys the curvature bound") {
  // |v*| <= |grad_y_F(x, y*)| / sigma of the blend.
  for (std::uint64_t s = 0; s < 20; ++s) {
    const ProblemInstance inst = make_problem(ProblemKind::random_llsc, 8, s, 40.0);
    const BilevelProblem& p = *inst.problem;
    const Vector x = random_vec(8, 600 + s);
    for (double mu : {0.0, 0.4, 0.9}) {
      const OracleValues o = inst.oracle(x, mu).value();
      const double sigma = agg_sigma(AggregationContext(p, mu)).value();
      const double bound = norm(p.grad_y_F(x, o.y_star)) / sigma;
      CHECK(norm(o.v_star) <= bound * (1.0 + 1e-12) + 1e-12);
    }
  }
  // Convex toy: sigma of the blend is mu itself.
  const ProblemInstance llc = make_problem(ProblemKind::llc, 8, 0, 0.0);
  const Vector x = random_vec(8, 700);
  for (double mu : {0.05, 0.5, 0.9}) {
    const OracleValues o = llc.oracle(x, mu).value();
    const double bound = norm(llc.problem->grad_y_F(x, o.y_star)) / mu;
    CHECK(norm(o.v_star) <= bound * (1.0 + 1e-12));
  }
  CHECK_FALSE(llc.oracle(x, 0.0).has_value());
}

TEST_CASE("bundled oracles equal the individual oracles bit for bit") {
  // llc exercises the forwarding default, llsc and random_llsc the fused
  // single-sweep override.
  for (auto [kind, n] : {std::pair{ProblemKind::llc, std::size_t{4}},
                         std::pair{ProblemKind::llsc, std::size_t{6}},
                         std::pair{ProblemKind::random_llsc, std::size_t{5}}}) {
    const ProblemInstance inst = make_problem(kind, n, 7, 30.0);
    const BilevelProblem& p = *inst.problem;
    const Vector x = random_vec(p.dim_x(), 1300 + n);
    const Vector y = random_vec(p.dim_y(), 1310 + n);
    const Vector v = random_vec(p.dim_y(), 1320 + n);

    for (bool with_F : {false, true}) {
      CAPTURE(problem_kind_name(kind));
      CAPTURE(with_F);
      const StepOracles o = p.step_oracles(x, y, v, with_F);
      CHECK(o.grad_x_F == p.grad_x_F(x, y));
      CHECK(o.grad_y_F == p.grad_y_F(x, y));
      CHECK(o.grad_y_f == p.grad_y_f(x, y));
      CHECK(o.hvp_yy_f == p.hvp_yy_f(x, y, v));
      CHECK(o.jvp_xy_f == p.jvp_xy_f(x, y, v));
      if (with_F) {
        CHECK(o.hvp_yy_F == p.hvp_yy_F(x, y, v));
        CHECK(o.jvp_xy_F == p.jvp_xy_F(x, y, v));
      } else {
        CHECK(o.hvp_yy_F.empty());
        CHECK(o.jvp_xy_F.empty());
      }
    }
  }
}

TEST_CASE("problem kind names round-trip") {
  for (ProblemKind k : {ProblemKind::llc, ProblemKind::llsc, ProblemKind::random_llsc})
    CHECK(parse_problem_kind(problem_kind_name(k)) == k);
  CHECK_FALSE(parse_problem_kind("nope").has_value());
}
