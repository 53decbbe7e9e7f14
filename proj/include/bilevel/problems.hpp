#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>

#include "bilevel/problem.hpp"

namespace bilevel {

// Closed-form reference quantities at a fixed outer point x and mixing
// weight mu: the blended inner minimizer y*, the multiplier v*, the reduced
// objective value phi = F(x, y*), and its total gradient.
struct OracleValues {
  Vector y_star;
  Vector v_star;
  double phi = 0.0;
  Vector grad_phi;
};

// Convex-but-not-strongly-convex inner problem. x in R^n, y = (y1, y2) in
// R^{2n}, e the all-ones vector:
//   F(x, y) = 1/2 |x - y2|^2 + 1/2 |y1 - e|^2
//   f(x, y) = 1/2 |y1|^2 - x . y1
// The inner Hessian blockdiag(I, 0) is singular, so implicit-function
// methods have no well-posed linear system here. The bilevel optimum is
// x = y1 = y2 = e.
class LLCProblem final : public BilevelProblem {
 public:
  explicit LLCProblem(std::size_t n);

  std::size_t dim_x() const override { return n_; }
  std::size_t dim_y() const override { return 2 * n_; }

  double eval_F(const Vector& x, const Vector& y) const override;
  double eval_f(const Vector& x, const Vector& y) const override;
  Vector grad_x_F(const Vector& x, const Vector& y) const override;
  Vector grad_y_F(const Vector& x, const Vector& y) const override;
  Vector grad_y_f(const Vector& x, const Vector& y) const override;
  Vector hvp_yy_F(const Vector& x, const Vector& y, const Vector& v) const override;
  Vector hvp_yy_f(const Vector& x, const Vector& y, const Vector& v) const override;
  Vector jvp_xy_F(const Vector& x, const Vector& y, const Vector& v) const override;
  Vector jvp_xy_f(const Vector& x, const Vector& y, const Vector& v) const override;
  const ProblemMetadata& metadata() const override { return meta_; }

  Vector x_star() const { return Vector(n_, 1.0); }

 private:
  std::size_t n_;
  ProblemMetadata meta_;
};

// Reference for the blended inner problem of LLCProblem, defined for
// mu in (0, 1]:
//   y1* = mu e + (1 - mu) x,  y2* = x
//   v*  = ((1 - mu)(x - e), 0)
//   phi = 1/2 (1 - mu)^2 |x - e|^2,  grad_phi = (1 - mu)^2 (x - e)
// At mu = 0 the blended minimizer is non-unique and no reference exists.
OracleValues llc_oracle(std::size_t n, const Vector& x, double mu);

// Strongly convex inner problem. x, y in R^n, A symmetric positive definite:
//   F(x, y) = 1/2 |x - z0|^2 + 1/2 y' A y
//   f(x, y) = 1/2 y' A y - x . y
// Reduced objective phi(x) = 1/2 |x - z0|^2 + 1/2 x' A^{-1} x with unique
// minimizer x* = (A + I)^{-1} A z0.
class LLSCProblem final : public BilevelProblem {
 public:
  // lambda_min / lambda_max: extreme eigenvalues of A when known by
  // construction; estimated by (inverse) power iteration otherwise.
  LLSCProblem(Matrix a, Vector z0,
              std::optional<double> lambda_min = std::nullopt,
              std::optional<double> lambda_max = std::nullopt);

  // A = I, z0 = e; optimum x* = y* = e/2.
  static LLSCProblem identity(std::size_t n);

  std::size_t dim_x() const override { return z0_.size(); }
  std::size_t dim_y() const override { return z0_.size(); }

  double eval_F(const Vector& x, const Vector& y) const override;
  double eval_f(const Vector& x, const Vector& y) const override;
  Vector grad_x_F(const Vector& x, const Vector& y) const override;
  Vector grad_y_F(const Vector& x, const Vector& y) const override;
  Vector grad_y_f(const Vector& x, const Vector& y) const override;
  Vector hvp_yy_F(const Vector& x, const Vector& y, const Vector& v) const override;
  Vector hvp_yy_f(const Vector& x, const Vector& y, const Vector& v) const override;
  Vector jvp_xy_F(const Vector& x, const Vector& y, const Vector& v) const override;
  Vector jvp_xy_f(const Vector& x, const Vector& y, const Vector& v) const override;
  // A y and A v feed five of the seven pieces, so both products come out of
  // a single sweep over A instead of one matvec per oracle.
  StepOracles step_oracles(const Vector& x, const Vector& y, const Vector& v,
                           bool with_F_actions) const override;
  const ProblemMetadata& metadata() const override { return meta_; }

  const Matrix& a() const { return a_; }
  const Vector& z0() const { return z0_; }
  Vector x_star() const;

  // Reference at mixing weight mu in [0, 1] using the cached factorization:
  //   y* = v* = (1 - mu) A^{-1} x
  //   phi = 1/2 |x - z0|^2 + 1/2 (1 - mu)^2 x' A^{-1} x
  //   grad_phi = (x - z0) + (1 - mu)^2 A^{-1} x
  OracleValues oracle(const Vector& x, double mu) const;

 private:
  Matrix a_;
  Vector z0_;
  CholeskyFactor chol_;
  ProblemMetadata meta_;
};

// One-shot reference at mu = 0; factors a on every call.
OracleValues llsc_oracle(const Matrix& a, const Vector& z0, const Vector& x);

enum class ProblemKind { llc, llsc, random_llsc };

std::string_view problem_kind_name(ProblemKind k);
std::optional<ProblemKind> parse_problem_kind(std::string_view name);

// A constructed problem together with everything the harness needs to score
// iterates against ground truth.
struct ProblemInstance {
  ProblemKind kind = ProblemKind::llc;
  std::shared_ptr<const BilevelProblem> problem;
  Vector x_star;
  // phi at x_star (the bilevel optimal value).
  double f_star = 0.0;
  // Reference at (x, mu); nullopt where undefined (LLC at mu = 0).
  std::function<std::optional<OracleValues>(const Vector& x, double mu)> oracle;
};

// kind = llc         -> LLCProblem(n); seed and condition_number unused
// kind = llsc        -> LLSCProblem::identity(n)
// kind = random_llsc -> LLSC with A = Q diag(spectrum) Q', where Q comes from
//   a seeded Householder QR of a Gaussian matrix and the spectrum is
//   log-uniform on [1, condition_number] with the endpoints pinned (n >= 2),
//   so the condition number is exact. Same seed, same A, bit for bit.
ProblemInstance make_problem(ProblemKind kind, std::size_t n, std::uint64_t seed,
                             double condition_number);

}  // namespace bilevel
