#include "bilevel/problems.hpp"

#include <cmath>
#include <random>
#include <string>
#include <utility>

namespace bilevel {

namespace {

Vector stack(const Vector& a, const Vector& b) {
  Vector out;
  out.reserve(a.size() + b.size());
  out.insert(out.end(), a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

}  // namespace

LLCProblem::LLCProblem(std::size_t n) : n_(n) {
  if (n == 0) throw std::invalid_argument("LLCProblem: n must be positive");
  meta_.sigma_F = 1.0;
  meta_.sigma_f = 0.0;
  meta_.F_lower_bound = 0.0;
  meta_.lipschitz = {{"L_F_y2", 1.0}, {"L_f_y2", 1.0}};
}

double LLCProblem::eval_F(const Vector& x, const Vector& y) const {
  check_x_dim(*this, x, "eval_F");
  check_y_dim(*this, y, "eval_F");
  double s = 0.0;
  for (std::size_t i = 0; i < n_; ++i) {
    const double dx = x[i] - y[n_ + i];
    const double dy = y[i] - 1.0;
    s += dx * dx + dy * dy;
  }
  return 0.5 * s;
}

double LLCProblem::eval_f(const Vector& x, const Vector& y) const {
  check_x_dim(*this, x, "eval_f");
  check_y_dim(*this, y, "eval_f");
  double s = 0.0;
  for (std::size_t i = 0; i < n_; ++i) s += 0.5 * y[i] * y[i] - x[i] * y[i];
  return s;
}

Vector LLCProblem::grad_x_F(const Vector& x, const Vector& y) const {
  check_x_dim(*this, x, "grad_x_F");
  check_y_dim(*this, y, "grad_x_F");
  Vector g(n_);
  for (std::size_t i = 0; i < n_; ++i) g[i] = x[i] - y[n_ + i];
  return g;
}

Vector LLCProblem::grad_y_F(const Vector& x, const Vector& y) const {
  check_x_dim(*this, x, "grad_y_F");
  check_y_dim(*this, y, "grad_y_F");
  Vector g(2 * n_);
  for (std::size_t i = 0; i < n_; ++i) {
    g[i] = y[i] - 1.0;
    g[n_ + i] = y[n_ + i] - x[i];
  }
  return g;
}

Vector LLCProblem::grad_y_f(const Vector& x, const Vector& y) const {
  check_x_dim(*this, x, "grad_y_f");
  check_y_dim(*this, y, "grad_y_f");
  Vector g(2 * n_, 0.0);
  for (std::size_t i = 0; i < n_; ++i) g[i] = y[i] - x[i];
  return g;
}

Vector LLCProblem::hvp_yy_F(const Vector& x, const Vector& y, const Vector& v) const {
  check_x_dim(*this, x, "hvp_yy_F");
  check_y_dim(*this, y, "hvp_yy_F");
  check_y_dim(*this, v, "hvp_yy_F");
  return v;
}

Vector LLCProblem::hvp_yy_f(const Vector& x, const Vector& y, const Vector& v) const {
  check_x_dim(*this, x, "hvp_yy_f");
  check_y_dim(*this, y, "hvp_yy_f");
  check_y_dim(*this, v, "hvp_yy_f");
  Vector out(2 * n_, 0.0);
  for (std::size_t i = 0; i < n_; ++i) out[i] = v[i];
  return out;
}

Vector LLCProblem::jvp_xy_F(const Vector& x, const Vector& y, const Vector& v) const {
  check_x_dim(*this, x, "jvp_xy_F");
  check_y_dim(*this, y, "jvp_xy_F");
  check_y_dim(*this, v, "jvp_xy_F");
  Vector out(n_);
  for (std::size_t i = 0; i < n_; ++i) out[i] = -v[n_ + i];
  return out;
}

Vector LLCProblem::jvp_xy_f(const Vector& x, const Vector& y, const Vector& v) const {
  check_x_dim(*this, x, "jvp_xy_f");
  check_y_dim(*this, y, "jvp_xy_f");
  check_y_dim(*this, v, "jvp_xy_f");
  Vector out(n_);
  for (std::size_t i = 0; i < n_; ++i) out[i] = -v[i];
  return out;
}

OracleValues llc_oracle(std::size_t n, const Vector& x, double mu) {
  if (x.size() != n) throw std::invalid_argument("llc_oracle: x has wrong dimension");
  if (!(mu > 0.0 && mu <= 1.0))
    throw std::invalid_argument("llc_oracle: mu must lie in (0, 1], got " +
                                std::to_string(mu));
  OracleValues o;
  Vector y1(n), y2 = x, v1(n);
  double dist2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    y1[i] = mu + (1.0 - mu) * x[i];
    v1[i] = (1.0 - mu) * (x[i] - 1.0);
    const double d = x[i] - 1.0;
    dist2 += d * d;
  }
  o.y_star = stack(y1, y2);
  o.v_star = stack(v1, Vector(n, 0.0));
  const double w = (1.0 - mu) * (1.0 - mu);
  o.phi = 0.5 * w * dist2;
  o.grad_phi = Vector(n);
  for (std::size_t i = 0; i < n; ++i) o.grad_phi[i] = w * (x[i] - 1.0);
  return o;
}

namespace {

// Rayleigh-quotient estimates of the extreme eigenvalues, used only when the
// caller cannot supply exact values.
double estimate_lambda_min(const Matrix& a, const CholeskyFactor& chol) {
  std::mt19937_64 rng(0x9e3779b97f4a7c15ULL);
  Vector v(a.rows());
  for (auto& e : v) e = 2.0 * ((rng() >> 11) * 0x1p-53) - 1.0;
  double prev = 0.0;
  for (int it = 0; it < 200; ++it) {
    Vector w = chol.solve(v);
    const double nw = norm(w);
    if (nw == 0.0) break;
    for (auto& e : w) e /= nw;
    v = std::move(w);
    const double rq = dot(v, a.apply(v));
    if (it > 2 && std::abs(rq - prev) <= 1e-13 * rq) return rq;
    prev = rq;
  }
  return prev;
}

double estimate_lambda_max(const Matrix& a) {
  std::mt19937_64 rng(0xbf58476d1ce4e5b9ULL);
  Vector v(a.rows());
  for (auto& e : v) e = 2.0 * ((rng() >> 11) * 0x1p-53) - 1.0;
  double prev = 0.0;
  for (int it = 0; it < 200; ++it) {
    Vector w = a.apply(v);
    const double nw = norm(w);
    if (nw == 0.0) break;
    for (auto& e : w) e /= nw;
    v = std::move(w);
    const double rq = dot(v, a.apply(v));
    if (it > 2 && std::abs(rq - prev) <= 1e-13 * std::abs(rq)) return rq;
    prev = rq;
  }
  return prev;
}

}  // namespace

LLSCProblem::LLSCProblem(Matrix a, Vector z0, std::optional<double> lambda_min,
                         std::optional<double> lambda_max)
    : a_(std::move(a)), z0_(std::move(z0)), chol_(a_) {
  if (a_.rows() != a_.cols())
    throw std::invalid_argument("LLSCProblem: A must be square");
  if (z0_.size() != a_.rows())
    throw std::invalid_argument("LLSCProblem: z0 dimension mismatch");
  const double lmin = lambda_min ? *lambda_min : estimate_lambda_min(a_, chol_);
  const double lmax = lambda_max ? *lambda_max : estimate_lambda_max(a_);
  meta_.sigma_F = lmin;
  meta_.sigma_f = lmin;
  meta_.F_lower_bound = 0.0;
  meta_.lipschitz = {{"L_F_y2", lmax}, {"L_f_y2", lmax}};
}

LLSCProblem LLSCProblem::identity(std::size_t n) {
  return LLSCProblem(Matrix::identity(n), Vector(n, 1.0), 1.0, 1.0);
}

double LLSCProblem::eval_F(const Vector& x, const Vector& y) const {
  check_x_dim(*this, x, "eval_F");
  check_y_dim(*this, y, "eval_F");
  return 0.5 * norm_diff(x, z0_) * norm_diff(x, z0_) + 0.5 * dot(y, a_.apply(y));
}

double LLSCProblem::eval_f(const Vector& x, const Vector& y) const {
  check_x_dim(*this, x, "eval_f");
  check_y_dim(*this, y, "eval_f");
  return 0.5 * dot(y, a_.apply(y)) - dot(x, y);
}

Vector LLSCProblem::grad_x_F(const Vector& x, const Vector& y) const {
  check_x_dim(*this, x, "grad_x_F");
  check_y_dim(*this, y, "grad_x_F");
  return combine(1.0, x, -1.0, z0_);
}

Vector LLSCProblem::grad_y_F(const Vector& x, const Vector& y) const {
  check_x_dim(*this, x, "grad_y_F");
  check_y_dim(*this, y, "grad_y_F");
  return a_.apply(y);
}

Vector LLSCProblem::grad_y_f(const Vector& x, const Vector& y) const {
  check_x_dim(*this, x, "grad_y_f");
  check_y_dim(*this, y, "grad_y_f");
  Vector g = a_.apply(y);
  axpy(-1.0, x, g);
  return g;
}

Vector LLSCProblem::hvp_yy_F(const Vector& x, const Vector& y, const Vector& v) const {
  check_x_dim(*this, x, "hvp_yy_F");
  check_y_dim(*this, y, "hvp_yy_F");
  check_y_dim(*this, v, "hvp_yy_F");
  return a_.apply(v);
}

Vector LLSCProblem::hvp_yy_f(const Vector& x, const Vector& y, const Vector& v) const {
  check_x_dim(*this, x, "hvp_yy_f");
  check_y_dim(*this, y, "hvp_yy_f");
  check_y_dim(*this, v, "hvp_yy_f");
  return a_.apply(v);
}

Vector LLSCProblem::jvp_xy_F(const Vector& x, const Vector& y, const Vector& v) const {
  check_x_dim(*this, x, "jvp_xy_F");
  check_y_dim(*this, y, "jvp_xy_F");
  check_y_dim(*this, v, "jvp_xy_F");
  return Vector(dim_x(), 0.0);
}

Vector LLSCProblem::jvp_xy_f(const Vector& x, const Vector& y, const Vector& v) const {
  check_x_dim(*this, x, "jvp_xy_f");
  check_y_dim(*this, y, "jvp_xy_f");
  check_y_dim(*this, v, "jvp_xy_f");
  return scaled(-1.0, v);
}

StepOracles LLSCProblem::step_oracles(const Vector& x, const Vector& y,
                                      const Vector& v,
                                      bool with_F_actions) const {
  check_x_dim(*this, x, "step_oracles");
  check_y_dim(*this, y, "step_oracles");
  check_y_dim(*this, v, "step_oracles");
  StepOracles o;
  Vector av;
  a_.apply2(y, v, o.grad_y_F, av);
  o.grad_y_f = o.grad_y_F;
  axpy(-1.0, x, o.grad_y_f);
  o.grad_x_F = combine(1.0, x, -1.0, z0_);
  o.jvp_xy_f = scaled(-1.0, v);
  if (with_F_actions) {
    o.hvp_yy_F = av;
    o.jvp_xy_F = Vector(dim_x(), 0.0);
  }
  o.hvp_yy_f = std::move(av);
  return o;
}

Vector LLSCProblem::x_star() const {
  // (A + I) x* = A z0
  const std::size_t n = dim_x();
  Matrix api = a_;
  for (std::size_t i = 0; i < n; ++i) api(i, i) += 1.0;
  return direct_solve(api, a_.apply(z0_));
}

OracleValues LLSCProblem::oracle(const Vector& x, double mu) const {
  check_x_dim(*this, x, "LLSCProblem::oracle");
  if (!(mu >= 0.0 && mu <= 1.0))
    throw std::invalid_argument("LLSCProblem::oracle: mu must lie in [0, 1]");
  OracleValues o;
  const Vector ainv_x = chol_.solve(x);
  const double w = 1.0 - mu;
  o.y_star = scaled(w, ainv_x);
  o.v_star = o.y_star;
  const double d = norm_diff(x, z0_);
  o.phi = 0.5 * d * d + 0.5 * w * w * dot(x, ainv_x);
  o.grad_phi = combine(1.0, x, -1.0, z0_);
  axpy(w * w, ainv_x, o.grad_phi);
  return o;
}

OracleValues llsc_oracle(const Matrix& a, const Vector& z0, const Vector& x) {
  return LLSCProblem(a, z0).oracle(x, 0.0);
}

std::string_view problem_kind_name(ProblemKind k) {
  switch (k) {
    case ProblemKind::llc:
      return "llc";
    case ProblemKind::llsc:
      return "llsc";
    case ProblemKind::random_llsc:
      return "random-llsc";
  }
  return "unknown";
}

std::optional<ProblemKind> parse_problem_kind(std::string_view name) {
  for (ProblemKind k :
       {ProblemKind::llc, ProblemKind::llsc, ProblemKind::random_llsc})
    if (name == problem_kind_name(k)) return k;
  return std::nullopt;
}

namespace {

struct GaussianSampler {
  explicit GaussianSampler(std::uint64_t seed) : rng(seed) {}

  std::mt19937_64 rng;
  bool has_spare = false;
  double spare = 0.0;

  double uniform01() { return (rng() >> 11) * 0x1p-53; }

  double next() {
    if (has_spare) {
      has_spare = false;
      return spare;
    }
    // Box-Muller on explicitly constructed uniforms keeps the stream
    // identical across standard libraries.
    const double u1 = ((rng() >> 11) + 1.0) * 0x1p-53;
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare = r * std::sin(6.283185307179586476925286766559 * u2);
    has_spare = true;
    return r * std::cos(6.283185307179586476925286766559 * u2);
  }
};

// Explicit-Q Householder QR of a Gaussian matrix, columns sign-fixed so the
// factorization is unique.
Matrix random_orthogonal(std::size_t n, GaussianSampler& g) {
  Matrix r(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) r(i, j) = g.next();
  Matrix q = Matrix::identity(n);

  Vector v(n);
  for (std::size_t k = 0; k < n; ++k) {
    double xnorm2 = 0.0;
    for (std::size_t i = k; i < n; ++i) xnorm2 += r(i, k) * r(i, k);
    const double xnorm = std::sqrt(xnorm2);
    if (xnorm == 0.0) continue;
    const double alpha = r(k, k) >= 0.0 ? -xnorm : xnorm;
    double vnorm2 = 0.0;
    for (std::size_t i = k; i < n; ++i) {
      v[i] = r(i, k) - (i == k ? alpha : 0.0);
      vnorm2 += v[i] * v[i];
    }
    if (vnorm2 == 0.0) continue;
    // R <- H R on the trailing block
    for (std::size_t j = k; j < n; ++j) {
      double s = 0.0;
      for (std::size_t i = k; i < n; ++i) s += v[i] * r(i, j);
      const double c = 2.0 * s / vnorm2;
      for (std::size_t i = k; i < n; ++i) r(i, j) -= c * v[i];
    }
    // Q <- Q H
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t j = k; j < n; ++j) s += q(i, j) * v[j];
      const double c = 2.0 * s / vnorm2;
      for (std::size_t j = k; j < n; ++j) q(i, j) -= c * v[j];
    }
  }
  for (std::size_t j = 0; j < n; ++j)
    if (r(j, j) < 0.0)
      for (std::size_t i = 0; i < n; ++i) q(i, j) = -q(i, j);
  return q;
}

}  // namespace

ProblemInstance make_problem(ProblemKind kind, std::size_t n, std::uint64_t seed,
                             double condition_number) {
  if (n == 0) throw std::invalid_argument("make_problem: n must be positive");
  ProblemInstance inst;
  inst.kind = kind;

  if (kind == ProblemKind::llc) {
    auto p = std::make_shared<const LLCProblem>(n);
    inst.problem = p;
    inst.x_star = p->x_star();
    inst.f_star = 0.0;
    inst.oracle = [n](const Vector& x, double mu) -> std::optional<OracleValues> {
      if (mu <= 0.0) return std::nullopt;
      return llc_oracle(n, x, mu);
    };
    return inst;
  }

  std::shared_ptr<const LLSCProblem> p;
  if (kind == ProblemKind::llsc) {
    p = std::make_shared<const LLSCProblem>(LLSCProblem::identity(n));
  } else {
    if (!(condition_number >= 1.0))
      throw std::invalid_argument("make_problem: condition_number must be >= 1");
    GaussianSampler g(seed);
    Vector lambda(n);
    const double logk = std::log(condition_number);
    for (std::size_t i = 0; i < n; ++i) lambda[i] = std::exp(g.uniform01() * logk);
    lambda[0] = 1.0;
    if (n > 1) lambda[n - 1] = condition_number;
    double lmin = lambda[0], lmax = lambda[0];
    for (double l : lambda) {
      lmin = std::min(lmin, l);
      lmax = std::max(lmax, l);
    }
    const Matrix q = random_orthogonal(n, g);
    Matrix b = q;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) b(i, j) *= lambda[j];
    Matrix a = matmul(b, q.transposed());
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < i; ++j) {
        const double s = 0.5 * (a(i, j) + a(j, i));
        a(i, j) = s;
        a(j, i) = s;
      }
    p = std::make_shared<const LLSCProblem>(std::move(a), Vector(n, 1.0), lmin, lmax);
  }
  inst.problem = p;
  inst.x_star = p->x_star();
  inst.f_star = p->oracle(inst.x_star, 0.0).phi;
  inst.oracle = [p](const Vector& x, double mu) -> std::optional<OracleValues> {
    return p->oracle(x, mu);
  };
  return inst;
}

}  // namespace bilevel
