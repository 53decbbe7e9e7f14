#include "bilevel/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <span>
#include <string>

namespace bilevel {

namespace {

void check_dim(std::size_t got, std::size_t want, const char* what) {
  if (got != want)
    throw std::invalid_argument(std::string(what) + ": dimension mismatch (" +
                                std::to_string(got) + " vs " +
                                std::to_string(want) + ")");
}

}  // namespace

double dot(const Vector& x, const Vector& y) { return kernels::dot(x, y); }

double norm(const Vector& x) { return kernels::nrm2(x); }

double norm_diff(const Vector& x, const Vector& y) {
  check_dim(x.size(), y.size(), "norm_diff");
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - y[i];
    s += d * d;
  }
  return std::sqrt(s);
}

void axpy(double a, const Vector& x, Vector& y) { kernels::axpy(a, x, y); }

Vector combine(double a, const Vector& x, double b, const Vector& y) {
  Vector out(x.size());
  kernels::combine(a, x, b, y, out);
  return out;
}

Vector scaled(double a, const Vector& x) {
  Vector out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = a * x[i];
  return out;
}

Vector constant_vector(std::size_t n, double value) { return Vector(n, value); }

bool all_finite(const Vector& x) {
  for (double v : x)
    if (!std::isfinite(v)) return false;
  return true;
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Vector Matrix::apply(const Vector& x) const {
  check_dim(x.size(), cols_, "Matrix::apply");
  Vector out(rows_);
  kernels::matvec(data_, rows_, cols_, x, out);
  return out;
}

void Matrix::apply2(const Vector& x1, const Vector& x2, Vector& out1,
                    Vector& out2) const {
  check_dim(x1.size(), cols_, "Matrix::apply2");
  check_dim(x2.size(), cols_, "Matrix::apply2");
  out1.resize(rows_);
  out2.resize(rows_);
  kernels::matvec2(data_, rows_, cols_, x1, x2, out1, out2);
}

Matrix Matrix::transposed() const {
  Matrix t(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  return t;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  check_dim(b.rows(), a.cols(), "matmul");
  // B is transposed once so each output entry is a contiguous dot product.
  const Matrix bt = b.transposed();
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const std::span<const double> row(a.data().data() + i * a.cols(), a.cols());
    for (std::size_t j = 0; j < b.cols(); ++j) {
      const std::span<const double> col(bt.data().data() + j * bt.cols(), bt.cols());
      c(i, j) = kernels::dot(row, col);
    }
  }
  return c;
}

LinearOperator matrix_operator(const Matrix& a) {
  if (a.rows() != a.cols())
    throw std::invalid_argument("matrix_operator: matrix must be square");
  return LinearOperator{a.rows(), [a](const Vector& x) { return a.apply(x); }};
}

CgResult cg_solve(const LinearOperator& op, const Vector& b, double tol,
                  std::size_t max_iter) {
  check_dim(b.size(), op.dim, "cg_solve");
  if (!(tol > 0.0)) throw std::invalid_argument("cg_solve: tol must be positive");

  CgResult res;
  res.x = Vector(b.size(), 0.0);
  Vector r = b;
  Vector p = b;
  double rr = dot(r, r);
  const double stop = tol * std::max(1.0, std::sqrt(dot(b, b)));
  res.residual_norm = std::sqrt(rr);
  if (res.residual_norm <= stop) {
    res.converged = true;
    return res;
  }

  double rayleigh_max = 0.0;
  for (std::size_t it = 0; it < max_iter; ++it) {
    const Vector ap = op.apply(p);
    const double pap = dot(p, ap);
    if (!std::isfinite(pap)) throw NumericalError("cg_solve: non-finite curvature");
    // Zero, negative, or numerically vanishing curvature: the system is
    // singular or indefinite along p. Return the current iterate;
    // residual_norm reports the gap. The relative guard keeps a singular
    // direction from producing an unbounded step once rounding makes pap a
    // tiny positive number instead of an exact zero.
    const double pp = dot(p, p);
    if (pap <= 0.0 || pap <= 1e-12 * rayleigh_max * pp) return res;
    rayleigh_max = std::max(rayleigh_max, pap / pp);
    const double alpha = rr / pap;
    axpy(alpha, p, res.x);
    axpy(-alpha, ap, r);
    const double rr_next = dot(r, r);
    if (!std::isfinite(rr_next) || !all_finite(res.x))
      throw NumericalError("cg_solve: non-finite iterate");
    res.iterations = it + 1;
    res.residual_norm = std::sqrt(rr_next);
    if (res.residual_norm <= stop) {
      res.converged = true;
      return res;
    }
    const double beta = rr_next / rr;
    rr = rr_next;
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = r[i] + beta * p[i];
  }
  return res;
}

CholeskyFactor::CholeskyFactor(const Matrix& a) {
  if (a.rows() != a.cols())
    throw std::invalid_argument("CholeskyFactor: matrix must be square");
  const std::size_t n = a.rows();
  l_ = Matrix(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double d = a(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= l_(j, k) * l_(j, k);
    if (!(d > 0.0) || !std::isfinite(d))
      throw NumericalError("cholesky: pivot " + std::to_string(j) +
                           " not positive; matrix is not SPD");
    const double ljj = std::sqrt(d);
    l_(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l_(i, k) * l_(j, k);
      l_(i, j) = s / ljj;
    }
  }
}

Vector CholeskyFactor::solve(const Vector& b) const {
  const std::size_t n = dim();
  check_dim(b.size(), n, "CholeskyFactor::solve");
  Vector z(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= l_(i, k) * z[k];
    z[i] = s / l_(i, i);
  }
  Vector x(n);
  for (std::size_t ii = n; ii-- > 0;) {
    double s = z[ii];
    for (std::size_t k = ii + 1; k < n; ++k) s -= l_(k, ii) * x[k];
    x[ii] = s / l_(ii, ii);
  }
  return x;
}

Vector direct_solve(const Matrix& a, const Vector& b) {
  return CholeskyFactor(a).solve(b);
}

Vector fd_gradient(const std::function<double(const Vector&)>& phi,
                   const Vector& x, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("fd_gradient: h must be positive");
  Vector g(x.size());
  Vector probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    const double fp = phi(probe);
    probe[i] = x[i] - h;
    const double fm = phi(probe);
    probe[i] = x[i];
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw NumericalError("fd_gradient: non-finite value at component " +
                           std::to_string(i));
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

Vector fd_hvp(const std::function<Vector(const Vector&)>& g, const Vector& y,
              const Vector& v, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("fd_hvp: h must be positive");
  check_dim(v.size(), y.size(), "fd_hvp");
  const Vector gp = g(combine(1.0, y, h, v));
  const Vector gm = g(combine(1.0, y, -h, v));
  check_dim(gm.size(), gp.size(), "fd_hvp: map output");
  Vector out(gp.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!std::isfinite(gp[i]) || !std::isfinite(gm[i]))
      throw NumericalError("fd_hvp: non-finite value at component " +
                           std::to_string(i));
    out[i] = (gp[i] - gm[i]) / (2.0 * h);
  }
  return out;
}

}  // namespace bilevel
