#pragma once

#include <cstddef>
#include <functional>
#include <stdexcept>
#include <vector>

#include "bilevel/kernels.hpp"

namespace bilevel {

using Vector = std::vector<double>;

// Raised when an algorithm hits non-finite values or a factorization fails.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

double dot(const Vector& x, const Vector& y);
double norm(const Vector& x);
double norm_diff(const Vector& x, const Vector& y);

// y += a x
void axpy(double a, const Vector& x, Vector& y);

// a x + b y
Vector combine(double a, const Vector& x, double b, const Vector& y);

Vector scaled(double a, const Vector& x);
Vector constant_vector(std::size_t n, double value);
bool all_finite(const Vector& x);

// Dense row-major matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  const std::vector<double>& data() const { return data_; }

  // A x, dim-checked
  Vector apply(const Vector& x) const;

  // A x1 and A x2 in one sweep over the matrix; bitwise equal to two apply
  // calls but touches each row only once.
  void apply2(const Vector& x1, const Vector& x2, Vector& out1, Vector& out2) const;

  Matrix transposed() const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// C = A B
Matrix matmul(const Matrix& a, const Matrix& b);

// Matrix-free symmetric operator.
struct LinearOperator {
  std::size_t dim = 0;
  std::function<Vector(const Vector&)> apply;
};

LinearOperator matrix_operator(const Matrix& a);

struct CgResult {
  Vector x;
  std::size_t iterations = 0;
  double residual_norm = 0.0;
  // ||r|| <= tol * max(1, ||b||) was reached. Stays false when max_iter runs
  // out or the operator shows zero or negative curvature (singular or
  // indefinite systems); the partial iterate is still returned.
  bool converged = false;
};

// Conjugate gradients from x0 = 0. Throws NumericalError on non-finite
// intermediates.
CgResult cg_solve(const LinearOperator& op, const Vector& b, double tol,
                  std::size_t max_iter);

// Cholesky factorization of a symmetric positive definite matrix. Failure
// names the pivot that lost positivity.
class CholeskyFactor {
 public:
  explicit CholeskyFactor(const Matrix& a);

  std::size_t dim() const { return l_.rows(); }
  const Matrix& lower() const { return l_; }
  Vector solve(const Vector& b) const;

 private:
  Matrix l_;
};

// One-shot factor-and-solve for SPD systems.
Vector direct_solve(const Matrix& a, const Vector& b);

// Central-difference gradient of a scalar function. Throws NumericalError
// naming the component whose evaluation came back non-finite.
Vector fd_gradient(const std::function<double(const Vector&)>& phi,
                   const Vector& x, double h);

// Central-difference directional derivative (g(y + h v) - g(y - h v)) / (2h)
// of a vector-valued map; covers Hessian-vector and mixed-block products.
Vector fd_hvp(const std::function<Vector(const Vector&)>& g, const Vector& y,
              const Vector& v, double h);

}  // namespace bilevel
