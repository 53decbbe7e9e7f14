#include "bilevel/linalg.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

#include "doctest.h"

using namespace bilevel;

namespace {

Vector random_vec(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Vector v(n);
  for (auto& x : v) x = 2.0 * ((rng() >> 11) * 0x1p-53) - 1.0;
  return v;
}

// Diagonally dominant symmetric matrix, hence SPD.
Matrix random_spd(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Matrix a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      const double v = 2.0 * ((rng() >> 11) * 0x1p-53) - 1.0;
      a(i, j) = v;
      a(j, i) = v;
    }
  for (std::size_t i = 0; i < n; ++i) a(i, i) += static_cast<double>(n);
  return a;
}

}  // namespace

TEST_CASE("vector helpers") {
  const Vector x{1.0, 2.0, 3.0};
  const Vector y{4.0, 5.0, 6.0};
  CHECK(dot(x, y) == 32.0);
  CHECK(norm(Vector{3.0, 4.0}) == 5.0);
  CHECK(norm_diff(x, y) == doctest::Approx(std::sqrt(27.0)).epsilon(1e-15));
  CHECK(combine(2.0, x, -1.0, y) == Vector{-2.0, -1.0, 0.0});
  CHECK(scaled(3.0, x) == Vector{3.0, 6.0, 9.0});
  CHECK(constant_vector(3, 1.0) == Vector{1.0, 1.0, 1.0});
  CHECK(all_finite(x));
  CHECK_FALSE(all_finite(Vector{1.0, std::nan("")}));
  CHECK_FALSE(all_finite(Vector{1.0, INFINITY}));
}

TEST_CASE("matrix apply and matmul") {
  Matrix a(2, 3);
  a(0, 0) = 1.0; a(0, 1) = 2.0; a(0, 2) = 3.0;
  a(1, 0) = 4.0; a(1, 1) = 5.0; a(1, 2) = 6.0;
  CHECK(a.apply(Vector{1.0, 1.0, 1.0}) == Vector{6.0, 15.0});
  CHECK_THROWS_AS(a.apply(Vector{1.0, 1.0}), std::invalid_argument);

  const Matrix at = a.transposed();
  CHECK(at.rows() == 3);
  CHECK(at(0, 1) == 4.0);

  // A A^T = [[14, 32], [32, 77]]
  const Matrix aat = matmul(a, at);
  CHECK(aat(0, 0) == 14.0);
  CHECK(aat(0, 1) == 32.0);
  CHECK(aat(1, 0) == 32.0);
  CHECK(aat(1, 1) == 77.0);

  CHECK(Matrix::identity(3).apply(Vector{7.0, 8.0, 9.0}) == Vector{7.0, 8.0, 9.0});
}

TEST_CASE("paired apply matches two separate applies bit for bit") {
  for (auto [rows, cols] : {std::pair<std::size_t, std::size_t>{4, 4},
                            {3, 7}, {9, 2}, {1, 1}}) {
    Matrix a(rows, cols);
    const Vector entries = random_vec(rows * cols, 500 + rows * 13 + cols);
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) a(i, j) = entries[i * cols + j];
    const Vector x1 = random_vec(cols, 601 + cols);
    const Vector x2 = random_vec(cols, 617 + cols);

    Vector out1, out2;
    a.apply2(x1, x2, out1, out2);
    CHECK(out1 == a.apply(x1));
    CHECK(out2 == a.apply(x2));
  }

  Matrix a(2, 3, 1.0);
  Vector out1, out2;
  CHECK_THROWS_AS(a.apply2(Vector{1.0, 2.0}, Vector{1.0, 2.0, 3.0}, out1, out2),
                  std::invalid_argument);
}

TEST_CASE("cg solves a small diagonal system") {
  Matrix a(2, 2);
  a(0, 0) = 1.0;
  a(1, 1) = 2.0;
  const auto res = cg_solve(matrix_operator(a), Vector{1.0, 2.0}, 1e-12, 50);
  CHECK(res.converged);
  CHECK(res.iterations <= 2);
  CHECK(res.x[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(res.x[1] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("cg reports non-convergence on a singular system") {
  // b sits in the null space direction; the residual cannot shrink.
  Matrix a(2, 2);
  a(0, 0) = 1.0;
  a(1, 1) = 0.0;
  const auto res = cg_solve(matrix_operator(a), Vector{0.0, 1.0}, 1e-10, 50);
  CHECK_FALSE(res.converged);
  CHECK(res.residual_norm >= 1.0);
  CHECK(all_finite(res.x));
}

TEST_CASE("cg zero right-hand side") {
  const auto res = cg_solve(matrix_operator(Matrix::identity(3)),
                            Vector{0.0, 0.0, 0.0}, 1e-10, 10);
  CHECK(res.converged);
  CHECK(res.iterations == 0);
  CHECK(res.x == Vector{0.0, 0.0, 0.0});
}

TEST_CASE("cholesky factors a fixed SPD matrix") {
  Matrix a(2, 2);
  a(0, 0) = 4.0; a(0, 1) = 2.0;
  a(1, 0) = 2.0; a(1, 1) = 3.0;
  const CholeskyFactor f(a);
  // L = [[2, 0], [1, sqrt(2)]]
  CHECK(f.lower()(0, 0) == 2.0);
  CHECK(f.lower()(1, 0) == 1.0);
  CHECK(f.lower()(1, 1) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));

  const Vector x = f.solve(Vector{8.0, 7.0});
  CHECK(x[0] == doctest::Approx(1.25).epsilon(1e-14));
  CHECK(x[1] == doctest::Approx(1.5).epsilon(1e-14));
  CHECK(direct_solve(a, Vector{8.0, 7.0}) == x);
}

TEST_CASE("cholesky names the failing pivot") {
  Matrix a(2, 2);
  a(0, 0) = 1.0; a(0, 1) = 2.0;
  a(1, 0) = 2.0; a(1, 1) = 1.0;  // indefinite
  try {
    CholeskyFactor f(a);
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("pivot 1") != std::string::npos);
  }
}

TEST_CASE("cg and cholesky agree on random SPD systems") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const std::size_t n = 8 + 3 * seed;
    const Matrix a = random_spd(n, 1000 + seed);
    const Vector b = random_vec(n, 2000 + seed);
    const Vector xd = direct_solve(a, b);
    const auto xc = cg_solve(matrix_operator(a), b, 1e-14, 10 * n);
    CHECK(xc.converged);
    CHECK(norm_diff(xc.x, xd) <= 1e-10 * std::max(1.0, norm(xd)));
  }
}

TEST_CASE("fd_gradient matches an analytic gradient") {
  // phi(x) = x0^2 + 3 x0 x1, grad = (2 x0 + 3 x1, 3 x0); central differences
  // are exact on quadratics up to rounding.
  const auto phi = [](const Vector& x) { return x[0] * x[0] + 3.0 * x[0] * x[1]; };
  const Vector g = fd_gradient(phi, Vector{2.0, 1.0}, 1e-5);
  CHECK(g[0] == doctest::Approx(7.0).epsilon(1e-9));
  CHECK(g[1] == doctest::Approx(6.0).epsilon(1e-9));
}

TEST_CASE("fd_gradient flags non-finite evaluations") {
  const auto phi = [](const Vector& x) {
    return x[1] > 1.0 ? std::nan("") : x[0];
  };
  try {
    fd_gradient(phi, Vector{0.0, 1.0}, 0.5);
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("component 1") != std::string::npos);
  }
}

TEST_CASE("fd_hvp recovers a matrix action") {
  const Matrix a = random_spd(6, 42);
  const auto g = [&](const Vector& y) { return a.apply(y); };
  const Vector y = random_vec(6, 43);
  const Vector v = random_vec(6, 44);
  const Vector hv = fd_hvp(g, y, v, 1e-6);
  const Vector want = a.apply(v);
  CHECK(norm_diff(hv, want) <= 1e-7 * std::max(1.0, norm(want)));
}
