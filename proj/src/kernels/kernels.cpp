#include "bilevel/kernels.hpp"

#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "kernels_detail.hpp"

namespace bilevel::kernels {

namespace detail {

namespace {

void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void combine_scalar(double a, const double* x, double b, const double* y,
                    double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a * x[i] + b * y[i];
}

double dot_scalar(const double* x, const double* y, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
  return s;
}

void matvec_scalar(const double* a, std::size_t rows, std::size_t cols,
                   const double* x, double* out) {
  for (std::size_t i = 0; i < rows; ++i) out[i] = dot_scalar(a + i * cols, x, cols);
}

}  // namespace

const Ops scalar_ops{axpy_scalar, combine_scalar, dot_scalar, matvec_scalar};

}  // namespace detail

namespace {

struct Dispatch {
  detail::Ops ops;
  Backend backend;
};

const detail::Ops* ops_for(Backend b) {
  switch (b) {
    case Backend::scalar:
      return &detail::scalar_ops;
    case Backend::avx2:
#if defined(__x86_64__) || defined(_M_X64)
      if (detail::avx2_supported()) return &detail::avx2_ops;
#endif
      return nullptr;
    case Backend::neon:
#if defined(__aarch64__)
      return &detail::neon_ops;
#else
      return nullptr;
#endif
  }
  return nullptr;
}

Backend detect_unchecked() {
  if (const char* env = std::getenv("BILEVEL_BACKEND")) {
    const std::string_view v(env);
    for (Backend b : {Backend::scalar, Backend::avx2, Backend::neon})
      if (v == backend_name(b) && ops_for(b) != nullptr) return b;
    // "auto" or an unavailable name falls through to detection
  }
#if defined(__x86_64__) || defined(_M_X64)
  if (detail::avx2_supported()) return Backend::avx2;
#endif
#if defined(__aarch64__)
  return Backend::neon;
#endif
  return Backend::scalar;
}

Dispatch& dispatch() {
  static Dispatch d = [] {
    const Backend b = detect_unchecked();
    return Dispatch{*ops_for(b), b};
  }();
  return d;
}

}  // namespace

std::string_view backend_name(Backend b) {
  switch (b) {
    case Backend::scalar:
      return "scalar";
    case Backend::avx2:
      return "avx2";
    case Backend::neon:
      return "neon";
  }
  return "unknown";
}

bool backend_available(Backend b) { return ops_for(b) != nullptr; }

Backend detect_backend() { return detect_unchecked(); }

void use_backend(Backend b) {
  const detail::Ops* ops = ops_for(b);
  if (ops == nullptr)
    throw std::invalid_argument("kernel backend unavailable: " +
                                std::string(backend_name(b)));
  dispatch() = Dispatch{*ops, b};
}

Backend active_backend() { return dispatch().backend; }

namespace {

void check_same_size(std::size_t a, std::size_t b, const char* what) {
  if (a != b) throw std::invalid_argument(std::string(what) + ": size mismatch");
}

}  // namespace

void axpy(double a, std::span<const double> x, std::span<double> y) {
  check_same_size(x.size(), y.size(), "axpy");
  dispatch().ops.axpy(a, x.data(), y.data(), x.size());
}

void combine(double a, std::span<const double> x, double b,
             std::span<const double> y, std::span<double> out) {
  check_same_size(x.size(), y.size(), "combine");
  check_same_size(x.size(), out.size(), "combine");
  dispatch().ops.combine(a, x.data(), b, y.data(), out.data(), x.size());
}

double dot(std::span<const double> x, std::span<const double> y) {
  check_same_size(x.size(), y.size(), "dot");
  return dispatch().ops.dot(x.data(), y.data(), x.size());
}

double nrm2(std::span<const double> x) {
  return std::sqrt(dot(x, x));
}

void matvec(std::span<const double> a, std::size_t rows, std::size_t cols,
            std::span<const double> x, std::span<double> out) {
  if (a.size() != rows * cols)
    throw std::invalid_argument("matvec: matrix storage size mismatch");
  check_same_size(x.size(), cols, "matvec x");
  check_same_size(out.size(), rows, "matvec out");
  dispatch().ops.matvec(a.data(), rows, cols, x.data(), out.data());
}

void matvec2(std::span<const double> a, std::size_t rows, std::size_t cols,
             std::span<const double> x1, std::span<const double> x2,
             std::span<double> out1, std::span<double> out2) {
  if (a.size() != rows * cols)
    throw std::invalid_argument("matvec2: matrix storage size mismatch");
  check_same_size(x1.size(), cols, "matvec2 x1");
  check_same_size(x2.size(), cols, "matvec2 x2");
  check_same_size(out1.size(), rows, "matvec2 out1");
  check_same_size(out2.size(), rows, "matvec2 out2");
  const auto dot_fn = dispatch().ops.dot;
  for (std::size_t i = 0; i < rows; ++i) {
    const double* row = a.data() + i * cols;
    out1[i] = dot_fn(row, x1.data(), cols);
    out2[i] = dot_fn(row, x2.data(), cols);
  }
}

}  // namespace bilevel::kernels
