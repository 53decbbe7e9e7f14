// NEON kernel variants for aarch64. Same rounding contract as AVX2: axpy and
// combine stay unfused, dot and matvec may reassociate.
#include "kernels_detail.hpp"

#if defined(__aarch64__)

#include <arm_neon.h>

namespace bilevel::kernels::detail {

namespace {

void axpy_neon(double a, const double* x, double* y, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(a);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t vx = vld1q_f64(x + i);
    const float64x2_t vy = vld1q_f64(y + i);
    vst1q_f64(y + i, vaddq_f64(vy, vmulq_f64(va, vx)));
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

void combine_neon(double a, const double* x, double b, const double* y,
                  double* out, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(a);
  const float64x2_t vb = vdupq_n_f64(b);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t vx = vmulq_f64(va, vld1q_f64(x + i));
    const float64x2_t vy = vmulq_f64(vb, vld1q_f64(y + i));
    vst1q_f64(out + i, vaddq_f64(vx, vy));
  }
  for (; i < n; ++i) out[i] = a * x[i] + b * y[i];
}

double dot_neon(const double* x, const double* y, std::size_t n) {
  float64x2_t acc0 = vdupq_n_f64(0.0);
  float64x2_t acc1 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc0 = vfmaq_f64(acc0, vld1q_f64(x + i), vld1q_f64(y + i));
    acc1 = vfmaq_f64(acc1, vld1q_f64(x + i + 2), vld1q_f64(y + i + 2));
  }
  for (; i + 2 <= n; i += 2)
    acc0 = vfmaq_f64(acc0, vld1q_f64(x + i), vld1q_f64(y + i));
  double s = vaddvq_f64(vaddq_f64(acc0, acc1));
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

void matvec_neon(const double* a, std::size_t rows, std::size_t cols,
                 const double* x, double* out) {
  for (std::size_t i = 0; i < rows; ++i) out[i] = dot_neon(a + i * cols, x, cols);
}

}  // namespace

const Ops neon_ops{axpy_neon, combine_neon, dot_neon, matvec_neon};

}  // namespace bilevel::kernels::detail

#endif  // aarch64
