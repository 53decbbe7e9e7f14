#pragma once

#include <cstddef>

// Shared between the dispatcher and the per-ISA translation units.
namespace bilevel::kernels::detail {

struct Ops {
  void (*axpy)(double a, const double* x, double* y, std::size_t n);
  void (*combine)(double a, const double* x, double b, const double* y,
                  double* out, std::size_t n);
  double (*dot)(const double* x, const double* y, std::size_t n);
  void (*matvec)(const double* a, std::size_t rows, std::size_t cols,
                 const double* x, double* out);
};

extern const Ops scalar_ops;

#if defined(__x86_64__) || defined(_M_X64)
extern const Ops avx2_ops;
bool avx2_supported();
#endif

#if defined(__aarch64__)
extern const Ops neon_ops;
#endif

}  // namespace bilevel::kernels::detail
