#pragma once

#include <cstddef>
#include <span>
#include <string_view>

// Low-level array kernels behind every vector and matrix operation in the
// library. Each kernel has a scalar reference implementation plus SIMD
// variants (AVX2 on x86-64, NEON on aarch64) selected once at runtime.
//
// Rounding contract: axpy and combine keep multiplies and adds unfused, so
// scalar and SIMD backends produce bit-identical results for them. dot and
// matvec accumulate in a backend-specific order and agree with the scalar
// reference only to rounding; tests compare those with a relative tolerance.
namespace bilevel::kernels {

enum class Backend { scalar, avx2, neon };

std::string_view backend_name(Backend b);

// True if the backend is compiled in and supported by the running CPU.
bool backend_available(Backend b);

// Best supported backend, honoring the BILEVEL_BACKEND environment variable
// ("scalar", "avx2", "neon", "auto") when it names an available choice.
Backend detect_backend();

// Selects the backend used by all kernels. Throws std::invalid_argument if
// unavailable on this machine.
void use_backend(Backend b);

Backend active_backend();

// y[i] += a * x[i]
void axpy(double a, std::span<const double> x, std::span<double> y);

// out[i] = a * x[i] + b * y[i]; out may alias x or y
void combine(double a, std::span<const double> x, double b,
             std::span<const double> y, std::span<double> out);

double dot(std::span<const double> x, std::span<const double> y);

double nrm2(std::span<const double> x);

// out = A x for dense row-major A (rows x cols)
void matvec(std::span<const double> a, std::size_t rows, std::size_t cols,
            std::span<const double> x, std::span<double> out);

// out1 = A x1 and out2 = A x2 in one sweep. Each row is dotted with both
// vectors while it is hot in cache, so A is streamed from memory once
// instead of twice; the dots are the active backend's, making the results
// bitwise identical to two matvec calls.
void matvec2(std::span<const double> a, std::size_t rows, std::size_t cols,
             std::span<const double> x1, std::span<const double> x2,
             std::span<double> out1, std::span<double> out2);

}  // namespace bilevel::kernels
