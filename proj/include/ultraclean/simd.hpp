#pragma once

#include <cstddef>
#include <string_view>

// Data-parallel inner loops used by the model and the denoisers. Each kernel
// has a scalar reference implementation and an AVX2 variant; the active set is
// chosen at startup from CPUID and can be pinned for testing.
//
// Kernels marked "exact" produce bitwise-identical results at every level
// (no FMA contraction, same per-element operation order). `dot` reassociates
// its sum and only agrees to rounding.
namespace ultraclean::simd {

enum class Level { Scalar, Avx2 };

struct Kernels {
  // sum_i a[i] * b[i]
  float (*dot)(const float* a, const float* b, std::size_t n);
  // y[i] += alpha * x[i]  (exact)
  void (*axpy)(float alpha, const float* x, float* y, std::size_t n);
  // acc[i] += (a[i] - b[i])^2  (exact)
  void (*sqdiff_accumulate)(const double* a, const double* b, double* acc, std::size_t n);
  // acc[i] += w[i] * x[i]  (exact)
  void (*mul_accumulate)(const double* w, const double* x, double* acc, std::size_t n);
  // acc[i] += x[i]  (exact)
  void (*add)(const double* x, double* acc, std::size_t n);
  // out[i] = median of the 3x3 block whose top-left is (row r0, column i)
  // of three consecutive rows (exact).
  void (*median3x3_row)(const float* r0, const float* r1, const float* r2, float* out,
                        std::size_t n);
};

Level detected_level() noexcept;
Level active_level() noexcept;

// Pins the kernel set. Requesting Avx2 on a CPU without it throws UsageError.
void set_level(Level level);

const Kernels& kernels() noexcept;
const Kernels& kernels_for(Level level);

std::string_view to_string(Level level) noexcept;
Level parse_level(std::string_view name);  // "scalar" | "avx2" | "auto"

}  // namespace ultraclean::simd
