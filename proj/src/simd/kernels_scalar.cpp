#include "kernels_internal.hpp"

namespace ultraclean::simd::detail {

namespace {

float dot(const float* a, const float* b, std::size_t n) {
  float sum = 0.0f;
  for (std::size_t i = 0; i < n; ++i) sum += a[i] * b[i];
  return sum;
}

void axpy(float alpha, const float* x, float* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void sqdiff_accumulate(const double* a, const double* b, double* acc, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    acc[i] += d * d;
  }
}

void mul_accumulate(const double* w, const double* x, double* acc, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) acc[i] += w[i] * x[i];
}

void add(const double* x, double* acc, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) acc[i] += x[i];
}

void median3x3_row(const float* r0, const float* r1, const float* r2, float* out,
                   std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = median9(r0[i], r0[i + 1], r0[i + 2], r1[i], r1[i + 1], r1[i + 2], r2[i],
                     r2[i + 1], r2[i + 2]);
  }
}

}  // namespace

const Kernels& scalar_kernels() noexcept {
  static const Kernels k{dot, axpy, sqdiff_accumulate, mul_accumulate, add, median3x3_row};
  return k;
}

}  // namespace ultraclean::simd::detail
