// Compiled with -mavx2 -ffp-contract=off; only reached after a CPUID check.
#include <immintrin.h>

#include "kernels_internal.hpp"

namespace ultraclean::simd::detail {

namespace {

float dot(const float* a, const float* b, std::size_t n) {
  __m256 acc0 = _mm256_setzero_ps();
  __m256 acc1 = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    acc0 = _mm256_add_ps(acc0, _mm256_mul_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
    acc1 = _mm256_add_ps(acc1,
                         _mm256_mul_ps(_mm256_loadu_ps(a + i + 8), _mm256_loadu_ps(b + i + 8)));
  }
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_add_ps(acc0, _mm256_mul_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
  }
  const __m256 acc = _mm256_add_ps(acc0, acc1);
  __m128 lo = _mm_add_ps(_mm256_castps256_ps128(acc), _mm256_extractf128_ps(acc, 1));
  lo = _mm_add_ps(lo, _mm_movehl_ps(lo, lo));
  lo = _mm_add_ss(lo, _mm_shuffle_ps(lo, lo, 0x1));
  float sum = _mm_cvtss_f32(lo);
  for (; i < n; ++i) sum += a[i] * b[i];
  return sum;
}

void axpy(float alpha, const float* x, float* y, std::size_t n) {
  const __m256 va = _mm256_set1_ps(alpha);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 prod = _mm256_mul_ps(va, _mm256_loadu_ps(x + i));
    _mm256_storeu_ps(y + i, _mm256_add_ps(_mm256_loadu_ps(y + i), prod));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void sqdiff_accumulate(const double* a, const double* b, double* acc, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    _mm256_storeu_pd(acc + i, _mm256_add_pd(_mm256_loadu_pd(acc + i), _mm256_mul_pd(d, d)));
  }
  for (; i < n; ++i) {
    const double d = a[i] - b[i];
    acc[i] += d * d;
  }
}

void mul_accumulate(const double* w, const double* x, double* acc, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d prod = _mm256_mul_pd(_mm256_loadu_pd(w + i), _mm256_loadu_pd(x + i));
    _mm256_storeu_pd(acc + i, _mm256_add_pd(_mm256_loadu_pd(acc + i), prod));
  }
  for (; i < n; ++i) acc[i] += w[i] * x[i];
}

void add(const double* x, double* acc, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(acc + i, _mm256_add_pd(_mm256_loadu_pd(acc + i), _mm256_loadu_pd(x + i)));
  }
  for (; i < n; ++i) acc[i] += x[i];
}

inline void vsort2(__m256& a, __m256& b) {
  const __m256 lo = _mm256_min_ps(a, b);
  b = _mm256_max_ps(a, b);
  a = lo;
}

void median3x3_row(const float* r0, const float* r1, const float* r2, float* out,
                   std::size_t n) {
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256 p0 = _mm256_loadu_ps(r0 + i), p1 = _mm256_loadu_ps(r0 + i + 1),
           p2 = _mm256_loadu_ps(r0 + i + 2);
    __m256 p3 = _mm256_loadu_ps(r1 + i), p4 = _mm256_loadu_ps(r1 + i + 1),
           p5 = _mm256_loadu_ps(r1 + i + 2);
    __m256 p6 = _mm256_loadu_ps(r2 + i), p7 = _mm256_loadu_ps(r2 + i + 1),
           p8 = _mm256_loadu_ps(r2 + i + 2);
    vsort2(p1, p2); vsort2(p4, p5); vsort2(p7, p8);
    vsort2(p0, p1); vsort2(p3, p4); vsort2(p6, p7);
    vsort2(p1, p2); vsort2(p4, p5); vsort2(p7, p8);
    vsort2(p0, p3); vsort2(p5, p8); vsort2(p4, p7);
    vsort2(p3, p6); vsort2(p1, p4); vsort2(p2, p5);
    vsort2(p4, p7); vsort2(p4, p2); vsort2(p6, p4);
    vsort2(p4, p2);
    _mm256_storeu_ps(out + i, p4);
  }
  for (; i < n; ++i) {
    out[i] = median9(r0[i], r0[i + 1], r0[i + 2], r1[i], r1[i + 1], r1[i + 2], r2[i],
                     r2[i + 1], r2[i + 2]);
  }
}

}  // namespace

const Kernels& avx2_kernels() noexcept {
  static const Kernels k{dot, axpy, sqdiff_accumulate, mul_accumulate, add, median3x3_row};
  return k;
}

}  // namespace ultraclean::simd::detail
