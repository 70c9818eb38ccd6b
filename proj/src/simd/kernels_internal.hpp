#pragma once

#include "ultraclean/simd.hpp"

namespace ultraclean::simd::detail {

const Kernels& scalar_kernels() noexcept;
#if defined(__x86_64__) || defined(_M_X64)
const Kernels& avx2_kernels() noexcept;
#endif

// Median of nine via a fixed exchange network; shared by the scalar kernel and
// the AVX2 tail so both paths select identically.
inline void sort2(float& a, float& b) noexcept {
  const float lo = a < b ? a : b;
  const float hi = a < b ? b : a;
  a = lo;
  b = hi;
}

inline float median9(float p0, float p1, float p2, float p3, float p4, float p5, float p6,
                     float p7, float p8) noexcept {
  sort2(p1, p2); sort2(p4, p5); sort2(p7, p8);
  sort2(p0, p1); sort2(p3, p4); sort2(p6, p7);
  sort2(p1, p2); sort2(p4, p5); sort2(p7, p8);
  sort2(p0, p3); sort2(p5, p8); sort2(p4, p7);
  sort2(p3, p6); sort2(p1, p4); sort2(p2, p5);
  sort2(p4, p7); sort2(p4, p2); sort2(p6, p4);
  sort2(p4, p2);
  return p4;
}

}  // namespace ultraclean::simd::detail
