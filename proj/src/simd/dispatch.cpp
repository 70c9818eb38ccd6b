#include <atomic>
#include <string>

#include "kernels_internal.hpp"
#include "ultraclean/error.hpp"

namespace ultraclean::simd {

namespace {

bool cpu_has_avx2() noexcept {
#if (defined(__x86_64__) || defined(_M_X64)) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

std::atomic<Level>& active() {
  static std::atomic<Level> level{detected_level()};
  return level;
}

}  // namespace

Level detected_level() noexcept {
  static const Level level = cpu_has_avx2() ? Level::Avx2 : Level::Scalar;
  return level;
}

Level active_level() noexcept { return active().load(std::memory_order_relaxed); }

void set_level(Level level) {
  if (level == Level::Avx2 && detected_level() != Level::Avx2) {
    throw UsageError("AVX2 kernels requested but the CPU does not support AVX2");
  }
  active().store(level, std::memory_order_relaxed);
}

const Kernels& kernels_for(Level level) {
  switch (level) {
    case Level::Scalar: return detail::scalar_kernels();
    case Level::Avx2:
#if defined(__x86_64__) || defined(_M_X64)
      if (detected_level() == Level::Avx2) return detail::avx2_kernels();
#endif
      throw UsageError("AVX2 kernels are not available on this CPU");
  }
  return detail::scalar_kernels();
}

const Kernels& kernels() noexcept {
#if defined(__x86_64__) || defined(_M_X64)
  if (active_level() == Level::Avx2) return detail::avx2_kernels();
#endif
  return detail::scalar_kernels();
}

std::string_view to_string(Level level) noexcept {
  return level == Level::Avx2 ? "avx2" : "scalar";
}

Level parse_level(std::string_view name) {
  if (name == "scalar") return Level::Scalar;
  if (name == "avx2") return Level::Avx2;
  if (name == "auto") return detected_level();
  throw UsageError("unknown SIMD level '" + std::string(name) + "' (scalar|avx2|auto)");
}

}  // namespace ultraclean::simd
