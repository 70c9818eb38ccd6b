#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "ultraclean/denoise.hpp"

namespace ultraclean {

namespace {

// Twiddles e^{-2 pi i k / n} indexed by (k mod n) so equal phases are bitwise equal.
std::vector<std::complex<double>> twiddles(std::size_t n) {
  std::vector<std::complex<double>> t(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double angle = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
    t[k] = {std::cos(angle), std::sin(angle)};
  }
  return t;
}

}  // namespace

std::vector<double> dft_magnitude(const Image& img) {
  const std::size_t height = img.height();
  const std::size_t width = img.width();
  const std::size_t channels = img.channels();
  if (img.empty()) return {};

  std::vector<std::complex<double>> grid(height * width);
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      double sum = 0.0;
      for (std::size_t c = 0; c < channels; ++c) sum += img.at(y, x, c);
      grid[y * width + x] = sum / static_cast<double>(channels);
    }
  }

  // Separable DFT: rows, then columns.
  const auto tw = twiddles(width);
  const auto th = twiddles(height);
  std::vector<std::complex<double>> rows(height * width);
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t v = 0; v < width; ++v) {
      std::complex<double> acc = 0.0;
      for (std::size_t x = 0; x < width; ++x) acc += grid[y * width + x] * tw[(v * x) % width];
      rows[y * width + v] = acc;
    }
  }
  std::vector<double> magnitude(height * width);
  for (std::size_t u = 0; u < height; ++u) {
    for (std::size_t v = 0; v < width; ++v) {
      std::complex<double> acc = 0.0;
      for (std::size_t y = 0; y < height; ++y) acc += rows[y * width + v] * th[(u * y) % height];
      // Shift so frequency (0, 0) lands at (H/2, W/2).
      const std::size_t cy = (u + height / 2) % height;
      const std::size_t cx = (v + width / 2) % width;
      magnitude[cy * width + cx] = std::abs(acc);
    }
  }
  return magnitude;
}

Image dft_log_magnitude(const Image& img) {
  std::vector<double> mag = dft_magnitude(img);
  Image out(img.height(), img.width(), 1);
  if (mag.empty()) return out;
  for (double& m : mag) m = std::log1p(m);
  const auto [lo, hi] = std::minmax_element(mag.begin(), mag.end());
  const double span = *hi - *lo;
  if (span <= 0.0) return out;
  for (std::size_t i = 0; i < mag.size(); ++i) {
    out.data()[i] = static_cast<float>((mag[i] - *lo) / span);
  }
  return out;
}

}  // namespace ultraclean
