#include <algorithm>
#include <vector>

#include "ultraclean/denoise.hpp"
#include "ultraclean/error.hpp"
#include "ultraclean/simd.hpp"

namespace ultraclean {

void MedianParams::validate() const {
  if (kernel_radius < 1) throw UsageError("median kernel radius must be >= 1");
}

namespace {

// Replicate-padded single channel, float.
std::vector<float> pad_channel(const Image& img, std::size_t c, std::size_t pad) {
  const std::size_t rows = img.height() + 2 * pad;
  const std::size_t cols = img.width() + 2 * pad;
  const auto h = static_cast<std::ptrdiff_t>(img.height());
  const auto w = static_cast<std::ptrdiff_t>(img.width());
  const auto p = static_cast<std::ptrdiff_t>(pad);
  std::vector<float> out(rows * cols);
  for (std::size_t py = 0; py < rows; ++py) {
    const auto y = std::clamp<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(py) - p, 0, h - 1);
    for (std::size_t px = 0; px < cols; ++px) {
      const auto x = std::clamp<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(px) - p, 0, w - 1);
      out[py * cols + px] = img.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x), c);
    }
  }
  return out;
}

}  // namespace

Image median_denoise(const Image& img, const MedianParams& params) {
  params.validate();
  if (img.empty()) return img;

  const std::size_t radius = static_cast<std::size_t>(params.kernel_radius);
  const std::size_t side = 2 * radius + 1;
  const std::size_t height = img.height();
  const std::size_t width = img.width();
  const std::size_t cols = width + 2 * radius;

  Image out(height, width, img.channels());
  std::vector<float> row(width);
  std::vector<float> window(side * side);
  for (std::size_t c = 0; c < img.channels(); ++c) {
    const std::vector<float> padded = pad_channel(img, c, radius);
    for (std::size_t y = 0; y < height; ++y) {
      if (radius == 1) {
        simd::kernels().median3x3_row(padded.data() + y * cols, padded.data() + (y + 1) * cols,
                                      padded.data() + (y + 2) * cols, row.data(), width);
      } else {
        for (std::size_t x = 0; x < width; ++x) {
          for (std::size_t wy = 0; wy < side; ++wy) {
            std::copy_n(padded.data() + (y + wy) * cols + x, side, window.data() + wy * side);
          }
          const auto mid = window.begin() + static_cast<std::ptrdiff_t>(window.size() / 2);
          std::nth_element(window.begin(), mid, window.end());
          row[x] = *mid;
        }
      }
      for (std::size_t x = 0; x < width; ++x) out.at(y, x, c) = row[x];
    }
  }
  return out;
}

}  // namespace ultraclean
