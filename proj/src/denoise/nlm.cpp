#include <algorithm>
#include <cmath>
#include <vector>

#include "ultraclean/denoise.hpp"
#include "ultraclean/error.hpp"
#include "ultraclean/simd.hpp"

namespace ultraclean {

void NlmParams::validate() const {
  if (patch_radius < 1) throw UsageError("NLM patch radius must be >= 1");
  if (search_radius < patch_radius) throw UsageError("NLM search radius must be >= patch radius");
  if (!(sigma >= 0.0)) throw UsageError("NLM sigma must be >= 0");
  if (!(h > 0.0)) throw UsageError("NLM h must be > 0");
}

namespace {

// Replicate-padded channel planes in double precision.
struct PaddedPlanes {
  std::size_t pad = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::vector<double>> planes;

  PaddedPlanes(const Image& img, std::size_t pad_) : pad(pad_) {
    const auto h = static_cast<std::ptrdiff_t>(img.height());
    const auto w = static_cast<std::ptrdiff_t>(img.width());
    rows = img.height() + 2 * pad;
    cols = img.width() + 2 * pad;
    planes.assign(img.channels(), std::vector<double>(rows * cols));
    for (std::size_t c = 0; c < img.channels(); ++c) {
      for (std::size_t py = 0; py < rows; ++py) {
        const auto y = std::clamp<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(py) -
                                                      static_cast<std::ptrdiff_t>(pad),
                                                  0, h - 1);
        for (std::size_t px = 0; px < cols; ++px) {
          const auto x = std::clamp<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(px) -
                                                        static_cast<std::ptrdiff_t>(pad),
                                                    0, w - 1);
          planes[c][py * cols + px] = img.at(static_cast<std::size_t>(y),
                                             static_cast<std::size_t>(x), c);
        }
      }
    }
  }

  // Pointer to padded element for image coordinate (y, x), which may be negative.
  const double* at(std::size_t c, std::ptrdiff_t y, std::ptrdiff_t x) const {
    const auto p = static_cast<std::ptrdiff_t>(pad);
    return planes[c].data() + (y + p) * static_cast<std::ptrdiff_t>(cols) + (x + p);
  }
};

}  // namespace

Image nlm_denoise(const Image& img, const NlmParams& params) {
  params.validate();
  if (img.empty()) return img;

  const simd::Kernels& k = simd::kernels();
  const std::size_t height = img.height();
  const std::size_t width = img.width();
  const std::size_t channels = img.channels();
  const auto r = static_cast<std::ptrdiff_t>(params.patch_radius);
  const auto search = static_cast<std::ptrdiff_t>(params.search_radius);
  const std::size_t patch_side = static_cast<std::size_t>(2 * r + 1);

  const PaddedPlanes src(img, static_cast<std::size_t>(search + r));

  // Squared differences live on the patch-extended grid [-r, H+r) x [-r, W+r).
  const std::size_t ext_rows = height + patch_side - 1;
  const std::size_t ext_cols = width + patch_side - 1;
  std::vector<double> sqdiff(ext_rows * ext_cols);
  std::vector<double> row_box(ext_rows * width);
  std::vector<double> dist(height * width);
  std::vector<double> weight(height * width);
  std::vector<double> norm(height * width, 0.0);
  std::vector<std::vector<double>> accum(channels, std::vector<double>(height * width, 0.0));

  const double to_pixel_units = 255.0 * 255.0 /
                                static_cast<double>(channels * patch_side * patch_side);
  const double floor_term = 2.0 * params.sigma * params.sigma;
  const double inv_h2 = 1.0 / (params.h * params.h);

  for (std::ptrdiff_t oy = -search; oy <= search; ++oy) {
    for (std::ptrdiff_t ox = -search; ox <= search; ++ox) {
      std::fill(sqdiff.begin(), sqdiff.end(), 0.0);
      for (std::size_t c = 0; c < channels; ++c) {
        for (std::size_t ey = 0; ey < ext_rows; ++ey) {
          const auto y = static_cast<std::ptrdiff_t>(ey) - r;
          k.sqdiff_accumulate(src.at(c, y, -r), src.at(c, y + oy, ox - r),
                              sqdiff.data() + ey * ext_cols, ext_cols);
        }
      }

      std::fill(row_box.begin(), row_box.end(), 0.0);
      for (std::size_t ey = 0; ey < ext_rows; ++ey) {
        for (std::size_t j = 0; j < patch_side; ++j) {
          k.add(sqdiff.data() + ey * ext_cols + j, row_box.data() + ey * width, width);
        }
      }
      std::fill(dist.begin(), dist.end(), 0.0);
      for (std::size_t y = 0; y < height; ++y) {
        for (std::size_t j = 0; j < patch_side; ++j) {
          k.add(row_box.data() + (y + j) * width, dist.data() + y * width, width);
        }
      }

      for (std::size_t i = 0; i < dist.size(); ++i) {
        const double d2 = dist[i] * to_pixel_units;
        weight[i] = std::exp(-std::max(d2 - floor_term, 0.0) * inv_h2);
      }
      k.add(weight.data(), norm.data(), norm.size());
      for (std::size_t c = 0; c < channels; ++c) {
        for (std::size_t y = 0; y < height; ++y) {
          const auto qy = static_cast<std::ptrdiff_t>(y) + oy;
          k.mul_accumulate(weight.data() + y * width, src.at(c, qy, ox),
                           accum[c].data() + y * width, width);
        }
      }
    }
  }

  Image out(height, width, channels);
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      const std::size_t i = y * width + x;
      for (std::size_t c = 0; c < channels; ++c) {
        out.at(y, x, c) = std::clamp(static_cast<float>(accum[c][i] / norm[i]), 0.0f, 1.0f);
      }
    }
  }
  return out;
}

}  // namespace ultraclean
