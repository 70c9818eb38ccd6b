#pragma once

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "ultraclean/denoise.hpp"
#include "ultraclean/image.hpp"
#include "ultraclean/rng.hpp"

namespace testing {

inline ultraclean::Image random_image(ultraclean::Rng& rng, std::size_t h, std::size_t w,
                                      std::size_t c) {
  ultraclean::Image img(h, w, c);
  for (float& v : img.data()) v = static_cast<float>(rng.uniform01());
  return img;
}

// Fresh directory under the system temp path, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("ultraclean_test_" + tag + "_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline float clamped(const ultraclean::Image& img, long y, long x, std::size_t c) {
  const long h = static_cast<long>(img.height());
  const long w = static_cast<long>(img.width());
  return img.at(static_cast<std::size_t>(std::clamp(y, 0L, h - 1)),
                static_cast<std::size_t>(std::clamp(x, 0L, w - 1)), c);
}

// Direct per-pixel evaluation of the non-local means definition.
inline ultraclean::Image nlm_oracle(const ultraclean::Image& img,
                                    const ultraclean::NlmParams& p = {}) {
  const long r = p.patch_radius;
  const long s = p.search_radius;
  const double count = static_cast<double>(img.channels() * (2 * r + 1) * (2 * r + 1));
  ultraclean::Image out(img.height(), img.width(), img.channels());
  for (long y = 0; y < static_cast<long>(img.height()); ++y) {
    for (long x = 0; x < static_cast<long>(img.width()); ++x) {
      double norm = 0.0;
      std::vector<double> acc(img.channels(), 0.0);
      for (long oy = -s; oy <= s; ++oy) {
        for (long ox = -s; ox <= s; ++ox) {
          double d2 = 0.0;
          for (long dy = -r; dy <= r; ++dy) {
            for (long dx = -r; dx <= r; ++dx) {
              for (std::size_t c = 0; c < img.channels(); ++c) {
                const double a = 255.0 * clamped(img, y + dy, x + dx, c);
                const double b = 255.0 * clamped(img, y + oy + dy, x + ox + dx, c);
                d2 += (a - b) * (a - b);
              }
            }
          }
          d2 /= count;
          const double wgt =
              std::exp(-std::max(d2 - 2.0 * p.sigma * p.sigma, 0.0) / (p.h * p.h));
          norm += wgt;
          for (std::size_t c = 0; c < img.channels(); ++c) {
            acc[c] += wgt * clamped(img, y + oy, x + ox, c);
          }
        }
      }
      for (std::size_t c = 0; c < img.channels(); ++c) {
        out.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x), c) =
            std::clamp(static_cast<float>(acc[c] / norm), 0.0f, 1.0f);
      }
    }
  }
  return out;
}

// Median by full sort of the clamped window.
inline ultraclean::Image median_oracle(const ultraclean::Image& img, long radius = 1) {
  ultraclean::Image out(img.height(), img.width(), img.channels());
  std::vector<float> window;
  for (long y = 0; y < static_cast<long>(img.height()); ++y) {
    for (long x = 0; x < static_cast<long>(img.width()); ++x) {
      for (std::size_t c = 0; c < img.channels(); ++c) {
        window.clear();
        for (long dy = -radius; dy <= radius; ++dy) {
          for (long dx = -radius; dx <= radius; ++dx) window.push_back(clamped(img, y + dy, x + dx, c));
        }
        std::sort(window.begin(), window.end());
        out.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x), c) = window[window.size() / 2];
      }
    }
  }
  return out;
}

inline double max_abs_diff(const ultraclean::Image& a, const ultraclean::Image& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::abs(static_cast<double>(a.data()[i]) - b.data()[i]));
  }
  return m;
}

inline std::vector<unsigned char> read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_bytes(const std::filesystem::path& p, const std::vector<unsigned char>& bytes) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace testing
