#include "ultraclean/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "ultraclean/error.hpp"

namespace ultraclean {

Image::Image(std::size_t height, std::size_t width, std::size_t channels, float fill)
    : height_(height), width_(width), channels_(channels),
      data_(height * width * channels, fill) {}

Image::Image(std::size_t height, std::size_t width, std::size_t channels, std::vector<float> data)
    : height_(height), width_(width), channels_(channels), data_(std::move(data)) {
  if (data_.size() != height * width * channels) {
    throw ShapeError("image data length " + std::to_string(data_.size()) + " does not match " +
                     std::to_string(height) + "x" + std::to_string(width) + "x" +
                     std::to_string(channels));
  }
}

bool Image::in_range() const noexcept {
  return std::all_of(data_.begin(), data_.end(),
                     [](float v) { return std::isfinite(v) && v >= 0.0f && v <= 1.0f; });
}

void Image::clamp() noexcept {
  for (float& v : data_) v = std::clamp(v, 0.0f, 1.0f);
}

bool bitwise_equal(const Image& a, const Image& b) noexcept {
  return a.same_shape(b) &&
         std::memcmp(a.data().data(), b.data().data(), a.size() * sizeof(float)) == 0;
}

}  // namespace ultraclean
