#include <algorithm>
#include <cmath>
#include <numbers>

#include "ultraclean/attacks.hpp"
#include "ultraclean/error.hpp"
#include "ultraclean/rng.hpp"

namespace ultraclean {

std::pair<Image, Image> TriggerSpec::placed(std::size_t height, std::size_t width,
                                            std::size_t channels) const {
  if (pattern.channels() != channels && pattern.channels() != 1) {
    throw UsageError("trigger pattern has " + std::to_string(pattern.channels()) +
                     " channels, image has " + std::to_string(channels));
  }
  if (mask.height() != pattern.height() || mask.width() != pattern.width() ||
      mask.channels() != 1) {
    throw UsageError("trigger mask must be single-channel with the pattern's height and width");
  }
  const std::size_t ph = pattern.height();
  const std::size_t pw = pattern.width();
  if (ph + placement.margin > height || pw + placement.margin > width) {
    throw UsageError("trigger of " + std::to_string(ph) + "x" + std::to_string(pw) +
                     " with margin " + std::to_string(placement.margin) +
                     " does not fit a " + std::to_string(height) + "x" + std::to_string(width) +
                     " image");
  }
  using Corner = Placement::Corner;
  const bool bottom = placement.corner == Corner::BottomLeft || placement.corner == Corner::BottomRight;
  const bool right = placement.corner == Corner::TopRight || placement.corner == Corner::BottomRight;
  const std::size_t top = bottom ? height - ph - placement.margin : placement.margin;
  const std::size_t left = right ? width - pw - placement.margin : placement.margin;

  Image full_pattern(height, width, channels);
  Image full_mask(height, width, 1);
  for (std::size_t y = 0; y < ph; ++y) {
    for (std::size_t x = 0; x < pw; ++x) {
      full_mask.at(top + y, left + x, 0) = std::clamp(mask.at(y, x, 0), 0.0f, 1.0f);
      for (std::size_t c = 0; c < channels; ++c) {
        full_pattern.at(top + y, left + x, c) = pattern.at(y, x, pattern.channels() == 1 ? 0 : c);
      }
    }
  }
  return {std::move(full_pattern), std::move(full_mask)};
}

TriggerSpec checkerboard_trigger(std::size_t side, std::size_t channels, Placement placement) {
  Image pattern(side, side, channels);
  for (std::size_t y = 0; y < side; ++y) {
    for (std::size_t x = 0; x < side; ++x) {
      for (std::size_t c = 0; c < channels; ++c) pattern.at(y, x, c) = (x + y) % 2 == 0 ? 1.0f : 0.0f;
    }
  }
  return {std::move(pattern), Image(side, side, 1, 1.0f), placement};
}

TriggerSpec solid_trigger(std::size_t side, std::size_t channels, float value,
                          Placement placement) {
  return {Image(side, side, channels, value), Image(side, side, 1, 1.0f), placement};
}

TriggerSpec trigger_from_image(Image pattern, Placement placement) {
  Image mask(pattern.height(), pattern.width(), 1, 1.0f);
  return {std::move(pattern), std::move(mask), placement};
}

Image random_pattern(std::size_t height, std::size_t width, std::size_t channels,
                     std::uint64_t seed) {
  Rng rng(seed);
  Image img(height, width, channels);
  for (float& v : img.data()) v = static_cast<float>(rng.uniform01());
  return img;
}

Image apply_patch(const Image& img, const TriggerSpec& spec) {
  const auto [pattern, mask] = spec.placed(img.height(), img.width(), img.channels());
  Image out = img;
  for (std::size_t y = 0; y < img.height(); ++y) {
    for (std::size_t x = 0; x < img.width(); ++x) {
      const float m = mask.at(y, x, 0);
      if (m == 0.0f) continue;
      for (std::size_t c = 0; c < img.channels(); ++c) {
        out.at(y, x, c) = std::clamp(img.at(y, x, c) * (1.0f - m) + pattern.at(y, x, c) * m,
                                     0.0f, 1.0f);
      }
    }
  }
  return out;
}

Image blend(const Image& img, const Image& trigger, double alpha) {
  if (!img.same_shape(trigger)) throw ShapeError("blend trigger shape does not match the image");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw UsageError("blend ratio must be in [0, 1]");
  Image out = img;
  const auto a = static_cast<float>(alpha);
  auto dst = out.data();
  const auto src = img.data();
  const auto trg = trigger.data();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    dst[i] = std::clamp(a * trg[i] + (1.0f - a) * src[i], 0.0f, 1.0f);
  }
  return out;
}

void SigSpec::validate() const {
  if (!(delta >= 0.0)) throw UsageError("SIG strength must be >= 0");
  if (!(frequency >= 1.0)) throw UsageError("SIG frequency must be >= 1");
}

std::vector<float> sig_trigger(std::size_t rows, std::size_t cols, const SigSpec& spec) {
  spec.validate();
  std::vector<float> field(rows * cols);
  const double amplitude = spec.delta / 255.0;
  for (std::size_t j = 0; j < cols; ++j) {
    const double v = amplitude * std::sin(2.0 * std::numbers::pi * static_cast<double>(j) *
                                          spec.frequency / static_cast<double>(cols));
    for (std::size_t i = 0; i < rows; ++i) field[i * cols + j] = static_cast<float>(v);
  }
  return field;
}

Image apply_sig(const Image& img, const SigSpec& spec) {
  const std::vector<float> field = sig_trigger(img.height(), img.width(), spec);
  Image out = img;
  for (std::size_t y = 0; y < img.height(); ++y) {
    for (std::size_t x = 0; x < img.width(); ++x) {
      for (std::size_t c = 0; c < img.channels(); ++c) {
        out.at(y, x, c) = std::clamp(img.at(y, x, c) + field[y * img.width() + x], 0.0f, 1.0f);
      }
    }
  }
  return out;
}

}  // namespace ultraclean
