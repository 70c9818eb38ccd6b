#include <algorithm>
#include <array>
#include <cmath>

#include "ultraclean/dataset.hpp"
#include "ultraclean/error.hpp"
#include "ultraclean/rng.hpp"

namespace ultraclean {

namespace {

enum class Shape { TwoBars, Disk, Ring, Corners, Cross, HBar, VBar, Triangle, DotPair, LShape };
constexpr std::size_t kShapeCount = 10;
constexpr double kScaleMax = 0.38;
constexpr double kContrastMax = 0.9;

struct Rgb {
  float r, g, b;
};

constexpr std::array<Rgb, 10> kPalette{{
    {0.95f, 0.20f, 0.20f},
    {0.20f, 0.85f, 0.25f},
    {0.25f, 0.35f, 0.95f},
    {0.95f, 0.90f, 0.20f},
    {0.90f, 0.25f, 0.90f},
    {0.20f, 0.90f, 0.90f},
    {0.95f, 0.60f, 0.15f},
    {0.60f, 0.30f, 0.90f},
    {0.85f, 0.85f, 0.85f},
    {0.55f, 0.80f, 0.30f},
}};

// u, v are offsets from the motif center in units of the motif half-extent.
bool inside(Shape shape, double u, double v) {
  const double au = std::abs(u);
  const double av = std::abs(v);
  const double r = std::sqrt(u * u + v * v);
  switch (shape) {
    case Shape::TwoBars: return au <= 0.9 && av >= 0.35 && av <= 0.9;
    case Shape::Disk: return r <= 0.9;
    case Shape::Ring: return r <= 1.0 && r >= 0.55;
    case Shape::Corners: return au >= 0.45 && av >= 0.45 && au <= 1.0 && av <= 1.0;
    case Shape::Cross: return std::abs(u - v) <= 0.55 || std::abs(u + v) <= 0.55 ? r <= 1.1 : false;
    case Shape::HBar: return av <= 0.4 && au <= 1.0;
    case Shape::VBar: return au <= 0.4 && av <= 1.0;
    case Shape::Triangle: return v <= 0.8 && v >= -0.9 && au <= (v + 0.9) * 0.6;
    case Shape::DotPair: return std::hypot(u - 0.5, v + 0.5) <= 0.45 || std::hypot(u + 0.5, v - 0.5) <= 0.45;
    case Shape::LShape: return au <= 0.9 && av <= 0.9 && (u <= -0.2 || v >= 0.2);
  }
  return false;
}

Rgb random_color(Rng& rng) {
  const Rgb base = kPalette[rng.below(kPalette.size())];
  const auto j = [&rng](float v) {
    return std::clamp(v + static_cast<float>(rng.uniform(-0.1, 0.1)), 0.0f, 1.0f);
  };
  return {j(base.r), j(base.g), j(base.b)};
}

void stamp(Image& img, Rng& rng, Shape shape, double scale_lo, double scale_hi, double jitter,
           float strength) {
  const double side = static_cast<double>(img.height());
  const double half = side * rng.uniform(scale_lo, scale_hi);
  const double cy = side / 2.0 + rng.uniform(-jitter, jitter) * side;
  const double cx = side / 2.0 + rng.uniform(-jitter, jitter) * side;
  const Rgb color = random_color(rng);
  const float col[3] = {color.r, color.g, color.b};
  for (std::size_t y = 0; y < img.height(); ++y) {
    for (std::size_t x = 0; x < img.width(); ++x) {
      const double u = (static_cast<double>(x) + 0.5 - cx) / half;
      const double v = (static_cast<double>(y) + 0.5 - cy) / half;
      if (!inside(shape, u, v)) continue;
      for (std::size_t c = 0; c < 3; ++c) {
        img.at(y, x, c) += strength * (col[c] - img.at(y, x, c));
      }
    }
  }
}

// The class is carried by the motif shape only: colors are drawn per sample,
// and a distractor of another shape sits under the motif.
Image render(Rng& rng, std::size_t cls, std::size_t num_classes, const SyntheticSpec& spec) {
  const std::size_t size = spec.size;
  const auto shape = static_cast<Shape>(cls % kShapeCount);
  const float bg = static_cast<float>(rng.uniform(0.05, 0.45));
  Image img(size, size, 3, bg);

  const std::size_t other = (cls + 1 + rng.below(num_classes - 1)) % num_classes;
  stamp(img, rng, static_cast<Shape>(other % kShapeCount), 0.15, 0.30, 0.25,
        static_cast<float>(spec.clutter));
  stamp(img, rng, shape, spec.scale_min, kScaleMax, 0.12,
        static_cast<float>(rng.uniform(spec.contrast_min, kContrastMax)));

  for (float& px : img.data()) {
    px = std::clamp(px + static_cast<float>(rng.uniform(-spec.noise, spec.noise)), 0.0f, 1.0f);
  }
  return img;
}

}  // namespace

void SyntheticSpec::validate() const {
  if (size < 16) throw UsageError("synthetic images must be at least 16 pixels wide");
  if (!(clutter >= 0.0 && clutter <= 1.0)) throw UsageError("synthetic clutter must be in [0, 1]");
  if (!(scale_min > 0.0 && scale_min <= kScaleMax)) {
    throw UsageError("synthetic scale_min must be in (0, 0.38]");
  }
  if (!(contrast_min >= 0.0 && contrast_min <= kContrastMax)) {
    throw UsageError("synthetic contrast_min must be in [0, 0.9]");
  }
  if (!(noise >= 0.0 && noise <= 1.0)) throw UsageError("synthetic noise must be in [0, 1]");
}

SyntheticSpec SyntheticSpec::cluttered() {
  return SyntheticSpec{24, 0.65, 0.24, 0.55, 0.0};
}

LabeledDataset generate_synthetic(std::uint64_t seed, std::size_t n_per_class,
                                  std::size_t num_classes, const SyntheticSpec& spec) {
  if (num_classes < 2) throw UsageError("generate_synthetic needs at least 2 classes");
  if (num_classes > 65535) throw UsageError("too many classes");
  spec.validate();

  Rng rng(seed);
  LabeledDataset ds;
  ds.num_classes = num_classes;
  ds.images.reserve(n_per_class * num_classes);
  ds.labels.reserve(n_per_class * num_classes);
  // Interleave classes so prefixes of the dataset stay balanced.
  for (std::size_t i = 0; i < n_per_class; ++i) {
    for (std::size_t cls = 0; cls < num_classes; ++cls) {
      ds.images.push_back(render(rng, cls, num_classes, spec));
      ds.labels.push_back(static_cast<ClassIndex>(cls));
    }
  }
  return ds;
}

LabeledDataset generate_synthetic(std::uint64_t seed, std::size_t n_per_class,
                                  std::size_t num_classes, std::size_t size) {
  SyntheticSpec spec;
  spec.size = size;
  return generate_synthetic(seed, n_per_class, num_classes, spec);
}

}  // namespace ultraclean
