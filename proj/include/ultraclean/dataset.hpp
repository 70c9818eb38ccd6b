#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ultraclean/image.hpp"

namespace ultraclean {

using ClassIndex = std::uint16_t;

struct LabeledDataset {
  std::vector<Image> images;
  std::vector<ClassIndex> labels;
  std::size_t num_classes = 0;

  std::size_t size() const noexcept { return images.size(); }
  bool empty() const noexcept { return images.empty(); }

  // Throws ShapeError / UsageError when the dataset invariants do not hold.
  void validate() const;

  std::vector<std::size_t> indices_of_class(ClassIndex cls) const;

  LabeledDataset subset(const std::vector<std::size_t>& indices) const;
};

// Ground truth for which samples an attack touched.
struct PoisonMask {
  std::vector<std::uint8_t> flags;
  ClassIndex target_class = 0;
  std::string attack_name;

  std::size_t flagged_count() const noexcept;
  bool flagged(std::size_t i) const noexcept { return flags[i] != 0; }
  PoisonMask subset(const std::vector<std::size_t>& indices) const;
};

struct DatasetFile {
  LabeledDataset dataset;
  std::optional<PoisonMask> mask;
};

// CIFAR-10 binary batch: 3073-byte records, label byte then planar RGB 32x32.
LabeledDataset import_cifar10(const std::filesystem::path& path);

// One geometric motif shape per class (ten shapes, reused cyclically past ten
// classes) in a random palette color over a flat background, with a
// distractor shape of another class blended underneath.
struct SyntheticSpec {
  std::size_t size = 32;      // square images, at least 16
  double clutter = 0.15;      // distractor opacity
  double scale_min = 0.30;    // motif half-extent range [scale_min, 0.38] of the side
  double contrast_min = 0.7;  // motif opacity range [contrast_min, 0.9]
  double noise = 0.0;         // uniform per-pixel noise amplitude

  void validate() const;
  // Heavier clutter and a wider range of faint, small motifs, at 24 pixels.
  static SyntheticSpec cluttered();
};

// Deterministic in `seed`; classes are interleaved in the output.
LabeledDataset generate_synthetic(std::uint64_t seed, std::size_t n_per_class,
                                  std::size_t num_classes, const SyntheticSpec& spec = {});
LabeledDataset generate_synthetic(std::uint64_t seed, std::size_t n_per_class,
                                  std::size_t num_classes, std::size_t size);

// UCDS binary container (little-endian). See README for the layout.
void save_dataset(const LabeledDataset& ds, const PoisonMask* mask,
                  const std::filesystem::path& path);
DatasetFile load_dataset(const std::filesystem::path& path);

// Binary P6, maxval 255. Grayscale images are replicated to three channels.
void export_ppm(const Image& img, const std::filesystem::path& path);
Image read_ppm(const std::filesystem::path& path);

}  // namespace ultraclean
