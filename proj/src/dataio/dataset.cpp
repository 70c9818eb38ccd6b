#include "ultraclean/dataset.hpp"

#include <algorithm>

#include "ultraclean/error.hpp"

namespace ultraclean {

void LabeledDataset::validate() const {
  if (images.size() != labels.size()) {
    throw ShapeError("dataset has " + std::to_string(images.size()) + " images but " +
                     std::to_string(labels.size()) + " labels");
  }
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (!images[i].same_shape(images.front())) {
      throw ShapeError("image " + std::to_string(i) + " differs in shape from image 0");
    }
    if (labels[i] >= num_classes) {
      throw UsageError("label " + std::to_string(labels[i]) + " at index " + std::to_string(i) +
                       " is out of range for " + std::to_string(num_classes) + " classes");
    }
  }
}

std::vector<std::size_t> LabeledDataset::indices_of_class(ClassIndex cls) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == cls) out.push_back(i);
  }
  return out;
}

LabeledDataset LabeledDataset::subset(const std::vector<std::size_t>& indices) const {
  LabeledDataset out;
  out.num_classes = num_classes;
  out.images.reserve(indices.size());
  out.labels.reserve(indices.size());
  for (std::size_t i : indices) {
    out.images.push_back(images.at(i));
    out.labels.push_back(labels.at(i));
  }
  return out;
}

std::size_t PoisonMask::flagged_count() const noexcept {
  return static_cast<std::size_t>(std::count_if(flags.begin(), flags.end(),
                                                [](std::uint8_t f) { return f != 0; }));
}

PoisonMask PoisonMask::subset(const std::vector<std::size_t>& indices) const {
  PoisonMask out{{}, target_class, attack_name};
  out.flags.reserve(indices.size());
  for (std::size_t i : indices) out.flags.push_back(flags.at(i));
  return out;
}

}  // namespace ultraclean
