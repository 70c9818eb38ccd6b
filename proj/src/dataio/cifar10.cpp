#include <fstream>
#include <iterator>

#include "ultraclean/dataset.hpp"
#include "ultraclean/error.hpp"

namespace ultraclean {

namespace {
constexpr std::size_t kSide = 32;
constexpr std::size_t kPlane = kSide * kSide;
constexpr std::size_t kRecord = 1 + 3 * kPlane;
constexpr std::size_t kClasses = 10;
}  // namespace

LabeledDataset import_cifar10(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  const std::vector<unsigned char> bytes{std::istreambuf_iterator<char>(in),
                                         std::istreambuf_iterator<char>()};

  if (bytes.size() % kRecord != 0) {
    const std::size_t offset = bytes.size() - bytes.size() % kRecord;
    throw FormatError(FormatError::Kind::Truncated,
                      "truncated CIFAR-10 record at byte offset " + std::to_string(offset));
  }

  LabeledDataset ds;
  ds.num_classes = kClasses;
  const std::size_t n = bytes.size() / kRecord;
  ds.images.reserve(n);
  ds.labels.reserve(n);
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t base = r * kRecord;
    const unsigned char label = bytes[base];
    if (label >= kClasses) {
      throw FormatError(FormatError::Kind::Corrupt,
                        "CIFAR-10 label " + std::to_string(label) + " at byte offset " +
                            std::to_string(base));
    }
    Image img(kSide, kSide, 3);
    for (std::size_t c = 0; c < 3; ++c) {
      const unsigned char* plane = &bytes[base + 1 + c * kPlane];
      for (std::size_t p = 0; p < kPlane; ++p) {
        img.at(p / kSide, p % kSide, c) = static_cast<float>(plane[p]) / 255.0f;
      }
    }
    ds.images.push_back(std::move(img));
    ds.labels.push_back(label);
  }
  return ds;
}

}  // namespace ultraclean
