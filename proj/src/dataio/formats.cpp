#include <algorithm>
#include <array>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "ultraclean/dataset.hpp"
#include "ultraclean/error.hpp"

namespace ultraclean {

namespace {

constexpr std::array<char, 4> kMagic{'U', 'C', 'D', 'S'};
constexpr std::uint16_t kVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

class Writer {
 public:
  explicit Writer(const std::filesystem::path& path) : out_(path, std::ios::binary) {
    if (!out_) throw Error("cannot open " + path.string() + " for writing");
  }
  template <typename T>
  void put(T value) {
    out_.write(reinterpret_cast<const char*>(&value), sizeof(T));
  }
  void bytes(const void* data, std::size_t n) {
    out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
  }
  void finish(const std::filesystem::path& path) {
    out_.flush();
    if (!out_) throw Error("write failed for " + path.string());
  }

 private:
  std::ofstream out_;
};

class Reader {
 public:
  explicit Reader(std::vector<char> bytes) : bytes_(std::move(bytes)) {}

  template <typename T>
  T get(const char* what) {
    T value;
    take(&value, sizeof(T), what);
    return value;
  }
  void take(void* dst, std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) {
      throw FormatError(FormatError::Kind::Truncated,
                        std::string("dataset file truncated while reading ") + what +
                            " at byte offset " + std::to_string(pos_));
    }
    std::memcpy(dst, bytes_.data() + pos_, n);
    pos_ += n;
  }
  bool at_end() const noexcept { return pos_ == bytes_.size(); }
  std::size_t pos() const noexcept { return pos_; }

 private:
  std::vector<char> bytes_;
  std::size_t pos_ = 0;
};

std::vector<char> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

// Layout: magic[4] version:u16 n:u32 H:u32 W:u32 C:u32 classes:u32
//         pixels: n*H*W*C f32, labels: n u16,
//         has_mask:u8 [target:u16 name_len:u16 name[name_len] flags[n] u8]
void save_dataset(const LabeledDataset& ds, const PoisonMask* mask,
                  const std::filesystem::path& path) {
  ds.validate();
  if (mask && mask->flags.size() != ds.size()) {
    throw ShapeError("poison mask length does not match dataset length");
  }
  const std::size_t h = ds.empty() ? 0 : ds.images.front().height();
  const std::size_t w = ds.empty() ? 0 : ds.images.front().width();
  const std::size_t c = ds.empty() ? 0 : ds.images.front().channels();

  Writer out(path);
  out.bytes(kMagic.data(), kMagic.size());
  out.put<std::uint16_t>(kVersion);
  out.put<std::uint32_t>(static_cast<std::uint32_t>(ds.size()));
  out.put<std::uint32_t>(static_cast<std::uint32_t>(h));
  out.put<std::uint32_t>(static_cast<std::uint32_t>(w));
  out.put<std::uint32_t>(static_cast<std::uint32_t>(c));
  out.put<std::uint32_t>(static_cast<std::uint32_t>(ds.num_classes));
  for (const Image& img : ds.images) out.bytes(img.data().data(), img.size() * sizeof(float));
  for (ClassIndex label : ds.labels) out.put<std::uint16_t>(label);
  out.put<std::uint8_t>(mask ? 1 : 0);
  if (mask) {
    out.put<std::uint16_t>(mask->target_class);
    out.put<std::uint16_t>(static_cast<std::uint16_t>(mask->attack_name.size()));
    out.bytes(mask->attack_name.data(), mask->attack_name.size());
    out.bytes(mask->flags.data(), mask->flags.size());
  }
  out.finish(path);
}

DatasetFile load_dataset(const std::filesystem::path& path) {
  Reader in(slurp(path));
  std::array<char, 4> magic{};
  in.take(magic.data(), magic.size(), "magic");
  if (magic != kMagic) {
    throw FormatError(FormatError::Kind::BadMagic, "bad magic in " + path.string());
  }
  const auto version = in.get<std::uint16_t>("version");
  if (version != kVersion) {
    throw FormatError(FormatError::Kind::VersionMismatch,
                      "unsupported dataset version " + std::to_string(version));
  }
  const std::size_t n = in.get<std::uint32_t>("count");
  const std::size_t h = in.get<std::uint32_t>("height");
  const std::size_t w = in.get<std::uint32_t>("width");
  const std::size_t c = in.get<std::uint32_t>("channels");

  DatasetFile file;
  LabeledDataset& ds = file.dataset;
  ds.num_classes = in.get<std::uint32_t>("class count");
  ds.images.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<float> pixels(h * w * c);
    in.take(pixels.data(), pixels.size() * sizeof(float), "pixels");
    ds.images.emplace_back(h, w, c, std::move(pixels));
  }
  ds.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) ds.labels[i] = in.get<std::uint16_t>("labels");

  const auto has_mask = in.get<std::uint8_t>("mask flag");
  if (has_mask > 1) throw FormatError(FormatError::Kind::Corrupt, "invalid mask flag");
  if (has_mask == 1) {
    PoisonMask mask;
    mask.target_class = in.get<std::uint16_t>("mask target");
    const std::size_t len = in.get<std::uint16_t>("attack name length");
    mask.attack_name.resize(len);
    in.take(mask.attack_name.data(), len, "attack name");
    mask.flags.resize(n);
    in.take(mask.flags.data(), n, "mask flags");
    file.mask = std::move(mask);
  }
  if (!in.at_end()) {
    throw FormatError(FormatError::Kind::Corrupt,
                      "trailing bytes after offset " + std::to_string(in.pos()));
  }
  try {
    ds.validate();
  } catch (const Error& e) {
    throw FormatError(FormatError::Kind::Corrupt, e.what());
  }
  return file;
}

void export_ppm(const Image& img, const std::filesystem::path& path) {
  if (img.channels() != 1 && img.channels() != 3) {
    throw UsageError("PPM export needs 1 or 3 channels");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << "P6\n" << img.width() << ' ' << img.height() << "\n255\n";
  std::vector<unsigned char> row(img.width() * 3);
  for (std::size_t y = 0; y < img.height(); ++y) {
    for (std::size_t x = 0; x < img.width(); ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        const float v = img.at(y, x, img.channels() == 1 ? 0 : c);
        const long q = std::lround(static_cast<double>(v) * 255.0);
        row[x * 3 + c] = static_cast<unsigned char>(std::clamp(q, 0L, 255L));
      }
    }
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
  if (!out) throw Error("write failed for " + path.string());
}

Image read_ppm(const std::filesystem::path& path) {
  const std::vector<char> bytes = slurp(path);
  std::size_t pos = 0;
  auto token = [&]() {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
    std::string tok;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
      tok.push_back(bytes[pos++]);
    }
    return tok;
  };
  if (token() != "P6") throw FormatError(FormatError::Kind::BadMagic, "not a P6 file: " + path.string());
  std::size_t width = 0, height = 0, maxval = 0;
  try {
    width = std::stoul(token());
    height = std::stoul(token());
    maxval = std::stoul(token());
  } catch (const std::exception&) {
    throw FormatError(FormatError::Kind::Corrupt, "malformed PPM header in " + path.string());
  }
  if (maxval != 255) throw FormatError(FormatError::Kind::Corrupt, "PPM maxval must be 255");
  ++pos;  // single whitespace byte after maxval
  if (bytes.size() < pos + width * height * 3) {
    throw FormatError(FormatError::Kind::Truncated, "PPM pixel data truncated in " + path.string());
  }
  Image img(height, width, 3);
  for (std::size_t i = 0; i < width * height * 3; ++i) {
    img.data()[i] = static_cast<float>(static_cast<unsigned char>(bytes[pos + i])) / 255.0f;
  }
  return img;
}

}  // namespace ultraclean
