#include <array>
#include <cstring>
#include <fstream>
#include <iterator>

#include "ultraclean/error.hpp"
#include "ultraclean/model.hpp"

namespace ultraclean {

namespace {

constexpr std::array<char, 4> kMagic{'U', 'C', 'M', 'P'};
constexpr std::uint16_t kVersion = 1;

template <typename T>
void put(std::ofstream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

class Cursor {
 public:
  explicit Cursor(std::vector<char> bytes) : bytes_(std::move(bytes)) {}
  void take(void* dst, std::size_t n) {
    if (bytes_.size() - pos_ < n) {
      throw FormatError(FormatError::Kind::Truncated,
                        "checkpoint truncated at byte offset " + std::to_string(pos_));
    }
    std::memcpy(dst, bytes_.data() + pos_, n);
    pos_ += n;
  }
  template <typename T>
  T get() {
    T v;
    take(&v, sizeof(T));
    return v;
  }
  bool at_end() const noexcept { return pos_ == bytes_.size(); }

 private:
  std::vector<char> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

// Layout: magic[4] version:u16 H:u32 W:u32 C:u32 K:u32 trained:u8 seed:u64
//         then per tensor: rank:u32 dims[rank]:u32 data:f32[prod(dims)]
void save_params(const ModelParams& params, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out.write(kMagic.data(), kMagic.size());
  put<std::uint16_t>(out, kVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(params.arch.height));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(params.arch.width));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(params.arch.channels));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(params.arch.num_classes));
  put<std::uint8_t>(out, params.trained ? 1 : 0);
  put<std::uint64_t>(out, params.seed);
  const auto views = params.tensors();
  for (std::size_t t = 0; t < kTensorCount; ++t) {
    const auto shape = params.tensor_shape(t);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(shape.size()));
    for (auto d : shape) put<std::uint32_t>(out, d);
    out.write(reinterpret_cast<const char*>(views[t].data()),
              static_cast<std::streamsize>(views[t].size() * sizeof(float)));
  }
  if (!out) throw Error("write failed for " + path.string());
}

ModelParams load_params(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  Cursor cur({std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()});

  std::array<char, 4> magic{};
  cur.take(magic.data(), magic.size());
  if (magic != kMagic) throw FormatError(FormatError::Kind::BadMagic, "not a model checkpoint");
  const auto version = cur.get<std::uint16_t>();
  if (version != kVersion) {
    throw FormatError(FormatError::Kind::VersionMismatch,
                      "unsupported checkpoint version " + std::to_string(version));
  }
  ModelParams p;
  p.arch.height = cur.get<std::uint32_t>();
  p.arch.width = cur.get<std::uint32_t>();
  p.arch.channels = cur.get<std::uint32_t>();
  p.arch.num_classes = cur.get<std::uint32_t>();
  const auto trained = cur.get<std::uint8_t>();
  if (trained > 1) throw FormatError(FormatError::Kind::Corrupt, "corrupt checkpoint header");
  p.trained = trained == 1;
  p.seed = cur.get<std::uint64_t>();
  try {
    p.arch.validate();
  } catch (const ShapeError& e) {
    throw FormatError(FormatError::Kind::Corrupt, std::string("corrupt checkpoint header: ") + e.what());
  }

  std::array<std::vector<float>*, kTensorCount> slots{&p.conv1_w, &p.conv1_b, &p.conv2_w,
                                                      &p.conv2_b, &p.dense_w, &p.dense_b};
  for (std::size_t t = 0; t < kTensorCount; ++t) {
    const auto expected = p.tensor_shape(t);
    const auto rank = cur.get<std::uint32_t>();
    std::vector<std::uint32_t> shape(rank);
    for (auto& d : shape) d = cur.get<std::uint32_t>();
    if (shape != expected) {
      throw FormatError(FormatError::Kind::ShapeMismatch,
                        "checkpoint tensor " + std::to_string(t) + " has an unexpected shape");
    }
    std::size_t count = 1;
    for (auto d : shape) count *= d;
    slots[t]->resize(count);
    cur.take(slots[t]->data(), count * sizeof(float));
  }
  if (!cur.at_end()) throw FormatError(FormatError::Kind::Corrupt, "trailing bytes in checkpoint");
  return p;
}

ModelParams load_params(const std::filesystem::path& path, const Architecture& expected) {
  ModelParams p = load_params(path);
  if (p.arch != expected) {
    throw FormatError(FormatError::Kind::ShapeMismatch,
                      "checkpoint architecture does not match the expected input shape");
  }
  return p;
}

}  // namespace ultraclean
