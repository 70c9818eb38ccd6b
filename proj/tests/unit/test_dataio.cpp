#include <doctest.h>

#include <cstring>

#include "support.hpp"
#include "ultraclean/dataset.hpp"
#include "ultraclean/error.hpp"

using namespace ultraclean;

namespace {

std::vector<unsigned char> cifar_bytes(std::size_t records, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<unsigned char> out;
  for (std::size_t r = 0; r < records; ++r) {
    out.push_back(static_cast<unsigned char>(r % 10));
    for (int i = 0; i < 3072; ++i) out.push_back(static_cast<unsigned char>(rng.below(256)));
  }
  return out;
}

}  // namespace

TEST_CASE("cifar10 import decodes planar records") {
  testing::TempDir dir("cifar");
  auto bytes = cifar_bytes(20, 3);
  bytes[0] = 6;
  // Record 0: red plane pixel (0,0) = 255, green plane pixel (0,1) = 0, blue (31,31) = 128.
  bytes[1] = 255;
  bytes[1 + 1024 + 1] = 0;
  bytes[1 + 2048 + 1023] = 128;
  testing::write_bytes(dir / "batch.bin", bytes);

  const LabeledDataset ds = import_cifar10(dir / "batch.bin");
  REQUIRE(ds.size() == 20);
  CHECK(ds.num_classes == 10);
  CHECK(ds.labels[0] == 6);
  CHECK(ds.labels[7] == 7);
  const Image& img = ds.images[0];
  CHECK(img.height() == 32);
  CHECK(img.width() == 32);
  CHECK(img.channels() == 3);
  CHECK(img.at(0, 0, 0) == 1.0f);
  CHECK(img.at(0, 1, 1) == 0.0f);
  CHECK(img.at(31, 31, 2) == 128.0f / 255.0f);
  // Every pixel is byte / 255 in planar order.
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t y = 0; y < 32; ++y) {
      for (std::size_t x = 0; x < 32; ++x) {
        const unsigned char b = bytes[1 + c * 1024 + y * 32 + x];
        REQUIRE(ds.images[0].at(y, x, c) == static_cast<float>(b) / 255.0f);
      }
    }
  }
}

TEST_CASE("cifar10 import reports truncation and bad labels with byte offsets") {
  testing::TempDir dir("cifar_bad");
  auto bytes = cifar_bytes(3, 4);
  bytes.resize(bytes.size() - 100);
  testing::write_bytes(dir / "short.bin", bytes);
  try {
    import_cifar10(dir / "short.bin");
    FAIL("expected a truncation error");
  } catch (const FormatError& e) {
    CHECK(e.kind() == FormatError::Kind::Truncated);
    CHECK(std::string(e.what()).find("6146") != std::string::npos);
  }

  auto labels = cifar_bytes(2, 5);
  labels[3073] = 12;
  testing::write_bytes(dir / "label.bin", labels);
  try {
    import_cifar10(dir / "label.bin");
    FAIL("expected a corrupt-label error");
  } catch (const FormatError& e) {
    CHECK(e.kind() == FormatError::Kind::Corrupt);
    CHECK(std::string(e.what()).find("3073") != std::string::npos);
  }
}

TEST_CASE("synthetic generator is deterministic, sized and in range") {
  const LabeledDataset a = generate_synthetic(1, 100, 4, 16);
  const LabeledDataset b = generate_synthetic(1, 100, 4, 16);
  REQUIRE(a.size() == 400);
  CHECK(a.num_classes == 4);
  for (std::size_t i = 0; i < a.size(); ++i) {
    REQUIRE(bitwise_equal(a.images[i], b.images[i]));
    REQUIRE(a.labels[i] == b.labels[i]);
    REQUIRE(a.images[i].in_range());
  }
  for (ClassIndex c = 0; c < 4; ++c) CHECK(a.indices_of_class(c).size() == 100);

  SyntheticSpec noisy;
  noisy.noise = 0.3;
  noisy.size = 16;
  for (const Image& img : generate_synthetic(2, 20, 3, noisy).images) REQUIRE(img.in_range());

  const LabeledDataset c = generate_synthetic(2, 100, 4, 16);
  CHECK_FALSE(bitwise_equal(a.images[0], c.images[0]));

  CHECK_THROWS_AS(generate_synthetic(1, 10, 1, 16), UsageError);
  CHECK_THROWS_AS(generate_synthetic(1, 10, 4, 8), UsageError);
}

TEST_CASE("UCDS round trip preserves images, labels and mask bit for bit") {
  testing::TempDir dir("ucds");
  LabeledDataset ds = generate_synthetic(7, 5, 3, 16);
  ds.images[0].at(0, 0, 0) = -0.0f;  // sign of zero must survive
  PoisonMask mask;
  mask.flags.assign(ds.size(), 0);
  mask.flags[2] = mask.flags[9] = 1;
  mask.target_class = 2;
  mask.attack_name = "badnets";

  save_dataset(ds, &mask, dir / "with_mask.ucds");
  const DatasetFile loaded = load_dataset(dir / "with_mask.ucds");
  REQUIRE(loaded.dataset.size() == ds.size());
  CHECK(loaded.dataset.num_classes == 3);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    REQUIRE(bitwise_equal(loaded.dataset.images[i], ds.images[i]));
    REQUIRE(loaded.dataset.labels[i] == ds.labels[i]);
  }
  REQUIRE(loaded.mask.has_value());
  CHECK(loaded.mask->flags == mask.flags);
  CHECK(loaded.mask->target_class == 2);
  CHECK(loaded.mask->attack_name == "badnets");

  save_dataset(ds, nullptr, dir / "plain.ucds");
  CHECK_FALSE(load_dataset(dir / "plain.ucds").mask.has_value());
}

TEST_CASE("UCDS loader rejects malformed files") {
  testing::TempDir dir("ucds_bad");
  const LabeledDataset ds = generate_synthetic(8, 2, 2, 16);
  save_dataset(ds, nullptr, dir / "ok.ucds");
  const auto good = testing::read_bytes(dir / "ok.ucds");

  auto kind_of = [&](const std::vector<unsigned char>& bytes) {
    testing::write_bytes(dir / "bad.ucds", bytes);
    try {
      load_dataset(dir / "bad.ucds");
    } catch (const FormatError& e) {
      return e.kind();
    }
    FAIL("expected a format error");
    return FormatError::Kind::Corrupt;
  };

  auto magic = good;
  std::memcpy(magic.data(), "XXXX", 4);
  CHECK(kind_of(magic) == FormatError::Kind::BadMagic);

  auto version = good;
  version[4] = 99;
  CHECK(kind_of(version) == FormatError::Kind::VersionMismatch);

  auto truncated = good;
  truncated.resize(good.size() / 2);
  CHECK(kind_of(truncated) == FormatError::Kind::Truncated);

  auto trailing = good;
  trailing.push_back(0);
  CHECK(kind_of(trailing) == FormatError::Kind::Corrupt);
}

TEST_CASE("PPM export follows the P6 layout and rounds to bytes") {
  testing::TempDir dir("ppm");
  const Image white(2, 2, 3, 1.0f);
  export_ppm(white, dir / "white.ppm");
  const auto bytes = testing::read_bytes(dir / "white.ppm");
  const std::string header = "P6\n2 2\n255\n";
  REQUIRE(bytes.size() == header.size() + 12);
  CHECK(std::string(bytes.begin(), bytes.begin() + static_cast<long>(header.size())) == header);
  for (std::size_t i = header.size(); i < bytes.size(); ++i) CHECK(bytes[i] == 0xFF);

  Image mid(1, 2, 1);
  mid.at(0, 0, 0) = 0.5f;
  mid.at(0, 1, 0) = 1.0f;
  export_ppm(mid, dir / "gray.ppm");
  const auto g = testing::read_bytes(dir / "gray.ppm");
  const std::string gh = "P6\n2 1\n255\n";
  REQUIRE(g.size() == gh.size() + 6);
  CHECK(g[gh.size()] == 128);
  CHECK(g[gh.size() + 1] == 128);
  CHECK(g[gh.size() + 2] == 128);
  CHECK(g[gh.size() + 3] == 255);

  const Image back = read_ppm(dir / "gray.ppm");
  CHECK(back.channels() == 3);
  CHECK(back.at(0, 0, 1) == 128.0f / 255.0f);
  CHECK(back.at(0, 1, 2) == 1.0f);
}

TEST_CASE("image construction validates its buffer length") {
  CHECK_THROWS_AS(Image(2, 2, 3, std::vector<float>(11)), ShapeError);
  Image img(2, 2, 1, std::vector<float>{-1.0f, 0.5f, 2.0f, 1.0f});
  CHECK_FALSE(img.in_range());
  img.clamp();
  CHECK(img.in_range());
  CHECK(img.at(0, 0, 0) == 0.0f);
  CHECK(img.at(1, 0, 0) == 1.0f);
}

TEST_CASE("dataset subset and mask subset stay aligned") {
  const LabeledDataset ds = generate_synthetic(3, 4, 2, 16);
  PoisonMask mask;
  mask.flags = {0, 1, 0, 0, 1, 0, 0, 0};
  const std::vector<std::size_t> keep{1, 4, 6};
  const LabeledDataset sub = ds.subset(keep);
  const PoisonMask msub = mask.subset(keep);
  REQUIRE(sub.size() == 3);
  CHECK(bitwise_equal(sub.images[2], ds.images[6]));
  CHECK(msub.flags == std::vector<std::uint8_t>{1, 1, 0});
  CHECK(msub.flagged_count() == 2);
}
