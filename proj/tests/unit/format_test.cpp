#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <fstream>

#include "hops/error.hpp"
#include "hops/hops_format.hpp"
#include "test_support.hpp"

namespace hops {
namespace {

using testing::error_of;

void put_u32(std::vector<std::uint8_t>& bytes, std::size_t at, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) bytes[at + k] = static_cast<std::uint8_t>(v >> (8 * k));
}

/// Recomputes the trailing checksum after a deliberate edit.
void reseal(std::vector<std::uint8_t>& bytes) {
  const std::size_t body = bytes.size() - 8;
  const std::uint64_t h = format::fnv1a64(std::span(bytes).first(body));
  for (int k = 0; k < 8; ++k) bytes[body + k] = static_cast<std::uint8_t>(h >> (8 * k));
}

DatasetBundle tiny_bundle() {
  MatrixF f(2, 2, 0.0f);
  f(0, 0) = 1.0f;
  f(1, 1) = 1.0f;
  DatasetBundle b;
  b.embeddings = EmbeddingSet::from_float(f);
  b.num_classes = 3;
  b.labels = LabelVector{2, 0};
  CandidateMatrix c(2, 3);
  c.set(0, 0);
  c.set(0, 2);
  c.set(1, 0);
  b.candidates = c;
  return b;
}

TEST(Fnv1a, KnownVectors) {
  EXPECT_EQ(format::fnv1a64({}), 14695981039346656037ull);
  const std::uint8_t a[] = {'a'};
  EXPECT_EQ(format::fnv1a64(a), 0xaf63dc4c8601ec8cull);
  const std::uint8_t foobar[] = {'f', 'o', 'o', 'b', 'a', 'r'};
  EXPECT_EQ(format::fnv1a64(foobar), 0x85944171f73967e8ull);
}

TEST(Format, ExactByteLayout) {
  const auto bytes = format::serialize(tiny_bundle());
  // header 24 + features 16 + labels 8 + candidates 2 + checksum 8
  ASSERT_EQ(bytes.size(), 58u);
  EXPECT_EQ(std::memcmp(bytes.data(), "HOPS", 4), 0);
  const std::uint8_t header[] = {1, 0, 0, 0, 2, 0, 0, 0, 2, 0, 0, 0, 3, 0, 0, 0, 3, 0, 0, 0};
  EXPECT_EQ(std::memcmp(bytes.data() + 4, header, sizeof header), 0);
  float f00;
  std::memcpy(&f00, bytes.data() + 24, 4);
  EXPECT_EQ(f00, 1.0f);
  EXPECT_EQ(bytes[40], 2);  // label of row 0
  EXPECT_EQ(bytes[44], 0);
  EXPECT_EQ(bytes[48], 0b101);  // {0, 2}, LSB first
  EXPECT_EQ(bytes[49], 0b001);
}

TEST(Format, ClassNamesBlob) {
  DatasetBundle b = tiny_bundle();
  b.class_names = std::vector<std::string>{"cat", "", "sea lion"};
  const auto bytes = format::serialize(b);
  const std::size_t at = 24 + 16 + 8 + 2;
  std::uint32_t total;
  std::memcpy(&total, bytes.data() + at, 4);
  EXPECT_EQ(total, 13u);
  EXPECT_EQ(std::string(reinterpret_cast<const char*>(bytes.data() + at + 4), total), "cat\n\nsea lion");
  EXPECT_EQ(format::deserialize(bytes), b);
}

TEST(Format, RoundTripEveryFlagCombination) {
  Rng rng = make_rng(21);
  for (std::uint32_t flags = 0; flags < 16; ++flags) {
    for (int rep = 0; rep < 5; ++rep) {
      const DatasetBundle b = testing::random_bundle(rng, flags);
      const auto bytes = format::serialize(b);
      const DatasetBundle back = format::deserialize(bytes);
      EXPECT_EQ(back, b) << "flags " << flags;
      EXPECT_EQ(format::serialize(back), bytes);
    }
  }
}

TEST(Format, SyntheticBundleReserializesIdentically) {
  SynthParams p;
  p.seed = 3;
  const auto bytes = format::serialize(synth_gaussian_mixture(p));
  EXPECT_EQ(format::serialize(format::deserialize(bytes)), bytes);
}

TEST(Format, FileRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "hops_format_test.hops";
  const DatasetBundle b = tiny_bundle();
  save_bundle(b, path);
  EXPECT_EQ(load_bundle(path), b);
  std::filesystem::remove(path);
  EXPECT_EQ(error_of([&] { load_bundle(path); }), Errc::IoFailure);
}

TEST(Format, BadMagic) {
  auto bytes = format::serialize(tiny_bundle());
  bytes[0] = 'X';
  EXPECT_EQ(error_of([&] { format::deserialize(bytes); }), Errc::BadMagic);
}

TEST(Format, UnsupportedVersion) {
  auto bytes = format::serialize(tiny_bundle());
  put_u32(bytes, 4, 2);
  EXPECT_EQ(error_of([&] { format::deserialize(bytes); }), Errc::VersionUnsupported);
}

TEST(Format, EveryTruncationIsDetected) {
  const auto bytes = format::serialize(tiny_bundle());
  for (std::size_t len = 0; len < bytes.size(); ++len) {
    EXPECT_EQ(error_of([&] { format::deserialize(std::span(bytes).first(len)); }), Errc::TruncatedFile)
        << "length " << len;
  }
}

TEST(Format, PayloadFlipFailsChecksum) {
  const auto good = format::serialize(tiny_bundle());
  for (std::size_t at = 24; at < good.size(); ++at) {
    auto bytes = good;
    bytes[at] ^= 0x10;
    EXPECT_EQ(error_of([&] { format::deserialize(bytes); }), Errc::ChecksumMismatch) << "byte " << at;
  }
}

TEST(Format, TrailingBytesAreMalformed) {
  auto bytes = format::serialize(tiny_bundle());
  bytes.push_back(0);
  EXPECT_EQ(error_of([&] { format::deserialize(bytes); }), Errc::MalformedFile);
}

TEST(Format, StructuralViolationsAreMalformed) {
  auto bytes = format::serialize(tiny_bundle());
  bytes[40] = 7;  // label >= C
  reseal(bytes);
  EXPECT_EQ(error_of([&] { format::deserialize(bytes); }), Errc::MalformedFile);

  bytes = format::serialize(tiny_bundle());
  bytes[48] |= 0x80;  // padding bit beyond C
  reseal(bytes);
  EXPECT_EQ(error_of([&] { format::deserialize(bytes); }), Errc::MalformedFile);

  bytes = format::serialize(tiny_bundle());
  bytes[49] = 0;  // empty candidate row
  reseal(bytes);
  EXPECT_EQ(error_of([&] { format::deserialize(bytes); }), Errc::MalformedFile);

  bytes = format::serialize(tiny_bundle());
  put_u32(bytes, 20, 1u << 7);  // unknown flag
  EXPECT_EQ(error_of([&] { format::deserialize(bytes); }), Errc::MalformedFile);
}

TEST(Format, HostileSizesDoNotAllocate) {
  auto bytes = format::serialize(tiny_bundle());
  put_u32(bytes, 8, 0xffffffffu);
  put_u32(bytes, 12, 0xffffffffu);
  EXPECT_EQ(error_of([&] { format::deserialize(bytes); }), Errc::TruncatedFile);
}

TEST(Format, NewlineInClassNameRejected) {
  DatasetBundle b = tiny_bundle();
  b.class_names = std::vector<std::string>{"a", "b\nc", "d"};
  EXPECT_THROW(format::serialize(b), Error);
}

}  // namespace
}  // namespace hops
