#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "hops/dataset.hpp"

namespace hops {

// HOPS dataset file, little-endian throughout:
//
//   "HOPS" | u32 version=1 | u32 n | u32 d | u32 C | u32 flags
//   f32 features[n*d]                          row-major
//   u32 labels[n]                              if flags & kHasLabels
//   u8  candidates[n][ceil(C/8)]               if flags & kHasCandidates, LSB-first
//   f32 anchors[C*d]                           if flags & kHasAnchors
//   u32 total_bytes | utf-8 names joined '\n'  if flags & kHasClassNames
//   u64 FNV-1a of every preceding byte
namespace format {

inline constexpr std::uint32_t kVersion = 1;
inline constexpr std::uint32_t kHasLabels = 1u << 0;
inline constexpr std::uint32_t kHasCandidates = 1u << 1;
inline constexpr std::uint32_t kHasAnchors = 1u << 2;
inline constexpr std::uint32_t kHasClassNames = 1u << 3;

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) noexcept;

std::vector<std::uint8_t> serialize(const DatasetBundle& bundle);

/// Throws BadMagic, VersionUnsupported, TruncatedFile, ChecksumMismatch, or
/// MalformedFile (structurally valid bytes that violate a bundle invariant).
DatasetBundle deserialize(std::span<const std::uint8_t> bytes);

}  // namespace format

void save_bundle(const DatasetBundle& bundle, const std::filesystem::path& path);
DatasetBundle load_bundle(const std::filesystem::path& path);

}  // namespace hops
