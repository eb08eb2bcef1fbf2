#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "hops/dataset.hpp"

namespace hops {

enum class CorruptionKind { Rand, Insd };
enum class TailPattern { None, Exp, TwoLevel };

struct TailConfig {
  TailPattern pattern = TailPattern::None;
  double ratio = 1.0;
};

/// Default imbalance ratios when a tail pattern is requested without one.
inline constexpr double kDefaultExpTailRatio = 1.0 / 16.0;
inline constexpr double kDefaultTwoLevelTailRatio = 0.25;

struct CorruptionConfig {
  CorruptionKind kind = CorruptionKind::Rand;
  std::size_t L = 2;
  std::uint64_t seed = 0;
  double missing_rate = 0.0;
  TailConfig tail;

  void validate(std::size_t num_classes) const;
};

CorruptionKind parse_corruption_kind(std::string_view s);
TailPattern parse_tail_pattern(std::string_view s);
std::string_view to_string(CorruptionKind k) noexcept;
std::string_view to_string(TailPattern p) noexcept;

/// {"kind","L","seed","missing_rate","tail":{"pattern","ratio"}}
void to_json(nlohmann::json& j, const CorruptionConfig& cfg);
void from_json(const nlohmann::json& j, CorruptionConfig& cfg);

/// Row j is the normalized mean of the class-j feature rows.
struct PrototypeTable {
  Matrix rows;
};

/// Fraction of false labels in a size-L candidate set: (L - 1) / L.
double confusion_rate(std::size_t L) noexcept;

/// Mean of (|S_i| - 1) / |S_i| over all rows.
double realized_confusion_rate(const CandidateMatrix& cands);

/// Ground truth plus L - 1 distinct random confusers per row. Within each
/// class, confusers are dealt from a shuffled cycle over the C - 1 wrong
/// labels and the cycle is reshuffled once it runs dry.
CandidateMatrix corrupt_rand(const LabelVector& labels, std::size_t num_classes, std::size_t L,
                             std::uint64_t seed);

PrototypeTable class_prototypes(const EmbeddingSet& e, const LabelVector& labels, std::size_t num_classes);

/// Ground truth plus the L - 1 classes whose prototypes are most
/// cosine-similar to the instance (ties to the lower class index).
CandidateMatrix corrupt_insd(const EmbeddingSet& e, const LabelVector& labels, std::size_t num_classes,
                             std::size_t L);

/// Drops the ground truth from missing_rate * n_c rows of every class c and
/// swaps in one non-member label so row sizes are unchanged. Rand mode picks
/// the replacement uniformly; insd mode picks the most prototype-similar
/// non-member.
CandidateMatrix apply_missing_gt(const CandidateMatrix& cands, const LabelVector& labels, double missing_rate,
                                 CorruptionKind mode, const EmbeddingSet& e, std::uint64_t seed);

/// Per-class instance counts after decay. `counts` are the current counts.
std::vector<std::size_t> long_tail_counts(std::span<const std::size_t> counts, TailPattern pattern, double ratio);

/// Subsamples classes to a long-tail profile. Kept instances stay in their
/// original order.
DatasetBundle apply_long_tail(const DatasetBundle& bundle, TailPattern pattern, double ratio, std::uint64_t seed);

/// Full pipeline: long-tail subsampling, candidate generation, then
/// missing-ground-truth noise.
DatasetBundle apply_corruption(const DatasetBundle& bundle, const CorruptionConfig& cfg);

}  // namespace hops
