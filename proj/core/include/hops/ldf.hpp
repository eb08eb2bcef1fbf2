#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "hops/dataset.hpp"

namespace hops::ldf {

enum class Voting { Hard, Soft };

Voting parse_voting(std::string_view s);
std::string_view to_string(Voting v) noexcept;

struct LdfConfig {
  std::size_t k = 20;
  double tau = 0.4;
  Voting voting = Voting::Hard;

  void validate() const;
};

/// For each instance, up to k other instances by descending affinity
/// (ties to the lower index). Self is never listed.
struct NeighborIndex {
  std::size_t k = 0;
  std::vector<std::vector<std::size_t>> lists;
};

/// Per-class multiplicities of the multiset union of the instance's own
/// candidate set and its neighbors' sets. Soft voting weights each
/// neighbor by max(affinity, 0); the instance itself always weighs 1.
struct CountVector {
  std::vector<double> counts;
  double total = 0.0;
};

struct RefinedSet {
  std::vector<ClassId> labels;  // ascending
  bool fallback = false;        // true when the thresholded set was empty
};

/// k is clamped to n - 1 unless `strict`, in which case k >= n throws KTooLarge.
NeighborIndex topk_neighbors(const AffinityMatrix& a, std::size_t k, bool strict = false);

CountVector multiset_counts(std::size_t i, const CandidateMatrix& cands, const NeighborIndex& nbrs,
                            const AffinityMatrix& a, const LdfConfig& cfg);

std::vector<double> label_frequency(const CountVector& counts);

/// {c in S_i : f(c) >= tau}, or S_i itself when that is empty.
RefinedSet refine_candidates(std::span<const double> freq, std::span<const std::uint8_t> candidate_row, double tau);

/// Highest-probability member of `refined`; ties to the lower class index.
ClassId select_local(std::span<const ClassId> refined, std::span<const double> probs);

/// {"k": k, "neighbors": [[...], ...]}
nlohmann::json to_json(const NeighborIndex& index);

/// Precomputes the neighbor graph and every instance's refined candidate
/// set. Features and candidates are frozen during training, so only the
/// final argmax depends on the current model.
class LocalFilter {
 public:
  LocalFilter(const EmbeddingSet& e, const CandidateMatrix& cands, const LdfConfig& cfg);

  const NeighborIndex& neighbors() const noexcept { return neighbors_; }
  const RefinedSet& refined(std::size_t i) const { return refined_[i]; }
  ClassId select(std::size_t i, std::span<const double> probs) const { return select_local(refined_[i].labels, probs); }

 private:
  NeighborIndex neighbors_;
  std::vector<RefinedSet> refined_;
};

}  // namespace hops::ldf
