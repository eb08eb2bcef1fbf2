#include "hops/ldf.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include <nlohmann/json.hpp>

#include "hops/error.hpp"

namespace hops::ldf {

Voting parse_voting(std::string_view s) {
  if (s == "hard") return Voting::Hard;
  if (s == "soft") return Voting::Soft;
  raise(Errc::InvalidParam, "unknown voting mode '" + std::string(s) + "'");
}

std::string_view to_string(Voting v) noexcept { return v == Voting::Hard ? "hard" : "soft"; }

void LdfConfig::validate() const {
  if (k < 1) raise(Errc::ConfigInvalid, "LDF needs k >= 1");
  if (!(tau >= 0.0 && tau <= 1.0)) raise(Errc::ConfigInvalid, "LDF tau must lie in [0, 1]");
}

NeighborIndex topk_neighbors(const AffinityMatrix& a, std::size_t k, bool strict) {
  const std::size_t n = a.size();
  if (n < 2) raise(Errc::InvalidParam, "neighbor search needs n >= 2");
  if (strict && k >= n) raise(Errc::KTooLarge, "k=" + std::to_string(k) + " with n=" + std::to_string(n));
  const std::size_t kk = std::min(k, n - 1);

  NeighborIndex out;
  out.k = kk;
  out.lists.resize(n);
  std::vector<std::size_t> others;
  others.reserve(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    others.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) others.push_back(j);
    }
    auto closer = [&](std::size_t x, std::size_t y) {
      const double ax = a(i, x), ay = a(i, y);
      return ax != ay ? ax > ay : x < y;
    };
    std::partial_sort(others.begin(), others.begin() + static_cast<std::ptrdiff_t>(kk), others.end(), closer);
    out.lists[i].assign(others.begin(), others.begin() + static_cast<std::ptrdiff_t>(kk));
  }
  return out;
}

CountVector multiset_counts(std::size_t i, const CandidateMatrix& cands, const NeighborIndex& nbrs,
                            const AffinityMatrix& a, const LdfConfig& cfg) {
  const std::size_t classes = cands.num_classes();
  CountVector out{std::vector<double>(classes, 0.0), 0.0};
  auto add_row = [&](std::size_t row, double weight) {
    for (std::size_t c = 0; c < classes; ++c) {
      if (cands.contains(row, static_cast<ClassId>(c))) out.counts[c] += weight;
    }
  };
  add_row(i, 1.0);
  for (std::size_t j : nbrs.lists[i]) {
    add_row(j, cfg.voting == Voting::Hard ? 1.0 : std::max(a(i, j), 0.0));
  }
  out.total = std::accumulate(out.counts.begin(), out.counts.end(), 0.0);
  return out;
}

std::vector<double> label_frequency(const CountVector& counts) {
  if (!(counts.total > 0.0)) raise(Errc::EmptyMultiset, "multiset has no mass");
  std::vector<double> f(counts.counts.size());
  for (std::size_t c = 0; c < f.size(); ++c) f[c] = counts.counts[c] / counts.total;
  return f;
}

RefinedSet refine_candidates(std::span<const double> freq, std::span<const std::uint8_t> candidate_row, double tau) {
  RefinedSet out;
  std::vector<ClassId> all;
  for (std::size_t c = 0; c < candidate_row.size(); ++c) {
    if (!candidate_row[c]) continue;
    all.push_back(static_cast<ClassId>(c));
    if (freq[c] >= tau) out.labels.push_back(static_cast<ClassId>(c));
  }
  if (all.empty()) raise(Errc::EmptyRow, "candidate row is empty");
  if (out.labels.empty()) {
    out.labels = std::move(all);
    out.fallback = true;
  }
  return out;
}

ClassId select_local(std::span<const ClassId> refined, std::span<const double> probs) {
  if (refined.empty()) raise(Errc::EmptyRow, "refined candidate set is empty");
  ClassId best = refined.front();
  for (ClassId c : refined) {
    if (probs[c] > probs[best] || (probs[c] == probs[best] && c < best)) best = c;
  }
  return best;
}

nlohmann::json to_json(const NeighborIndex& index) {
  return nlohmann::json{{"k", index.k}, {"neighbors", index.lists}};
}

LocalFilter::LocalFilter(const EmbeddingSet& e, const CandidateMatrix& cands, const LdfConfig& cfg) {
  cfg.validate();
  if (cands.rows() != e.n()) raise(Errc::DimensionMismatch, "candidate rows differ from instance count");
  const AffinityMatrix a = cosine_affinity(e);
  neighbors_ = topk_neighbors(a, cfg.k);
  refined_.reserve(e.n());
  for (std::size_t i = 0; i < e.n(); ++i) {
    const auto freq = label_frequency(multiset_counts(i, cands, neighbors_, a, cfg));
    refined_.push_back(refine_candidates(freq, cands.row(i), cfg.tau));
  }
}

}  // namespace hops::ldf
