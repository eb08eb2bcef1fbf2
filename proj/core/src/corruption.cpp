#include "hops/corruption.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <string>

#include <nlohmann/json.hpp>

#include "hops/error.hpp"
#include "hops/random.hpp"

namespace hops {

namespace {

void check_L(std::size_t L, std::size_t num_classes) {
  if (L < 1 || L > num_classes) {
    raise(Errc::InvalidL, "L=" + std::to_string(L) + " must lie in [1, C=" + std::to_string(num_classes) + "]");
  }
}

/// Class order by descending similarity, ties to the lower index.
std::vector<ClassId> rank_by_similarity(std::span<const double> sims) {
  std::vector<ClassId> order(sims.size());
  std::iota(order.begin(), order.end(), ClassId{0});
  std::stable_sort(order.begin(), order.end(), [&](ClassId a, ClassId b) { return sims[a] > sims[b]; });
  return order;
}

std::vector<double> prototype_similarities(const PrototypeTable& protos, std::span<const double> x) {
  std::vector<double> sims(protos.rows.rows());
  for (std::size_t c = 0; c < sims.size(); ++c) sims[c] = dot(protos.rows.row(c), x);
  return sims;
}

}  // namespace

void CorruptionConfig::validate(std::size_t num_classes) const {
  if (L < 2) raise(Errc::InvalidL, "candidate set size L must be at least 2");
  check_L(L, num_classes);
  if (!(missing_rate >= 0.0 && missing_rate < 1.0)) raise(Errc::InvalidParam, "missing_rate must lie in [0, 1)");
  if (tail.pattern != TailPattern::None && !(tail.ratio > 0.0 && tail.ratio <= 1.0)) {
    raise(Errc::InvalidParam, "tail ratio must lie in (0, 1]");
  }
}

CorruptionKind parse_corruption_kind(std::string_view s) {
  if (s == "rand") return CorruptionKind::Rand;
  if (s == "insd") return CorruptionKind::Insd;
  raise(Errc::InvalidParam, "unknown corruption kind '" + std::string(s) + "'");
}

TailPattern parse_tail_pattern(std::string_view s) {
  if (s == "none") return TailPattern::None;
  if (s == "exp") return TailPattern::Exp;
  if (s == "two_level") return TailPattern::TwoLevel;
  raise(Errc::InvalidParam, "unknown tail pattern '" + std::string(s) + "'");
}

std::string_view to_string(CorruptionKind k) noexcept { return k == CorruptionKind::Rand ? "rand" : "insd"; }

std::string_view to_string(TailPattern p) noexcept {
  switch (p) {
    case TailPattern::None: return "none";
    case TailPattern::Exp: return "exp";
    case TailPattern::TwoLevel: return "two_level";
  }
  return "none";
}

void to_json(nlohmann::json& j, const CorruptionConfig& cfg) {
  j = nlohmann::json{{"kind", to_string(cfg.kind)},
                     {"L", cfg.L},
                     {"seed", cfg.seed},
                     {"missing_rate", cfg.missing_rate},
                     {"tail", {{"pattern", to_string(cfg.tail.pattern)}, {"ratio", cfg.tail.ratio}}}};
}

void from_json(const nlohmann::json& j, CorruptionConfig& cfg) {
  cfg = CorruptionConfig{};
  cfg.kind = parse_corruption_kind(j.at("kind").get<std::string>());
  cfg.L = j.at("L").get<std::size_t>();
  cfg.seed = j.value("seed", std::uint64_t{0});
  cfg.missing_rate = j.value("missing_rate", 0.0);
  if (auto it = j.find("tail"); it != j.end() && !it->is_null()) {
    cfg.tail.pattern = parse_tail_pattern(it->value("pattern", std::string("none")));
    const double fallback = cfg.tail.pattern == TailPattern::Exp        ? kDefaultExpTailRatio
                            : cfg.tail.pattern == TailPattern::TwoLevel ? kDefaultTwoLevelTailRatio
                                                                        : 1.0;
    cfg.tail.ratio = it->value("ratio", fallback);
  }
}

double confusion_rate(std::size_t L) noexcept {
  if (L == 0) return 0.0;
  return static_cast<double>(L - 1) / static_cast<double>(L);
}

double realized_confusion_rate(const CandidateMatrix& cands) {
  if (cands.rows() == 0) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < cands.rows(); ++i) {
    const std::size_t s = cands.row_size(i);
    if (s == 0) raise(Errc::EmptyRow, "candidate row " + std::to_string(i) + " is empty");
    sum += confusion_rate(s);
  }
  return sum / static_cast<double>(cands.rows());
}

CandidateMatrix corrupt_rand(const LabelVector& labels, std::size_t num_classes, std::size_t L,
                             std::uint64_t seed) {
  check_L(L, num_classes);
  validate_labels(labels, num_classes);
  Rng rng = make_rng(seed, 0xc0a1);
  CandidateMatrix out(labels.size(), num_classes);
  std::vector<std::deque<ClassId>> pools(num_classes);

  for (std::size_t i = 0; i < labels.size(); ++i) {
    const ClassId gt = labels[i];
    out.set(i, gt);
    auto& pool = pools[gt];
    std::vector<ClassId> deferred;
    std::size_t picked = 0;
    while (picked + 1 < L) {
      if (pool.empty()) {
        std::vector<ClassId> cycle;
        for (ClassId c = 0; c < num_classes; ++c) {
          if (c != gt) cycle.push_back(c);
        }
        std::shuffle(cycle.begin(), cycle.end(), rng);
        pool.assign(cycle.begin(), cycle.end());
      }
      const ClassId c = pool.front();
      pool.pop_front();
      if (out.contains(i, c)) {
        // Seen earlier in this row after a reshuffle; keep it for the next row.
        deferred.push_back(c);
        continue;
      }
      out.set(i, c);
      ++picked;
    }
    pool.insert(pool.begin(), deferred.begin(), deferred.end());
  }
  return out;
}

PrototypeTable class_prototypes(const EmbeddingSet& e, const LabelVector& labels, std::size_t num_classes) {
  if (labels.size() != e.n()) raise(Errc::DimensionMismatch, "labels length differs from n");
  validate_labels(labels, num_classes);
  Matrix sums(num_classes, e.d());
  std::vector<std::size_t> counts(num_classes, 0);
  for (std::size_t i = 0; i < e.n(); ++i) {
    auto dst = sums.row(labels[i]);
    auto src = e.values().row(i);
    for (std::size_t k = 0; k < e.d(); ++k) dst[k] += static_cast<double>(src[k]);
    ++counts[labels[i]];
  }
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (counts[c] == 0) raise(Errc::EmptyClass, "class " + std::to_string(c) + " has no instances");
    for (double& v : sums.row(c)) v /= static_cast<double>(counts[c]);
  }
  return {normalize_rows(sums)};
}

CandidateMatrix corrupt_insd(const EmbeddingSet& e, const LabelVector& labels, std::size_t num_classes,
                             std::size_t L) {
  check_L(L, num_classes);
  const PrototypeTable protos = class_prototypes(e, labels, num_classes);
  CandidateMatrix out(labels.size(), num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const ClassId gt = labels[i];
    out.set(i, gt);
    const auto order = rank_by_similarity(prototype_similarities(protos, e.row(i)));
    std::size_t added = 0;
    for (ClassId c : order) {
      if (added + 1 >= L) break;
      if (c == gt) continue;
      out.set(i, c);
      ++added;
    }
  }
  return out;
}

CandidateMatrix apply_missing_gt(const CandidateMatrix& cands, const LabelVector& labels, double missing_rate,
                                 CorruptionKind mode, const EmbeddingSet& e, std::uint64_t seed) {
  if (labels.size() != cands.rows()) raise(Errc::DimensionMismatch, "labels length differs from candidate rows");
  if (!(missing_rate >= 0.0 && missing_rate < 1.0)) raise(Errc::InvalidParam, "missing_rate must lie in [0, 1)");
  const std::size_t classes = cands.num_classes();
  validate_labels(labels, classes);
  if (missing_rate == 0.0) return cands;

  std::vector<std::vector<std::size_t>> groups(classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!cands.contains(i, labels[i])) {
      raise(Errc::InvalidParam, "row " + std::to_string(i) + " already lacks its ground truth");
    }
    groups[labels[i]].push_back(i);
  }

  std::vector<std::size_t> drop_counts(classes, 0);
  for (std::size_t c = 0; c < classes; ++c) {
    const double want = missing_rate * static_cast<double>(groups[c].size());
    const double rounded = std::round(want);
    if (std::abs(want - rounded) > 1e-9) {
      raise(Errc::RateNotIntegral, "missing_rate * " + std::to_string(groups[c].size()) + " instances of class " +
                                       std::to_string(c) + " is not an integer");
    }
    drop_counts[c] = static_cast<std::size_t>(rounded);
  }

  std::optional<PrototypeTable> protos;
  if (mode == CorruptionKind::Insd) protos = class_prototypes(e, labels, classes);

  Rng rng = make_rng(seed, 0x6d15);
  CandidateMatrix out = cands;
  for (std::size_t c = 0; c < classes; ++c) {
    auto members = groups[c];
    std::shuffle(members.begin(), members.end(), rng);
    members.resize(drop_counts[c]);
    std::sort(members.begin(), members.end());
    for (std::size_t i : members) {
      const ClassId gt = labels[i];
      std::vector<ClassId> outsiders;
      for (ClassId q = 0; q < classes; ++q) {
        if (q != gt && !out.contains(i, q)) outsiders.push_back(q);
      }
      if (outsiders.empty()) {
        raise(Errc::InvalidL, "row " + std::to_string(i) + " holds every class; no replacement label exists");
      }
      ClassId replacement = outsiders.front();
      if (mode == CorruptionKind::Rand) {
        std::uniform_int_distribution<std::size_t> pick(0, outsiders.size() - 1);
        replacement = outsiders[pick(rng)];
      } else {
        for (ClassId q : rank_by_similarity(prototype_similarities(*protos, e.row(i)))) {
          if (q != gt && !out.contains(i, q)) {
            replacement = q;
            break;
          }
        }
      }
      out.set(i, gt, false);
      out.set(i, replacement);
    }
  }
  return out;
}

std::vector<std::size_t> long_tail_counts(std::span<const std::size_t> counts, TailPattern pattern, double ratio) {
  const std::size_t classes = counts.size();
  if (!(ratio > 0.0 && ratio <= 1.0)) raise(Errc::InvalidParam, "tail ratio must lie in (0, 1]");
  std::vector<std::size_t> kept(counts.begin(), counts.end());
  if (pattern == TailPattern::None) return kept;
  for (std::size_t j = 0; j < classes; ++j) {
    double factor = 1.0;
    if (pattern == TailPattern::Exp) {
      if (classes < 2) raise(Errc::InvalidParam, "exponential tail needs C >= 2");
      factor = std::pow(ratio, static_cast<double>(j) / static_cast<double>(classes - 1));
    } else if (static_cast<double>(j) >= static_cast<double>(classes) / 2.0) {
      factor = ratio;
    }
    kept[j] = static_cast<std::size_t>(std::llround(static_cast<double>(counts[j]) * factor));
    if (kept[j] < 1) {
      raise(Errc::EmptyClassAfterDecay, "class " + std::to_string(j) + " keeps no instances after decay");
    }
  }
  return kept;
}

DatasetBundle apply_long_tail(const DatasetBundle& bundle, TailPattern pattern, double ratio, std::uint64_t seed) {
  auto groups = indices_by_class(bundle);
  std::vector<std::size_t> counts;
  for (const auto& g : groups) counts.push_back(g.size());
  const auto kept = long_tail_counts(counts, pattern, ratio);

  Rng rng = make_rng(seed, 0x7a11);
  std::vector<std::size_t> chosen;
  for (std::size_t c = 0; c < groups.size(); ++c) {
    auto g = groups[c];
    std::shuffle(g.begin(), g.end(), rng);
    chosen.insert(chosen.end(), g.begin(), g.begin() + static_cast<std::ptrdiff_t>(kept[c]));
  }
  std::sort(chosen.begin(), chosen.end());
  return bundle.select(chosen);
}

DatasetBundle apply_corruption(const DatasetBundle& bundle, const CorruptionConfig& cfg) {
  if (!bundle.labels) raise(Errc::MissingLabels, "corruption needs ground-truth labels");
  cfg.validate(bundle.num_classes);
  DatasetBundle out = cfg.tail.pattern == TailPattern::None
                          ? bundle
                          : apply_long_tail(bundle, cfg.tail.pattern, cfg.tail.ratio, cfg.seed);
  const LabelVector& labels = *out.labels;
  out.candidates = cfg.kind == CorruptionKind::Rand
                       ? corrupt_rand(labels, out.num_classes, cfg.L, cfg.seed)
                       : corrupt_insd(out.embeddings, labels, out.num_classes, cfg.L);
  if (cfg.missing_rate > 0.0) {
    out.candidates = apply_missing_gt(*out.candidates, labels, cfg.missing_rate, cfg.kind, out.embeddings, cfg.seed);
  }
  return out;
}

}  // namespace hops
