#include <gtest/gtest.h>

#include <cmath>

#include <nlohmann/json.hpp>

#include "hops/corruption.hpp"
#include "hops/error.hpp"
#include "hops/ldf.hpp"
#include "test_support.hpp"

namespace hops::ldf {
namespace {

using hops::testing::error_of;

AffinityMatrix constant_affinity(std::size_t n, double v) {
  AffinityMatrix a{Matrix(n, n, v)};
  for (std::size_t i = 0; i < n; ++i) a.values(i, i) = 1.0;
  return a;
}

CandidateMatrix rows_of(std::size_t classes, std::initializer_list<std::initializer_list<ClassId>> rows) {
  CandidateMatrix m(rows.size(), classes);
  std::size_t i = 0;
  for (auto& r : rows) {
    for (ClassId c : r) m.set(i, c);
    ++i;
  }
  return m;
}

TEST(TopK, TiesGoToLowerIndex) {
  const NeighborIndex idx = topk_neighbors(constant_affinity(3, 1.0), 1);
  EXPECT_EQ(idx.lists[0], (std::vector<std::size_t>{1}));
  EXPECT_EQ(idx.lists[1], (std::vector<std::size_t>{0}));
  EXPECT_EQ(idx.lists[2], (std::vector<std::size_t>{0}));
}

TEST(TopK, ClampsOrRejectsLargeK) {
  const AffinityMatrix a = constant_affinity(4, 0.5);
  const NeighborIndex idx = topk_neighbors(a, 3);
  EXPECT_EQ(idx.lists[2], (std::vector<std::size_t>{0, 1, 3}));
  EXPECT_EQ(topk_neighbors(a, 10).lists[0].size(), 3u);
  EXPECT_EQ(error_of([&] { topk_neighbors(a, 4, true); }), Errc::KTooLarge);
  EXPECT_EQ(error_of([&] { topk_neighbors(constant_affinity(1, 1.0), 1); }), Errc::InvalidParam);
}

TEST(TopK, MatchesFullSort) {
  Rng rng = make_rng(10);
  const EmbeddingSet e = hops::testing::random_embeddings(rng, 10, 4);
  const AffinityMatrix a = cosine_affinity(e);
  const NeighborIndex idx = topk_neighbors(a, 4);
  const CandidateMatrix c = hops::testing::random_candidates(rng, 10, 3, 1);
  for (std::size_t i = 0; i < 10; ++i) {
    EXPECT_EQ(idx.lists[i], hops::testing::naive_ldf(i, a.values, c, 4, 0.0, false).neighbors);
  }
}

TEST(Counts, DirectExample) {
  // own {1,2}; two neighbors both {1,3}
  const CandidateMatrix c = rows_of(4, {{1, 2}, {1, 3}, {1, 3}});
  const AffinityMatrix a = constant_affinity(3, 0.5);
  const NeighborIndex idx = topk_neighbors(a, 2);
  const CountVector cv = multiset_counts(0, c, idx, a, LdfConfig{2, 0.4, Voting::Hard});
  EXPECT_EQ(cv.counts, (std::vector<double>{0, 3, 1, 2}));
  EXPECT_EQ(cv.total, 6.0);

  const CountVector soft = multiset_counts(0, c, idx, a, LdfConfig{2, 0.4, Voting::Soft});
  EXPECT_DOUBLE_EQ(soft.counts[1], 2.0);
  EXPECT_DOUBLE_EQ(soft.counts[3], 1.0);
  EXPECT_DOUBLE_EQ(soft.total, 4.0);
}

TEST(Counts, NoNeighborsGivesOwnIndicator) {
  const CandidateMatrix c = rows_of(3, {{0, 2}, {1}});
  NeighborIndex none{0, {{}, {}}};
  const CountVector cv = multiset_counts(0, c, none, constant_affinity(2, 0.0), LdfConfig{});
  EXPECT_EQ(cv.counts, (std::vector<double>{1, 0, 1}));
}

TEST(Frequency, Arithmetic) {
  const auto f = label_frequency(CountVector{{3, 1, 2}, 6});
  EXPECT_DOUBLE_EQ(f[0], 0.5);
  EXPECT_DOUBLE_EQ(f[1], 1.0 / 6.0);
  EXPECT_DOUBLE_EQ(f[2], 1.0 / 3.0);
  EXPECT_EQ(label_frequency(CountVector{{0, 4}, 4}), (std::vector<double>{0, 1}));
  EXPECT_EQ(error_of([] { label_frequency(CountVector{{0, 0}, 0}); }), Errc::EmptyMultiset);
}

TEST(Refine, ThresholdAndFallback) {
  const std::vector<double> f{0.5, 1.0 / 6.0, 1.0 / 3.0};
  const std::vector<std::uint8_t> s01{1, 1, 0}, all{1, 1, 1};
  RefinedSet r = refine_candidates(f, s01, 0.4);
  EXPECT_EQ(r.labels, (std::vector<ClassId>{0}));
  EXPECT_FALSE(r.fallback);
  r = refine_candidates(f, all, 0.0);
  EXPECT_EQ(r.labels, (std::vector<ClassId>{0, 1, 2}));
  r = refine_candidates(f, all, 1.0);
  EXPECT_EQ(r.labels, (std::vector<ClassId>{0, 1, 2}));
  EXPECT_TRUE(r.fallback);
  // inclusive comparison
  r = refine_candidates(f, all, 0.5);
  EXPECT_EQ(r.labels, (std::vector<ClassId>{0}));
}

TEST(Refine, MonotoneInTau) {
  Rng rng = make_rng(2);
  for (int t = 0; t < 50; ++t) {
    const Matrix p = hops::testing::random_probs(rng, 1, 8);
    const CandidateMatrix s = hops::testing::random_candidates(rng, 1, 8, 5);
    std::size_t prev = 9;
    for (double tau = 0.0; tau <= 0.5; tau += 0.05) {
      const RefinedSet r = refine_candidates(p.row(0), s.row(0), tau);
      if (r.fallback) break;
      EXPECT_LE(r.labels.size(), prev);
      prev = r.labels.size();
      for (ClassId c : r.labels) EXPECT_TRUE(s.contains(0, c));
    }
  }
}

TEST(SelectLocal, ArgmaxWithTies) {
  const std::vector<double> peaked{0.1, 0.1, 0.1, 0.1, 0.1, 0.5};
  const std::vector<ClassId> two{2, 5}, single{4}, far{3, 7};
  EXPECT_EQ(select_local(two, peaked), 5u);
  EXPECT_EQ(select_local(single, peaked), 4u);
  const std::vector<double> uniform(8, 0.125);
  EXPECT_EQ(select_local(far, uniform), 3u);
  // strictly increasing transform
  std::vector<double> cubed = peaked;
  for (double& v : cubed) v = v * v * v + 1.0;
  EXPECT_EQ(select_local(two, cubed), 5u);
}

TEST(LocalFilter, NoiseFreeMixtureRecoversGroundTruth) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    SynthParams p;
    p.noise = 0.0;
    p.seed = seed;
    const DatasetBundle b = synth_gaussian_mixture(p);
    const CandidateMatrix c = corrupt_rand(*b.labels, p.classes, 2, seed);
    const LocalFilter f(b.embeddings, c, LdfConfig{5, 0.4, Voting::Hard});
    const std::vector<double> uniform(p.classes, 1.0 / p.classes);
    for (std::size_t i = 0; i < b.n(); ++i) EXPECT_EQ(f.select(i, uniform), (*b.labels)[i]) << "row " << i;
  }
}

TEST(LocalFilter, MatchesNaiveOracle) {
  Rng rng = make_rng(31);
  const EmbeddingSet e = hops::testing::random_embeddings(rng, 40, 6);
  const CandidateMatrix c = hops::testing::random_candidates(rng, 40, 7, 3);
  const AffinityMatrix a = cosine_affinity(e);
  for (Voting v : {Voting::Hard, Voting::Soft}) {
    const LdfConfig cfg{6, 0.3, v};
    const LocalFilter f(e, c, cfg);
    for (std::size_t i = 0; i < 40; ++i) {
      const auto naive = hops::testing::naive_ldf(i, a.values, c, 6, 0.3, v == Voting::Soft);
      EXPECT_EQ(f.refined(i).labels, naive.refined);
      EXPECT_EQ(f.refined(i).fallback, naive.fallback);
    }
  }
}

TEST(Config, ValidateAndParse) {
  EXPECT_EQ(error_of([] { LdfConfig{0, 0.4, Voting::Hard}.validate(); }), Errc::ConfigInvalid);
  EXPECT_EQ(error_of([] { LdfConfig{5, 1.5, Voting::Hard}.validate(); }), Errc::ConfigInvalid);
  EXPECT_EQ(parse_voting("soft"), Voting::Soft);
  EXPECT_THROW(parse_voting("loud"), Error);
}

TEST(Json, NeighborDump) {
  const NeighborIndex idx = topk_neighbors(constant_affinity(3, 0.2), 2);
  const nlohmann::json j = to_json(idx);
  EXPECT_EQ(j.at("k"), 2);
  EXPECT_EQ(j.at("neighbors"), nlohmann::json::parse("[[1,2],[0,2],[0,1]]"));
}

}  // namespace
}  // namespace hops::ldf
