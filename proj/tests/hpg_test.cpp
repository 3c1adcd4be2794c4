#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "oracles.hpp"
#include "qhp/episodes.hpp"
#include "qhp/hpg.hpp"

namespace qhp {
namespace {

using testing::circle;
using testing::deg;

HubSet hubs(std::vector<std::size_t> idx) {
  HubSet h;
  h.indices = std::move(idx);
  h.scores.assign(h.indices.size(), 1.0);
  h.eta = static_cast<int>(h.indices.size());
  return h;
}

void expect_row_near(std::span<const double> row, double degrees, double tol = 1e-12) {
  EXPECT_NEAR(row[0], std::cos(deg(degrees)), tol);
  EXPECT_NEAR(row[1], std::sin(deg(degrees)), tol);
}

TEST(ClusterHubPrototypesTest, SingletonClustersReturnTheSeeds) {
  const auto f = circle({0, 90, 200});
  const ClassMask m{{1, 1, 0}};
  const auto p = cluster_hub_prototypes(f, m, {hubs({2}), hubs({0, 1})});
  ASSERT_EQ(p.size(), 3u);
  EXPECT_EQ(p.labels, (std::vector<ClassId>{0, 1, 1}));
  expect_row_near(p.features.row(1), 0);
  expect_row_near(p.features.row(2), 90);
  EXPECT_EQ(p.provenance[1], (Provenance{SeedKind::kHub, 0}));
}

TEST(ClusterHubPrototypesTest, FourAnglesTwoHubs) {
  const auto f = circle({0, 10, 80, 90});
  const ClassMask m{{1, 1, 1, 1}};
  const auto p = cluster_hub_prototypes(f, m, {HubSet{}, hubs({0, 3})});
  ASSERT_EQ(p.size(), 2u);
  expect_row_near(p.features.row(0), 5);
  expect_row_near(p.features.row(1), 85);
}

TEST(ClusterHubPrototypesTest, EmptyHubSetForPresentClassThrows) {
  const auto f = circle({0, 10});
  EXPECT_THROW(cluster_hub_prototypes(f, ClassMask{{0, 1}}, {hubs({0}), HubSet{}}), Error);
}

TEST(ClusterHubPrototypesTest, OneHubPerClassIsTheMaskedMean) {
  SeededRng rng(17, 0);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 6 + rng.below(20), d = 2 + rng.below(6);
    const auto f = testing::random_unit_rows(rng, n, d);
    ClassMask m;
    for (std::size_t i = 0; i < n; ++i) m.labels.push_back(i < 2 ? static_cast<ClassId>(i) : static_cast<ClassId>(rng.below(2)));
    const auto p = cluster_hub_prototypes(f, m, {hubs({m.indices_of(0).back()}), hubs({m.indices_of(1).front()})});
    for (ClassId c = 0; c < 2; ++c) {
      std::vector<double> mean(d, 0.0);
      for (std::size_t i : m.indices_of(c)) {
        for (std::size_t t = 0; t < d; ++t) mean[t] += f(i, t);
      }
      const double norm = FeatureMatrix::norm(mean);
      for (std::size_t t = 0; t < d; ++t) EXPECT_NEAR(p.features(static_cast<std::size_t>(c), t), mean[t] / norm, 1e-12);
    }
  }
}

TEST(ClusterAroundSeedsTest, PrototypesAreUnitAndAssignmentsOptimal) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    EpisodeConfig cfg;
    cfg.points_per_cloud = 64;
    cfg.dim = 8;
    cfg.n_way = 2;
    cfg.modes_per_class = 3;
    cfg.noise = 0.5;
    cfg.seed = seed;
    const Episode e = generate_synthetic_episode(cfg, 0);
    const FlatSupport s = flatten_support(e);
    const auto class_hubs = mine_class_hubs(e, 5, 6);
    std::vector<std::vector<std::size_t>> seeds;
    for (const auto& h : class_hubs) seeds.push_back(h.indices);
    const auto r = cluster_around_seeds(s.features, s.mask, seeds, SeedKind::kHub);
    for (std::size_t p = 0; p < r.prototypes.size(); ++p) {
      EXPECT_NEAR(FeatureMatrix::norm(r.prototypes.features.row(p)), 1.0, 1e-9);
    }
    for (std::size_t i = 0; i < s.features.rows(); ++i) {
      const auto c = static_cast<std::size_t>(s.mask.labels[i]);
      const auto assigned = static_cast<std::size_t>(r.assignment[i]);
      ASSERT_EQ(r.prototypes.labels[assigned], s.mask.labels[i]);
      const double got = dot(s.features.row(i), s.features.row(r.prototypes.provenance[assigned].index));
      for (std::size_t h : seeds[c]) EXPECT_GE(got, dot(s.features.row(i), s.features.row(h)));
    }
  }
}

TEST(FpsPrototypesTest, SingletonClass) {
  const auto f = circle({33, 200});
  const auto p = fps_prototypes(f, ClassMask{{1, 0}}, 1);
  ASSERT_EQ(p.size(), 2u);
  expect_row_near(p.features.row(1), 33);
  EXPECT_EQ(p.provenance[1], (Provenance{SeedKind::kFps, 0}));
}

TEST(FpsPrototypesTest, PicksTheMutuallyFarthestPair) {
  // Positions 0, 1, 10 laid out on the circle at 0, 10, 100 degrees.
  const auto f = circle({0, 10, 100});
  std::vector<std::size_t> members{0, 1, 2};
  auto seeds = fps_seeds(f, members, 2);
  std::sort(seeds.begin(), seeds.end());
  EXPECT_EQ(seeds, (std::vector<std::size_t>{0, 2}));
}

TEST(FpsPrototypesTest, EtaAboveClassSizeUsesEveryPoint) {
  const auto f = circle({0, 40, 80, 180, 220});
  const ClassMask m{{1, 1, 1, 0, 0}};
  const auto p = fps_prototypes(f, m, 10);
  EXPECT_EQ(p.count(1), 3u);
  EXPECT_EQ(p.count(0), 2u);
  for (std::size_t i = 0; i < p.size(); ++i) {
    const auto src = p.provenance[i].index;
    for (std::size_t t = 0; t < 2; ++t) EXPECT_NEAR(p.features(i, t), f(src, t), 1e-12);
  }
  EXPECT_THROW(fps_prototypes(f, m, 0), Error);
}

TEST(FpsPrototypesTest, SeedsInvariantUnderPermutationOfNonSeeds) {
  SeededRng rng(23, 0);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 10 + rng.below(30), d = 2 + rng.below(6);
    const auto f = testing::random_unit_rows(rng, n, d);
    std::vector<std::size_t> members(n);
    std::iota(members.begin(), members.end(), std::size_t{0});
    const int eta = 1 + static_cast<int>(rng.below(5));
    const auto seeds = fps_seeds(f, members, eta);

    // Shuffle only the non-seed positions.
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::vector<std::size_t> free_pos;
    for (std::size_t i = 0; i < n; ++i) {
      if (std::find(seeds.begin(), seeds.end(), i) == seeds.end()) free_pos.push_back(i);
    }
    std::vector<std::size_t> shuffled = free_pos;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    for (std::size_t j = 0; j < free_pos.size(); ++j) perm[free_pos[j]] = shuffled[j];
    std::vector<std::vector<double>> rows(n);
    for (std::size_t i = 0; i < n; ++i) rows[i].assign(f.row(perm[i]).begin(), f.row(perm[i]).end());
    const auto g = FeatureMatrix::from_rows(rows, true);
    EXPECT_EQ(fps_seeds(g, members, eta), seeds) << "trial " << trial;
  }
}

PrototypeSet fixed_set(SeedKind kind, std::size_t per_class, double offset) {
  std::vector<double> angles;
  std::vector<ClassId> labels;
  std::vector<Provenance> prov;
  for (ClassId c = 0; c < 2; ++c) {
    for (std::size_t i = 0; i < per_class; ++i) {
      angles.push_back(offset + 180.0 * c + static_cast<double>(i));
      labels.push_back(c);
      prov.push_back({kind, i});
    }
  }
  return {circle(angles), labels, prov};
}

TEST(MixPrototypesTest, RatioEndpointsAreIdentity) {
  const auto hub = fixed_set(SeedKind::kHub, 4, 0.0);
  const auto fps = fixed_set(SeedKind::kFps, 4, 0.5);
  SeededRng rng(1, 0);
  EXPECT_EQ(mix_prototypes(hub, fps, 1.0, rng), hub);
  EXPECT_EQ(mix_prototypes(hub, fps, 0.0, rng), fps);
}

TEST(MixPrototypesTest, HalfRatioSplitsEveryClass) {
  const auto hub = fixed_set(SeedKind::kHub, 100, 0.0);
  const auto fps = fixed_set(SeedKind::kFps, 100, 0.5);
  SeededRng rng(2, 0);
  const auto mixed = mix_prototypes(hub, fps, 0.5, rng);
  for (ClassId c = 0; c < 2; ++c) {
    std::size_t from_hub = 0, from_fps = 0;
    for (std::size_t i = 0; i < mixed.size(); ++i) {
      if (mixed.labels[i] != c) continue;
      (mixed.provenance[i].kind == SeedKind::kHub ? from_hub : from_fps)++;
    }
    EXPECT_EQ(from_hub, 50u);
    EXPECT_EQ(from_fps, 50u);
  }
}

TEST(MixPrototypesTest, CoverageMismatchThrows) {
  const auto hub = fixed_set(SeedKind::kHub, 4, 0.0);
  const auto fps = fixed_set(SeedKind::kFps, 3, 0.5);
  SeededRng rng(3, 0);
  EXPECT_THROW(mix_prototypes(hub, fps, 0.5, rng), Error);
}

}  // namespace
}  // namespace qhp
