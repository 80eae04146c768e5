// Copyright 2026 The mobgroups Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "mobgroups/clustering.hpp"

#include <gtest/gtest.h>

#include <numeric>
#include <random>

#include "mobgroups/distances.hpp"
#include "mobgroups/group_analysis.hpp"
#include "mobgroups/synth.hpp"
#include "test_support.hpp"

namespace mobgroups {
namespace {

Eigen::MatrixXd random_distances(std::mt19937_64& eng, Eigen::Index n) {
  std::uniform_real_distribution<double> u(0.01, 1.0);
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) d(i, j) = d(j, i) = u(eng);
  return d;
}

// Two blobs on a line: points 0..4 near 0, points 5..9 near 10.
Eigen::MatrixXd two_blobs() {
  std::vector<double> x{0.0, 0.1, 0.2, 0.15, 0.05, 10.0, 10.1, 10.3, 10.2, 9.9};
  Eigen::MatrixXd d(10, 10);
  for (int i = 0; i < 10; ++i)
    for (int j = 0; j < 10; ++j) d(i, j) = std::abs(x[static_cast<std::size_t>(i)] - x[static_cast<std::size_t>(j)]);
  return d;
}

TEST(Agglomerate, TargetNKeepsSingletons) {
  std::mt19937_64 eng(1);
  auto p = agglomerate(random_distances(eng, 7), StopRule::with_count(7));
  EXPECT_EQ(p.cluster_count(), 7u);
  EXPECT_TRUE(p.merge_history.empty());
}

TEST(Agglomerate, TwoBlobsAtThreshold) {
  auto p = agglomerate(two_blobs(), StopRule::at_threshold(1.0));
  ASSERT_EQ(p.cluster_count(), 2u);
  for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(p.assignment[i], i < 5 ? 0u : 1u);
  auto cdfs = distance_cdfs(p, two_blobs());
  EXPECT_LT(cdfs.intra.back(), cdfs.inter.front());
  EXPECT_EQ(cdfs.intra.size() + cdfs.inter.size(), 45u);
}

TEST(Agglomerate, LargeThresholdGivesOneCluster) {
  auto d = two_blobs();
  auto p = agglomerate(d, StopRule::at_threshold(d.maxCoeff()));
  EXPECT_EQ(p.cluster_count(), 1u);
  EXPECT_TRUE(distance_cdfs(p, d).inter.empty());
}

TEST(Agglomerate, SingletonsHaveNoIntraPairs) {
  auto d = two_blobs();
  auto p = agglomerate(d, StopRule::with_count(10));
  EXPECT_TRUE(distance_cdfs(p, d).intra.empty());
}

TEST(Agglomerate, RejectsBadInput) {
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(3, 3);
  EXPECT_THROW(agglomerate(d, StopRule::with_count(0)), Error);
  EXPECT_THROW(agglomerate(d, StopRule::with_count(4)), Error);
  EXPECT_THROW(agglomerate(d, StopRule::at_threshold(0.0)), Error);
  d(0, 1) = 1.0;
  EXPECT_THROW(agglomerate(d, StopRule::with_count(1)), Error);
  EXPECT_THROW(agglomerate(Eigen::MatrixXd::Zero(2, 3), StopRule::with_count(1)), Error);
}

TEST(Agglomerate, TiesGoToSmallestIdPair) {
  // all pairs equidistant: merges proceed (0,1), (0,2), (0,3)
  Eigen::MatrixXd d = Eigen::MatrixXd::Ones(4, 4) - Eigen::MatrixXd::Identity(4, 4);
  auto p = agglomerate(d, StopRule::with_count(1));
  ASSERT_EQ(p.merge_history.size(), 3u);
  EXPECT_EQ(p.merge_history[0].a, 0u);
  EXPECT_EQ(p.merge_history[0].b, 1u);
  EXPECT_EQ(p.merge_history[1].b, 2u);
  EXPECT_EQ(p.merge_history[2].b, 3u);
}

TEST(AgglomerateProperty, MatchesNaiveOracle) {
  std::mt19937_64 eng(42);
  for (int trial = 0; trial < 40; ++trial) {
    const auto n = static_cast<Eigen::Index>(2 + trial % 49);
    const auto d = random_distances(eng, n);
    const auto target = static_cast<std::size_t>(1 + trial % static_cast<int>(n));
    const auto p = agglomerate(d, StopRule::with_count(target));
    const auto [labels, merges] = testing::naive_upgma(d, target);
    EXPECT_EQ(p.assignment, canonical_labels(labels));
    ASSERT_EQ(p.merge_history.size(), merges.size());
    for (std::size_t s = 0; s < merges.size(); ++s) {
      EXPECT_EQ(p.merge_history[s].a, merges[s].a);
      EXPECT_EQ(p.merge_history[s].b, merges[s].b);
      EXPECT_NEAR(p.merge_history[s].distance, merges[s].distance, 1e-12);
    }
  }
}

TEST(AgglomerateProperty, MonotoneMerges) {
  std::mt19937_64 eng(7);
  for (int trial = 0; trial < 30; ++trial) {
    auto p = agglomerate(random_distances(eng, 60), StopRule::with_count(1));
    for (std::size_t s = 1; s < p.merge_history.size(); ++s)
      EXPECT_GE(p.merge_history[s].distance, p.merge_history[s - 1].distance - 1e-12);
  }
}

TEST(AgglomerateProperty, InvariantToElementOrder) {
  std::mt19937_64 eng(9);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index n = 30;
    auto d = random_distances(eng, n);
    std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), eng);
    Eigen::MatrixXd dp(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) dp(i, j) = d(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
    auto a = agglomerate(d, StopRule::with_count(6));
    auto b = agglomerate(dp, StopRule::with_count(6));
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) {
        const bool same_a = a.assignment[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])] ==
                            a.assignment[static_cast<std::size_t>(perm[static_cast<std::size_t>(j)])];
        const bool same_b = b.assignment[static_cast<std::size_t>(i)] == b.assignment[static_cast<std::size_t>(j)];
        EXPECT_EQ(same_a, same_b);
      }
  }
}

TEST(AgglomerateProperty, CountStopEqualsThresholdAtLastMergeDistance) {
  std::mt19937_64 eng(13);
  for (int trial = 0; trial < 20; ++trial) {
    auto d = random_distances(eng, 40);
    auto byc = agglomerate(d, StopRule::with_count(static_cast<std::size_t>(3 + trial)));
    auto byt = agglomerate(d, StopRule::at_threshold(byc.merge_history.back().distance));
    EXPECT_EQ(byc.assignment, byt.assignment);
  }
}

TEST(ClusterPopulation, PlantedGroupsRecovered) {
  auto spec = testing::planted_groups_spec(5, 20, 40, 0.05, 77);
  auto tr = generate(spec);
  TraceConfig cfg;
  cfg.trace_end = tr.trace_end;
  auto set = build_matrices(tr.records, cfg);
  auto dm = eigen_distance_matrix(set.users);
  auto p = cluster_population(dm, StopRule::with_count(5));
  EXPECT_EQ(p.cluster_count(), 5u);
  std::vector<std::size_t> truth;
  for (const auto& [_, g] : tr.truth) truth.push_back(static_cast<std::size_t>(g));
  EXPECT_GE(jaccard(p, partition_from_labels(p.elements, truth)), 0.9);
}

TEST(ClusterPopulation, SingleGroupTargetOne) {
  auto spec = testing::planted_groups_spec(1, 8, 20, 0.05, 1);
  auto tr = generate(spec);
  TraceConfig cfg;
  cfg.trace_end = tr.trace_end;
  auto set = build_matrices(tr.records, cfg);
  auto p = cluster_population(eigen_distance_matrix(set.users), StopRule::with_count(1));
  EXPECT_EQ(p.sizes(), (std::vector<std::size_t>{8}));
}

TEST(Persistence, PartitionAndMerges) {
  auto p = agglomerate(two_blobs(), StopRule::with_count(2), {"a", "b", "c", "d", "e", "f", "g", "h", "i", "j"});
  const auto csv = partition_to_csv(p);
  EXPECT_EQ(csv.substr(0, 26), "element,cluster\na,0\nb,0\nc,");
  EXPECT_EQ(merges_to_csv(p).substr(0, 19), "step,a,b,distance\n0");
  const auto path = ::testing::TempDir() + "/partition.csv";
  detail::write_text(path, csv);
  auto back = load_partition(path);
  EXPECT_EQ(back.elements, p.elements);
  EXPECT_EQ(back.assignment, p.assignment);
}

}  // namespace
}  // namespace mobgroups
