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

#include "mobgroups/group_analysis.hpp"

#include <gtest/gtest.h>

#include <random>

#include "mobgroups/distances.hpp"
#include "mobgroups/synth.hpp"
#include "test_support.hpp"

namespace mobgroups {
namespace {

MatrixSet matrices(const SynthSpec& spec, SynthTrace* trace = nullptr) {
  auto tr = generate(spec);
  TraceConfig cfg;
  cfg.trace_start = tr.trace_start;
  cfg.trace_end = tr.trace_end;
  LocationIndex idx;
  for (int k = 0; k < spec.n_locations; ++k) idx.push_back(synth_location_id(k));
  auto set = build_matrices(tr.records, cfg, idx);
  if (trace) *trace = std::move(tr);
  return set;
}

Partition truth_partition(const SynthTrace& tr) {
  std::vector<std::string> ids;
  std::vector<std::size_t> labels;
  for (const auto& [u, g] : tr.truth) {
    ids.push_back(u);
    labels.push_back(static_cast<std::size_t>(g));
  }
  return partition_from_labels(ids, labels);
}

Partition sized_partition(const std::vector<std::size_t>& sizes) {
  std::vector<std::string> ids;
  std::vector<std::size_t> labels;
  for (std::size_t c = 0; c < sizes.size(); ++c)
    for (std::size_t k = 0; k < sizes[c]; ++k) {
      ids.push_back("e" + std::to_string(ids.size()));
      labels.push_back(c);
    }
  return partition_from_labels(ids, labels);
}

TEST(JointMatrix, SingleMemberIsIdentity) {
  AssociationMatrix m{"u", Eigen::MatrixXd::Identity(3, 3)};
  EXPECT_EQ(joint_matrix(std::span<const AssociationMatrix>(&m, 1)), m.rows);
}

TEST(JointMatrix, IdenticalRankOneMembers) {
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(4, 3);
  x.col(1).setOnes();
  std::vector<AssociationMatrix> ms{{"c", x}, {"a", x}, {"b", x}};
  auto j = joint_matrix(ms);
  EXPECT_EQ(j.rows(), 12);
  EXPECT_NEAR(power_captured(j, 1), 1.0, 1e-12);
  auto g = group_profile(0, {&ms[0], &ms[1], &ms[2]});
  ASSERT_EQ(g.eigen.size(), 1u);
  EXPECT_TRUE(g.eigen.vectors[0].isApprox(testing::unit(3, 1)));
  EXPECT_DOUBLE_EQ(g.eigen.weights[0], 1.0);
}

TEST(JointMatrix, StacksInUserIdOrder) {
  std::vector<AssociationMatrix> ms{{"b", Eigen::MatrixXd::Constant(1, 2, 2.0)}, {"a", Eigen::MatrixXd::Constant(1, 2, 1.0)}};
  auto j = joint_matrix(ms);
  EXPECT_EQ(j(0, 0), 1.0);
  EXPECT_EQ(j(1, 0), 2.0);
  ms.push_back({"c", Eigen::MatrixXd::Zero(2, 2)});
  EXPECT_THROW(joint_matrix(ms), Error);
}

TEST(JointMatrix, SameGroupMembersAreMoreCoherentThanRandomUsers) {
  SynthTrace tr;
  auto set = matrices(testing::planted_groups_spec(5, 6, 30, 0.05, 3), &tr);
  std::vector<const AssociationMatrix*> same{&set.users[0], &set.users[1], &set.users[2]};
  std::vector<const AssociationMatrix*> mixed{&set.users[0], &set.users[8], &set.users[20]};
  EXPECT_GT(power_captured(joint_matrix(same), 4), power_captured(joint_matrix(mixed), 4));
}

TEST(GroupPowerScatter, PlantedGroupsAboveDiagonal) {
  SynthTrace tr;
  auto set = matrices(testing::planted_groups_spec(5, 20, 30, 0.05, 5), &tr);
  auto pts = group_power_scatter(set, truth_partition(tr), 5, 99);
  ASSERT_EQ(pts.size(), 5u);
  for (const auto& p : pts) EXPECT_GT(p.coherent, p.random);
}

TEST(GroupPowerScatter, RandomPartitionOfHomogeneousPopulationIsNearDiagonal) {
  SynthTrace tr;
  auto spec = testing::planted_groups_spec(1, 120, 30, 0.1, 6);
  auto set = matrices(spec, &tr);
  std::vector<std::string> ids;
  std::vector<std::size_t> labels;
  for (std::size_t i = 0; i < tr.truth.size(); ++i) {
    ids.push_back(tr.truth[i].first);
    labels.push_back(i % 10);
  }
  auto pts = group_power_scatter(set, partition_from_labels(ids, labels), 5, 1);
  ASSERT_EQ(pts.size(), 10u);
  double mean_gap = 0.0;
  for (const auto& p : pts) mean_gap += (p.coherent - p.random) / 10.0;
  EXPECT_LT(std::abs(mean_gap), 0.02);
}

TEST(GroupPowerScatter, SingleLocationPopulationIsDegenerate) {
  SynthSpec s;
  s.n_locations = 1;
  s.n_days = 5;
  GroupSpec g;
  g.size = 12;
  g.p_online = 0.7;
  g.modes.push_back(sparse_mode(1, {{0, 1.0}}));
  s.groups.push_back(g);
  SynthTrace tr;
  auto set = matrices(s, &tr);
  for (const auto& p : group_power_scatter(set, truth_partition(tr), 5, 2)) {
    EXPECT_DOUBLE_EQ(p.coherent, 1.0);
    EXPECT_DOUBLE_EQ(p.random, 1.0);
  }
}

TEST(GroupPowerScatter, OnlyClustersLargerThanMinSize) {
  SynthTrace tr;
  auto spec = testing::planted_groups_spec(2, 5, 10, 0.0, 1);
  spec.groups[1].size = 6;
  auto set = matrices(spec, &tr);
  auto pts = group_power_scatter(set, truth_partition(tr), 5, 3);
  ASSERT_EQ(pts.size(), 1u);
  EXPECT_EQ(pts[0].members, 6u);
}

TEST(CrossSignificance, OrthogonalNoiselessGroups) {
  SynthSpec s;
  s.n_locations = 3;
  s.n_days = 20;
  for (int g = 0; g < 3; ++g) {
    GroupSpec gs;
    gs.size = 4;
    gs.p_online = 0.9;
    gs.modes.push_back(sparse_mode(3, {{g, 1.0}}));
    s.groups.push_back(gs);
  }
  SynthTrace tr;
  auto set = matrices(s, &tr);
  auto cs = cross_significance(set, truth_partition(tr));
  EXPECT_NEAR(cs.own, 1.0, 1e-12);
  EXPECT_NEAR(cs.other, 0.0, 1e-12);
}

TEST(CrossSignificance, NoisyPlantedGroupsSeparate) {
  SynthTrace tr;
  auto set = matrices(testing::planted_groups_spec(5, 20, 30, 0.05, 11), &tr);
  auto cs = cross_significance(set, truth_partition(tr));
  EXPECT_GE(cs.own - cs.other, 0.5);
  for (const auto& [own, other] : cs.per_cluster) EXPECT_GT(own, other);
}

TEST(RankSizeFit, PlantedExponent) {
  std::vector<std::size_t> sizes;
  for (int r = 1; r <= 200; ++r) sizes.push_back(static_cast<std::size_t>(std::lround(1000.0 * std::pow(r, -0.75))));
  EXPECT_NEAR(rank_size_fit(sized_partition(sizes), 5), -0.75, 0.05);
}

TEST(RankSizeFit, EqualSizesGiveZeroSlope) {
  EXPECT_NEAR(rank_size_slope(std::vector<std::size_t>(20, 7), 5), 0.0, 1e-12);
}

TEST(RankSizeFit, TooFewClusters) {
  EXPECT_THROW(rank_size_slope({100, 50, 3, 2}, 5), Error);
}

TEST(RankSizeFitProperty, RecoversExponentsAcrossFiveToThousand) {
  for (double target : {-0.5, -0.75, -1.0, -1.15}) {
    // 100 clusters, largest 1000; exponent chosen per case
    std::vector<std::size_t> sizes;
    for (int r = 1; r <= 100; ++r)
      sizes.push_back(std::max<std::size_t>(5, static_cast<std::size_t>(std::lround(1000.0 * std::pow(r, target)))));
    EXPECT_NEAR(rank_size_slope(sizes, 5), target, 0.05) << target;
  }
}

TEST(Jaccard, IdentityAndExtremes) {
  auto p = sized_partition({3, 2, 1});
  EXPECT_DOUBLE_EQ(jaccard(p, p), 1.0);
  auto singletons = partition_from_labels({"a", "b", "c"}, {0, 1, 2});
  auto one = partition_from_labels({"a", "b", "c"}, {0, 0, 0});
  EXPECT_DOUBLE_EQ(jaccard(singletons, one), 0.0);
  EXPECT_DOUBLE_EQ(jaccard(singletons, singletons), 1.0);  // r+u+v = 0
}

TEST(Jaccard, SixElementExample) {
  std::vector<std::string> ids{"1", "2", "3", "4", "5", "6"};
  std::vector<std::size_t> p{0, 0, 0, 1, 1, 1}, q{0, 0, 1, 1, 1, 1};
  const double oracle = testing::brute_jaccard(p, q);
  EXPECT_DOUBLE_EQ(oracle, 4.0 / 9.0);
  EXPECT_DOUBLE_EQ(jaccard(partition_from_labels(ids, p), partition_from_labels(ids, q)), oracle);
}

TEST(Jaccard, ElementOrderDoesNotMatter) {
  auto a = partition_from_labels({"x", "y", "z"}, {0, 0, 1});
  auto b = partition_from_labels({"z", "x", "y"}, {5, 2, 2});
  EXPECT_DOUBLE_EQ(jaccard(a, b), 1.0);
}

TEST(Jaccard, MismatchedElements) {
  auto a = partition_from_labels({"x", "y"}, {0, 0});
  EXPECT_THROW(jaccard(a, partition_from_labels({"x", "w"}, {0, 0})), Error);
  EXPECT_THROW(jaccard(a, partition_from_labels({"x"}, {0})), Error);
}

TEST(JaccardProperty, MatchesPairOracle) {
  std::mt19937_64 eng(21);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t n = 2 + static_cast<std::size_t>(trial) % 99;
    std::uniform_int_distribution<std::size_t> ka(0, 1 + trial % 12), kb(0, 1 + trial % 7);
    std::vector<std::string> ids;
    std::vector<std::size_t> p, q;
    for (std::size_t i = 0; i < n; ++i) {
      ids.push_back(std::to_string(i));
      p.push_back(ka(eng));
      q.push_back(kb(eng));
    }
    EXPECT_DOUBLE_EQ(jaccard(partition_from_labels(ids, p), partition_from_labels(ids, q)), testing::brute_jaccard(p, q));
  }
}

TEST(TopGroupsShare, Cases) {
  EXPECT_DOUBLE_EQ(top_groups_share(sized_partition({40}), 10), 1.0);
  EXPECT_DOUBLE_EQ(top_groups_share(sized_partition(std::vector<std::size_t>(200, 5)), 10), 0.05);
  std::vector<std::size_t> sizes;
  for (int r = 1; r <= 200; ++r) sizes.push_back(static_cast<std::size_t>(std::lround(1000.0 * std::pow(r, -0.75))));
  std::size_t top = 0, all = 0;
  for (std::size_t r = 0; r < sizes.size(); ++r) {
    all += sizes[r];
    if (r < 10) top += sizes[r];
  }
  EXPECT_EQ(top, 3760u);
  EXPECT_EQ(all, 11610u);
  EXPECT_DOUBLE_EQ(top_groups_share(sized_partition(sizes), 10), 3760.0 / 11610.0);
}

TEST(GroupReport, ListsTopLocations) {
  SynthTrace tr;
  auto set = matrices(testing::planted_groups_spec(2, 4, 10, 0.0, 1), &tr);
  auto profiles = group_profiles(set, truth_partition(tr));
  auto rep = group_report(profiles, set.locations);
  ASSERT_EQ(rep.size(), 2u);
  EXPECT_EQ(rep[0]["members"], 4);
  EXPECT_EQ(rep[0]["eigen_behaviors"][0]["top_locations"][0]["location"], "L000");
}

}  // namespace
}  // namespace mobgroups
