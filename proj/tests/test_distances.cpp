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

#include "mobgroups/distances.hpp"

#include <gtest/gtest.h>

#include <chrono>
#include <random>

#include "test_support.hpp"

namespace mobgroups {
namespace {

using testing::unit;

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

EigenBehaviorSet make_set(std::vector<Eigen::VectorXd> vs, std::vector<double> ws) {
  EigenBehaviorSet s;
  s.vectors = std::move(vs);
  s.weights = std::move(ws);
  return s;
}

TEST(Manhattan, Cases) {
  EXPECT_EQ(manhattan(vec({0.3, 0.7}), vec({0.3, 0.7})), 0.0);
  EXPECT_EQ(manhattan(unit(3, 0), unit(3, 1)), 2.0);
  EXPECT_DOUBLE_EQ(manhattan(vec({0.75, 0.25}), vec({0.25, 0.75})), 1.0);
  EXPECT_THROW(manhattan(unit(2, 0), unit(3, 0)), Error);
}

TEST(Amvd, Cases) {
  Eigen::MatrixXd a(2, 2), b(1, 2), c(1, 2);
  a << 1, 0, 0, 1;
  b << 1, 0;
  c << 0, 1;
  EXPECT_EQ(amvd(a, a), 0.0);
  EXPECT_EQ(amvd(b, c), 2.0);
  // nearest-neighbor oracle: e1 -> 0, e2 -> 2
  EXPECT_DOUBLE_EQ(amvd(a, b), testing::brute_amvd(a, b));
  EXPECT_DOUBLE_EQ(amvd(a, b), 1.0);
  EXPECT_DOUBLE_EQ(amvd(b, a), 0.0);
  EXPECT_DOUBLE_EQ(amvd_distance(a, b), 0.5);
  EXPECT_DOUBLE_EQ(amvd_distance(a, a), 0.0);
  EXPECT_THROW(amvd(Eigen::MatrixXd(0, 2), b), Error);
}

TEST(Amvd, OfflineRowPolicy) {
  Eigen::MatrixXd a(3, 2);
  a << 1, 0, 0, 0, 0, 0;
  EXPECT_EQ(amvd_rows(a).rows(), 1);
  EXPECT_EQ(amvd_rows(a, {.include_offline = true}).rows(), 3);
  Eigen::MatrixXd b(2, 2);
  b << 0, 1, 0, 0;
  EXPECT_DOUBLE_EQ(amvd_distance(amvd_rows(a), amvd_rows(b)), 2.0);
  // literal reading: offline rows match each other at distance 0
  EXPECT_LT(amvd_distance(a, b), 2.0);
}

TEST(AmvdProperty, MatchesOracleAndIsSymmetric) {
  std::mt19937_64 eng(2);
  std::vector<AssociationMatrix> users;
  for (int u = 0; u < 12; ++u) users.push_back({"u" + std::to_string(u), testing::random_association_matrix(eng, 15, 5)});
  auto dm = amvd_distance_matrix(users);
  for (std::size_t i = 0; i < users.size(); ++i) {
    const auto ri = amvd_rows(users[i].rows);
    for (std::size_t j = 0; j < users.size(); ++j) {
      const auto rj = amvd_rows(users[j].rows);
      EXPECT_EQ(amvd(ri, rj), testing::brute_amvd(ri, rj));
      EXPECT_EQ(dm(i, j), dm(j, i));
      EXPECT_GE(dm(i, j), 0.0);
      EXPECT_LE(dm(i, j), 2.0);
    }
  }
}

TEST(Sim, Cases) {
  auto e1 = make_set({unit(2, 0)}, {1.0});
  auto e2 = make_set({unit(2, 1)}, {1.0});
  EXPECT_DOUBLE_EQ(sim(e1, e1), 1.0);
  EXPECT_DOUBLE_EQ(sim(e1, e2), 0.0);
  auto mix = make_set({unit(2, 0), unit(2, 1)}, {0.8, 0.2});
  EXPECT_DOUBLE_EQ(sim(mix, e1), 0.8);
  EXPECT_DOUBLE_EQ(sim(mix, e1), sim(e1, mix));
  EXPECT_THROW(sim(e1, make_set({unit(3, 0)}, {1.0})), Error);
}

TEST(NormalizeSims, DividesByRowMax) {
  Eigen::MatrixXd raw(3, 3);
  raw << 9, 0.4, 0.8, 0.4, 9, 0.2, 0.8, 0.2, 9;
  auto n = normalize_sims(raw);
  EXPECT_DOUBLE_EQ(n(0, 1), 0.5);
  EXPECT_DOUBLE_EQ(n(0, 2), 1.0);
  // brute force: each off-diagonal entry over its row's off-diagonal max
  for (int i = 0; i < 3; ++i) {
    double mx = 0;
    for (int j = 0; j < 3; ++j)
      if (j != i) mx = std::max(mx, raw(i, j));
    for (int j = 0; j < 3; ++j) {
      if (j != i) {
        EXPECT_DOUBLE_EQ(n(i, j), raw(i, j) / mx);
      }
    }
  }
  Eigen::MatrixXd flat = Eigen::MatrixXd::Constant(4, 4, 0.3);
  auto f = normalize_sims(flat);
  EXPECT_TRUE(f.isApprox(Eigen::MatrixXd::Ones(4, 4)));
  EXPECT_THROW(normalize_sims(Eigen::MatrixXd::Ones(1, 1)), Error);
  std::vector<std::size_t> zero;
  Eigen::MatrixXd z = Eigen::MatrixXd::Zero(2, 2);
  normalize_sims(z, &zero);
  EXPECT_EQ(zero.size(), 2u);
}

TEST(EigenDistance, Cases) {
  Eigen::MatrixXd n(2, 2);
  n << 1, 1, 1, 1;
  EXPECT_DOUBLE_EQ(eigen_distance(n, 0, 1), 0.0);
  n << 1, 0, 0, 1;
  EXPECT_DOUBLE_EQ(eigen_distance(n, 0, 1), 1.0);
  n << 1, 1.0, 0.5, 1;
  EXPECT_DOUBLE_EQ(eigen_distance(n, 0, 1), 0.25);
  EXPECT_DOUBLE_EQ(eigen_distance(n, 1, 0), 0.25);
  EXPECT_THROW(eigen_distance(n, 0, 2), Error);
}

TEST(EigenDistanceMatrix, OfflineUsersAreFlaggedAtMaximum) {
  std::vector<AssociationMatrix> users{{"a", Eigen::MatrixXd::Identity(2, 2)},
                                       {"b", Eigen::MatrixXd::Identity(2, 2)},
                                       {"c", Eigen::MatrixXd::Zero(2, 2)}};
  auto dm = eigen_distance_matrix(users);
  EXPECT_EQ(dm.flagged, (std::vector<std::string>{"c"}));
  EXPECT_DOUBLE_EQ(dm(0, 2), 1.0);
  EXPECT_DOUBLE_EQ(dm(0, 1), 0.0);
  auto am = amvd_distance_matrix(users);
  EXPECT_DOUBLE_EQ(am(1, 2), 2.0);
}

TEST(RangesProperty, RandomInputsStayInRange) {
  std::mt19937_64 eng(4);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 2000; ++trial) {
    Eigen::VectorXd a(6), b(6);
    for (int k = 0; k < 6; ++k) {
      a(k) = u(eng) < 0.5 ? u(eng) : 0;
      b(k) = u(eng) < 0.5 ? u(eng) : 0;
    }
    a(trial % 6) += 0.01;
    b((trial + 1) % 6) += 0.01;
    a /= a.sum();
    b /= b.sum();
    const double d = manhattan(a, b);
    EXPECT_GE(d, 0.0);
    EXPECT_LE(d, 2.0 + 1e-12);
  }
  std::vector<std::optional<EigenBehaviorSet>> sets;
  std::vector<std::string> ids;
  for (int k = 0; k < 40; ++k) {
    sets.emplace_back(eigen_behaviors(testing::random_association_matrix(eng, 10, 6, 0.0)));
    ids.push_back(std::to_string(k));
  }
  auto t = sim_table(ids, sets);
  for (int i = 0; i < 40; ++i)
    for (int j = 0; j < 40; ++j) {
      EXPECT_GE(t.raw(i, j), 0.0);
      EXPECT_LE(t.raw(i, j), 1.0 + 1e-12);
      EXPECT_NEAR(t.raw(i, j), t.raw(j, i), 1e-15);
      EXPECT_NEAR(t.raw(i, j), sim(*sets[static_cast<std::size_t>(i)], *sets[static_cast<std::size_t>(j)]), 1e-12);
      const double d = eigen_distance(t.normalized, static_cast<std::size_t>(i), static_cast<std::size_t>(j));
      EXPECT_GE(d, 0.0);
      EXPECT_LE(d, 1.0);
    }
}

TEST(SummaryL1Distance, Cases) {
  std::vector<AssociationMatrix> same{{"a", Eigen::MatrixXd::Identity(3, 3)}, {"b", Eigen::MatrixXd::Identity(3, 3)}};
  for (auto kind : {SummaryKind::onavg, SummaryKind::centroid_05, SummaryKind::centroid_09})
    EXPECT_EQ(summary_l1_distance(same, kind)(0, 1), 0.0);
  Eigen::MatrixXd x0 = Eigen::MatrixXd::Zero(2, 2), x1 = Eigen::MatrixXd::Zero(2, 2);
  x0.col(0).setOnes();
  x1.col(1).setOnes();
  std::vector<AssociationMatrix> disjoint{{"a", x0}, {"b", x1}, {"z", Eigen::MatrixXd::Zero(2, 2)}};
  auto dm = summary_l1_distance(disjoint, SummaryKind::onavg);
  EXPECT_EQ(dm.size(), 2u);
  EXPECT_EQ(dm.flagged, (std::vector<std::string>{"z"}));
  EXPECT_DOUBLE_EQ(dm(0, 1), 2.0);
}

TEST(SummaryL1Distance, MatchesElementwiseOracle) {
  std::mt19937_64 eng(8);
  std::vector<AssociationMatrix> users;
  for (int u = 0; u < 5; ++u) users.push_back({std::to_string(u), testing::random_association_matrix(eng, 12, 4, 0.1)});
  auto dm = summary_l1_distance(users, SummaryKind::centroid_05);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 5; ++j) {
      const Eigen::VectorXd a = centroid_first_mode(users[i].rows, 0.5), b = centroid_first_mode(users[j].rows, 0.5);
      double d = 0;
      for (Eigen::Index k = 0; k < a.size(); ++k) d += std::abs(a(k) - b(k));
      EXPECT_NEAR(dm(i, j), d, 1e-12);
    }
}

// The eigen-behavior route touches k^2 inner products per pair instead of
// t^2 row distances; at N=200, t=60, k=5 it must be at least 10x faster
// end to end (including the SVDs).
TEST(Complexity, EigenDistanceBeatsAmvdTenfold) {
  std::mt19937_64 eng(12);
  std::vector<AssociationMatrix> users;
  for (int u = 0; u < 200; ++u) users.push_back({std::to_string(u), testing::random_association_matrix(eng, 60, 30, 0.1)});
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  std::vector<std::optional<EigenBehaviorSet>> sets;
  std::vector<std::string> ids;
  for (const auto& u : users) {
    auto s = eigen_behaviors(u.rows);
    s.vectors.resize(std::min<std::size_t>(5, s.size()));
    s.weights.resize(s.vectors.size());
    sets.emplace_back(std::move(s));
    ids.push_back(u.user_id);
  }
  auto eig = eigen_distance_matrix(sim_table(ids, sets), sets);
  const auto t1 = clock::now();
  auto am = amvd_distance_matrix(users);
  const auto t2 = clock::now();
  const double eigen_s = std::chrono::duration<double>(t1 - t0).count();
  const double amvd_s = std::chrono::duration<double>(t2 - t1).count();
  RecordProperty("speedup", std::to_string(amvd_s / eigen_s));
  EXPECT_GE(amvd_s, 10.0 * eigen_s) << "eigen " << eigen_s << "s, amvd " << amvd_s << "s";
  EXPECT_EQ(eig.size(), am.size());
}

TEST(Persistence, UpperTriangleCsv) {
  DistanceMatrix dm;
  dm.users = {"a", "b", "c"};
  dm.values = Eigen::MatrixXd::Zero(3, 3);
  dm.values(0, 1) = dm.values(1, 0) = 0.5;
  const auto csv = distance_matrix_to_csv(dm);
  EXPECT_EQ(csv, "a,b,distance\na,b,0.5\na,c,0\nb,c,0\n");
  EXPECT_EQ(distance_matrix_sidecar(dm, {{"power_floor", 0.001}})["metric"], "eigen");
}

}  // namespace
}  // namespace mobgroups
