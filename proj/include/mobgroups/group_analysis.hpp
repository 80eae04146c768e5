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

#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "mobgroups/clustering.hpp"
#include "mobgroups/common.hpp"
#include "mobgroups/summaries.hpp"
#include "mobgroups/trace_model.hpp"

namespace mobgroups {

/// Stacks member matrices row-wise in ascending user-id order.
inline Eigen::MatrixXd joint_matrix(std::vector<const AssociationMatrix*> members) {
  if (members.empty()) throw Error("joint_matrix: no members");
  std::sort(members.begin(), members.end(),
            [](const AssociationMatrix* a, const AssociationMatrix* b) { return a->user_id < b->user_id; });
  const auto t = members.front()->rows.rows();
  const auto n = members.front()->rows.cols();
  Eigen::MatrixXd out(t * static_cast<Eigen::Index>(members.size()), n);
  for (std::size_t k = 0; k < members.size(); ++k) {
    if (members[k]->rows.rows() != t || members[k]->rows.cols() != n)
      throw Error("joint_matrix: mismatched dimensions for " + members[k]->user_id);
    out.middleRows(static_cast<Eigen::Index>(k) * t, t) = members[k]->rows;
  }
  return out;
}

inline Eigen::MatrixXd joint_matrix(std::span<const AssociationMatrix> members) {
  std::vector<const AssociationMatrix*> ptrs;
  for (const auto& m : members) ptrs.push_back(&m);
  return joint_matrix(std::move(ptrs));
}

namespace detail {

// Matrices of a partition's elements, looked up by user id.
inline std::vector<const AssociationMatrix*> resolve_members(const MatrixSet& set, const Partition& p) {
  std::vector<const AssociationMatrix*> out;
  for (const auto& e : p.elements) {
    const auto* m = set.find(e);
    if (!m) throw Error("no matrix for user " + e);
    out.push_back(m);
  }
  return out;
}

inline double top_power_or_zero(const Eigen::MatrixXd& x, std::size_t k) {
  if (!(x.cwiseAbs().sum() > 0.0)) return 0.0;
  return power_captured(x, k);
}

}  // namespace detail

struct GroupProfile {
  std::size_t cluster = 0;
  std::size_t members = 0;
  EigenBehaviorSet eigen;
  std::vector<double> cumulative_power;  // top-1 .. top-k
};

inline GroupProfile group_profile(std::size_t cluster, std::vector<const AssociationMatrix*> members,
                                  std::size_t top_k = 4, double power_floor = kDefaultPowerFloor) {
  GroupProfile g;
  g.cluster = cluster;
  g.members = members.size();
  const auto joint = joint_matrix(std::move(members));
  if (joint.cwiseAbs().sum() > 0.0) {
    g.eigen = eigen_behaviors(joint, power_floor);
    for (std::size_t k = 1; k <= top_k; ++k) g.cumulative_power.push_back(power_captured(joint, k));
  }
  return g;
}

inline std::vector<GroupProfile> group_profiles(const MatrixSet& set, const Partition& p, std::size_t top_k = 4,
                                                double power_floor = kDefaultPowerFloor) {
  const auto mats = detail::resolve_members(set, p);
  std::vector<GroupProfile> out;
  const auto clusters = p.clusters();
  for (std::size_t c = 0; c < clusters.size(); ++c) {
    std::vector<const AssociationMatrix*> members;
    for (auto i : clusters[c]) members.push_back(mats[i]);
    out.push_back(group_profile(c, std::move(members), top_k, power_floor));
  }
  return out;
}

struct PowerPoint {
  std::size_t cluster = 0;
  std::size_t members = 0;
  double coherent = 0.0;  // top-k power of the cluster's joint matrix
  double random = 0.0;    // top-k power of a same-size random user sample
};

/// Top-k power of each cluster with more than `min_size` members against a
/// seeded random sample of the same size drawn without replacement from the
/// whole population.
inline std::vector<PowerPoint> group_power_scatter(const MatrixSet& set, const Partition& p, std::size_t min_size,
                                                   std::uint64_t seed, std::size_t top_k = 4) {
  const auto mats = detail::resolve_members(set, p);
  const auto clusters = p.clusters();
  std::vector<PowerPoint> out;
  std::vector<std::size_t> pool(mats.size());
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  for (std::size_t c = 0; c < clusters.size(); ++c) {
    if (clusters[c].size() <= min_size) continue;
    std::vector<const AssociationMatrix*> members;
    for (auto i : clusters[c]) members.push_back(mats[i]);
    PowerPoint pt;
    pt.cluster = c;
    pt.members = members.size();
    pt.coherent = detail::top_power_or_zero(joint_matrix(members), top_k);

    // partial Fisher-Yates on a fresh copy
    std::mt19937_64 eng(detail::mix_seed(seed, c));
    auto draw = pool;
    std::vector<const AssociationMatrix*> sample;
    for (std::size_t k = 0; k < members.size(); ++k) {
      const auto span = draw.size() - k;
      const auto pick = k + static_cast<std::size_t>(detail::unit_uniform(eng) * static_cast<double>(span));
      std::swap(draw[k], draw[std::min(pick, draw.size() - 1)]);
      sample.push_back(mats[draw[k]]);
    }
    pt.random = detail::top_power_or_zero(joint_matrix(sample), top_k);
    out.push_back(pt);
  }
  return out;
}

inline std::string power_scatter_to_csv(const std::vector<PowerPoint>& pts) {
  std::string out = "cluster,members,coherent_power,random_power\n";
  for (const auto& p : pts)
    out += std::to_string(p.cluster) + "," + std::to_string(p.members) + "," + detail::fmt9(p.coherent) + "," +
           detail::fmt9(p.random) + "\n";
  return out;
}

struct CrossSignificance {
  double own = 0.0;    // mean over clusters of mean member SIG
  double other = 0.0;  // mean over clusters of mean non-member SIG
  std::vector<std::pair<double, double>> per_cluster;  // (own, other), NaN when undefined
  std::vector<std::size_t> clusters;                   // cluster ids of per_cluster entries
};

/// Significance of each cluster's first group eigen-behavior vector for its
/// own members versus everybody else. All-offline users are skipped.
inline CrossSignificance cross_significance(const MatrixSet& set, const Partition& p, std::size_t min_size = 1) {
  const auto mats = detail::resolve_members(set, p);
  const auto clusters = p.clusters();
  CrossSignificance cs;
  std::size_t own_n = 0, other_n = 0;
  for (std::size_t c = 0; c < clusters.size(); ++c) {
    if (clusters[c].size() < min_size) continue;
    std::vector<const AssociationMatrix*> members;
    for (auto i : clusters[c]) members.push_back(mats[i]);
    const auto joint = joint_matrix(members);
    if (!(joint.cwiseAbs().sum() > 0.0)) continue;
    const Eigen::VectorXd y = eigen_behaviors(joint).vectors.front();
    double own = 0.0, other = 0.0;
    std::size_t no = 0, nx = 0;
    for (std::size_t i = 0; i < mats.size(); ++i) {
      if (is_offline(*mats[i])) continue;
      const double s = significance(mats[i]->rows, y);
      if (p.assignment[i] == c) {
        own += s;
        ++no;
      } else {
        other += s;
        ++nx;
      }
    }
    const double nan = std::numeric_limits<double>::quiet_NaN();
    const double own_mean = no ? own / static_cast<double>(no) : nan;
    const double other_mean = nx ? other / static_cast<double>(nx) : nan;
    cs.per_cluster.emplace_back(own_mean, other_mean);
    cs.clusters.push_back(c);
    if (no) {
      cs.own += own_mean;
      ++own_n;
    }
    if (nx) {
      cs.other += other_mean;
      ++other_n;
    }
  }
  if (own_n) cs.own /= static_cast<double>(own_n);
  if (other_n) cs.other /= static_cast<double>(other_n);
  return cs;
}

/// Least-squares slope of log(size) against log(rank) over clusters with at
/// least `min_size` members (rank 1 = largest).
inline double rank_size_slope(std::vector<std::size_t> sizes, std::size_t min_size) {
  std::erase_if(sizes, [&](std::size_t s) { return s < min_size || s == 0; });
  if (sizes.size() < 3) throw Error("rank_size_fit: fewer than 3 clusters of size >= min_size");
  std::sort(sizes.begin(), sizes.end(), std::greater<>());
  const double n = static_cast<double>(sizes.size());
  double sx = 0, sy = 0;
  for (std::size_t r = 0; r < sizes.size(); ++r) {
    sx += std::log(static_cast<double>(r + 1));
    sy += std::log(static_cast<double>(sizes[r]));
  }
  const double mx = sx / n, my = sy / n;
  double sxy = 0, sxx = 0;
  for (std::size_t r = 0; r < sizes.size(); ++r) {
    const double dx = std::log(static_cast<double>(r + 1)) - mx;
    sxy += dx * (std::log(static_cast<double>(sizes[r])) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

inline double rank_size_fit(const Partition& p, std::size_t min_size = 5) { return rank_size_slope(p.sizes(), min_size); }

/// Jaccard index r / (r + u + v) over element pairs, via cluster contingency
/// counts. 1 when neither partition has a co-clustered pair.
inline double jaccard(const Partition& a, const Partition& b) {
  if (a.size() != b.size()) throw Error("jaccard: element sets differ");
  std::map<std::string, std::size_t> pos;
  for (std::size_t i = 0; i < b.size(); ++i) pos.emplace(b.elements[i], i);
  if (pos.size() != b.size()) throw Error("jaccard: duplicate element");
  auto pairs = [](std::uint64_t k) { return k * (k - 1) / 2; };
  std::map<std::pair<std::size_t, std::size_t>, std::uint64_t> joint;
  std::vector<std::uint64_t> ca(a.cluster_count(), 0), cb(b.cluster_count(), 0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    auto it = pos.find(a.elements[i]);
    if (it == pos.end()) throw Error("jaccard: element sets differ (" + a.elements[i] + ")");
    const auto bc = b.assignment[it->second];
    ++joint[{a.assignment[i], bc}];
    ++ca[a.assignment[i]];
    ++cb[bc];
  }
  std::uint64_t both = 0, pa = 0, pb = 0;
  for (const auto& [_, k] : joint) both += pairs(k);
  for (auto k : ca) pa += pairs(k);
  for (auto k : cb) pb += pairs(k);
  const std::uint64_t denom = pa + pb - both;  // r + u + v
  return denom == 0 ? 1.0 : static_cast<double>(both) / static_cast<double>(denom);
}

/// Share of elements in the k largest clusters.
inline double top_groups_share(const Partition& p, std::size_t k = 10) {
  auto sizes = p.sizes();
  if (p.size() == 0) return 0.0;
  std::sort(sizes.begin(), sizes.end(), std::greater<>());
  std::size_t top = 0;
  for (std::size_t i = 0; i < std::min(k, sizes.size()); ++i) top += sizes[i];
  return static_cast<double>(top) / static_cast<double>(p.size());
}

/// Group report: per cluster the members and the heaviest locations of each
/// group eigen-behavior vector.
inline nlohmann::json group_report(const std::vector<GroupProfile>& profiles, const LocationIndex& locations,
                                   std::size_t top_locations = 5) {
  nlohmann::json groups = nlohmann::json::array();
  for (const auto& g : profiles) {
    nlohmann::json gj{{"cluster", g.cluster}, {"members", g.members}, {"cumulative_power", g.cumulative_power}};
    auto& ev = gj["eigen_behaviors"] = nlohmann::json::array();
    for (std::size_t j = 0; j < g.eigen.size(); ++j) {
      const auto& v = g.eigen.vectors[j];
      std::vector<Eigen::Index> order(static_cast<std::size_t>(v.size()));
      std::iota(order.begin(), order.end(), Eigen::Index{0});
      std::stable_sort(order.begin(), order.end(),
                       [&](Eigen::Index a, Eigen::Index b) { return std::abs(v(a)) > std::abs(v(b)); });
      nlohmann::json tops = nlohmann::json::array();
      for (std::size_t r = 0; r < std::min<std::size_t>(top_locations, order.size()); ++r) {
        const auto loc = order[r];
        if (v(loc) == 0.0) break;
        tops.push_back({{"location", locations.at(static_cast<std::size_t>(loc))}, {"entry", v(loc)}});
      }
      ev.push_back({{"weight", g.eigen.weights[j]}, {"top_locations", tops}});
    }
    groups.push_back(std::move(gj));
  }
  return groups;
}

}  // namespace mobgroups
