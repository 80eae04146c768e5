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
#include <limits>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "mobgroups/common.hpp"
#include "mobgroups/distance_matrix.hpp"

namespace mobgroups {

/// When agglomeration stops: once every remaining inter-cluster distance
/// exceeds a threshold, or once a target number of clusters is left.
struct StopRule {
  enum class Kind { threshold, target_count };
  Kind kind = Kind::target_count;
  double threshold = 0.0;
  std::size_t target_count = 1;

  static StopRule at_threshold(double t) { return {Kind::threshold, t, 0}; }
  static StopRule with_count(std::size_t k) { return {Kind::target_count, 0.0, k}; }
};

/// One merge step. Cluster ids are the smallest element index in the
/// cluster, so `a < b` and the merged cluster keeps id `a`.
struct Merge {
  std::size_t a = 0;
  std::size_t b = 0;
  double distance = 0.0;
};

struct Partition {
  std::vector<std::string> elements;    // element labels
  std::vector<std::size_t> assignment;  // contiguous cluster ids, numbered by first element
  std::vector<Merge> merge_history;
  StopRule stop;

  std::size_t size() const { return assignment.size(); }

  std::size_t cluster_count() const {
    std::size_t k = 0;
    for (auto c : assignment) k = std::max(k, c + 1);
    return k;
  }

  std::vector<std::vector<std::size_t>> clusters() const {
    std::vector<std::vector<std::size_t>> out(cluster_count());
    for (std::size_t i = 0; i < assignment.size(); ++i) out[assignment[i]].push_back(i);
    return out;
  }

  std::vector<std::size_t> sizes() const {
    std::vector<std::size_t> out(cluster_count(), 0);
    for (auto c : assignment) ++out[c];
    return out;
  }
};

/// Renumbers arbitrary labels into contiguous ids ordered by first appearance.
inline std::vector<std::size_t> canonical_labels(const std::vector<std::size_t>& labels) {
  std::map<std::size_t, std::size_t> remap;
  std::vector<std::size_t> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto [it, _] = remap.emplace(labels[i], remap.size());
    out[i] = it->second;
  }
  return out;
}

inline void check_distance_matrix(const Eigen::MatrixXd& d) {
  if (d.rows() != d.cols()) throw Error("distance matrix must be square");
  for (Eigen::Index i = 0; i < d.rows(); ++i) {
    for (Eigen::Index j = i; j < d.cols(); ++j) {
      if (!std::isfinite(d(i, j))) throw Error("distance matrix has a non-finite entry");
      if (std::abs(d(i, j) - d(j, i)) > 1e-9) throw Error("distance matrix is not symmetric");
    }
  }
}

/// Average-linkage (UPGMA) agglomerative clustering. Ties between equally
/// close pairs go to the lexicographically smallest (a, b) cluster-id pair.
inline Partition agglomerate(const Eigen::MatrixXd& distances, StopRule stop,
                             std::vector<std::string> labels = {}) {
  check_distance_matrix(distances);
  const auto n = static_cast<std::size_t>(distances.rows());
  if (stop.kind == StopRule::Kind::target_count && (stop.target_count < 1 || stop.target_count > n))
    throw Error("target_count must be in [1, N]");
  if (stop.kind == StopRule::Kind::threshold && !(stop.threshold > 0.0))
    throw Error("threshold must be positive");
  if (labels.empty())
    for (std::size_t i = 0; i < n; ++i) labels.push_back(std::to_string(i));
  if (labels.size() != n) throw Error("label count does not match distance matrix");

  Partition p;
  p.elements = std::move(labels);
  p.stop = stop;
  if (n == 0) return p;

  Eigen::MatrixXd d = distances;
  std::vector<char> active(n, 1);
  std::vector<std::size_t> members(n, 1);
  std::vector<std::size_t> parent(n);
  for (std::size_t i = 0; i < n; ++i) parent[i] = i;
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> nn(n, n);
  std::vector<double> nnd(n, kInf);

  auto at = [&](std::size_t i, std::size_t j) -> double& {
    return d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  };
  auto refresh = [&](std::size_t i) {
    nn[i] = n;
    nnd[i] = kInf;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i || !active[j]) continue;
      if (at(i, j) < nnd[i]) {
        nnd[i] = at(i, j);
        nn[i] = j;
      }
    }
  };
  for (std::size_t i = 0; i < n; ++i) refresh(i);

  std::size_t remaining = n;
  while (remaining > 1) {
    if (stop.kind == StopRule::Kind::target_count && remaining <= stop.target_count) break;
    std::size_t best = n;
    std::tuple<double, std::size_t, std::size_t> best_key{kInf, n, n};
    for (std::size_t i = 0; i < n; ++i) {
      if (!active[i] || nn[i] == n) continue;
      std::tuple<double, std::size_t, std::size_t> key{nnd[i], std::min(i, nn[i]), std::max(i, nn[i])};
      if (key < best_key) {
        best_key = key;
        best = i;
      }
    }
    if (best == n) break;
    const auto [dist, a, b] = best_key;
    if (stop.kind == StopRule::Kind::threshold && dist > stop.threshold) break;

    p.merge_history.push_back({a, b, dist});
    const double na = static_cast<double>(members[a]);
    const double nb = static_cast<double>(members[b]);
    for (std::size_t k = 0; k < n; ++k) {
      if (!active[k] || k == a || k == b) continue;
      const double v = (na * at(a, k) + nb * at(b, k)) / (na + nb);
      at(a, k) = v;
      at(k, a) = v;
    }
    active[b] = 0;
    members[a] += members[b];
    parent[b] = a;
    --remaining;

    refresh(a);
    for (std::size_t k = 0; k < n; ++k) {
      if (!active[k] || k == a) continue;
      if (nn[k] == a || nn[k] == b) {
        refresh(k);
      } else if (at(k, a) < nnd[k] || (at(k, a) == nnd[k] && a < nn[k])) {
        nnd[k] = at(k, a);
        nn[k] = a;
      }
    }
  }

  std::vector<std::size_t> root(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t r = i;
    while (parent[r] != r) r = parent[r];
    root[i] = r;
  }
  p.assignment = canonical_labels(root);
  return p;
}

/// Clusters the users of a distance matrix.
inline Partition cluster_population(const DistanceMatrix& dm, StopRule stop) {
  return agglomerate(dm.values, stop, dm.users);
}

/// Builds a partition from explicit labels (e.g. ground truth).
inline Partition partition_from_labels(std::vector<std::string> elements, const std::vector<std::size_t>& labels) {
  if (elements.size() != labels.size()) throw Error("partition: element/label count mismatch");
  Partition p;
  p.elements = std::move(elements);
  p.assignment = canonical_labels(labels);
  return p;
}

struct DistanceCdfs {
  std::vector<double> intra;  // sorted
  std::vector<double> inter;  // sorted
};

/// Pair distances split by co-membership.
inline DistanceCdfs distance_cdfs(const Partition& p, const Eigen::MatrixXd& distances) {
  if (static_cast<std::size_t>(distances.rows()) != p.size()) throw Error("distance_cdfs: size mismatch");
  DistanceCdfs out;
  for (std::size_t i = 0; i < p.size(); ++i) {
    for (std::size_t j = i + 1; j < p.size(); ++j) {
      const double v = distances(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      (p.assignment[i] == p.assignment[j] ? out.intra : out.inter).push_back(v);
    }
  }
  std::sort(out.intra.begin(), out.intra.end());
  std::sort(out.inter.begin(), out.inter.end());
  return out;
}

// ---------------------------------------------------------------------------
// Persistence

inline std::string partition_to_csv(const Partition& p) {
  std::string out = "element,cluster\n";
  for (std::size_t i = 0; i < p.size(); ++i) out += p.elements[i] + "," + std::to_string(p.assignment[i]) + "\n";
  return out;
}

inline std::string merges_to_csv(const Partition& p) {
  std::string out = "step,a,b,distance\n";
  for (std::size_t s = 0; s < p.merge_history.size(); ++s) {
    const auto& m = p.merge_history[s];
    out += std::to_string(s) + "," + p.elements[m.a] + "," + p.elements[m.b] + "," + detail::fmt17(m.distance) +
           "\n";
  }
  return out;
}

inline std::string cdfs_to_csv(const DistanceCdfs& c) {
  std::string out = "kind,distance\n";
  for (double v : c.intra) out += "intra," + detail::fmt17(v) + "\n";
  for (double v : c.inter) out += "inter," + detail::fmt17(v) + "\n";
  return out;
}

/// Reads `element,cluster`; cluster labels may be any integers.
inline Partition load_partition(const std::string& path) {
  auto lines = detail::read_lines(path);
  std::vector<std::string> elements;
  std::vector<std::size_t> labels;
  bool header = false;
  for (std::size_t k = 0; k < lines.size(); ++k) {
    auto body = detail::trim(lines[k]);
    if (body.empty()) continue;
    auto cols = detail::split_csv(body);
    if (!header) {
      if (cols.size() != 2) throw Error(path + ": expected header element,cluster");
      header = true;
      continue;
    }
    std::int64_t c;
    if (cols.size() != 2 || cols[0].empty() || !detail::parse_int(cols[1], c) || c < 0)
      throw Error(path + ":" + std::to_string(k + 1) + ": expected element,cluster");
    elements.emplace_back(cols[0]);
    labels.push_back(static_cast<std::size_t>(c));
  }
  if (!header) throw Error(path + ": missing header");
  return partition_from_labels(std::move(elements), labels);
}

}  // namespace mobgroups
