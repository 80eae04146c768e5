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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "mobgroups/common.hpp"
#include "mobgroups/distance_matrix.hpp"
#include "mobgroups/summaries.hpp"
#include "mobgroups/trace_model.hpp"

namespace mobgroups {

/// L1 distance between two vectors of equal length.
inline double manhattan(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b) {
  if (a.size() != b.size()) throw Error("manhattan: dimension mismatch");
  return (a - b).cwiseAbs().sum();
}

struct AmvdOptions {
  // Keep all-zero (offline) rows in both sets instead of dropping them.
  bool include_offline = false;
};

/// Rows that take part in AMVD under the offline-row policy.
inline Eigen::MatrixXd amvd_rows(const Eigen::MatrixXd& x, AmvdOptions opt = {}) {
  if (opt.include_offline) return x;
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    if (x.row(i).cwiseAbs().sum() > 0.0) keep.push_back(i);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(keep.size()), x.cols());
  for (std::size_t k = 0; k < keep.size(); ++k) out.row(static_cast<Eigen::Index>(k)) = x.row(keep[k]);
  return out;
}

/// Average over rows of `a` of the Manhattan distance to the nearest row of
/// `b`. Both arguments are row sets (already filtered). Not symmetric.
inline double amvd(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.rows() == 0 || b.rows() == 0) throw Error("amvd: empty vector set");
  if (a.cols() != b.cols()) throw Error("amvd: dimension mismatch");
  double total = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < b.rows(); ++j) {
      double d = 0.0;
      for (Eigen::Index c = 0; c < a.cols() && d < best; ++c) d += std::abs(a(i, c) - b(j, c));
      best = std::min(best, d);
    }
    total += best;
  }
  return total / static_cast<double>(a.rows());
}

/// Symmetrized AMVD: (AMVD(A,B) + AMVD(B,A)) / 2.
inline double amvd_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return 0.5 * (amvd(a, b) + amvd(b, a));
}

/// Weighted sum of |u_i . v_j| over all eigen-behavior pairs.
inline double sim(const EigenBehaviorSet& u, const EigenBehaviorSet& v) {
  if (u.empty() || v.empty()) return 0.0;
  if (u.dimension() != v.dimension()) throw Error("sim: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i)
    for (std::size_t j = 0; j < v.size(); ++j) s += u.weights[i] * v.weights[j] * std::abs(u.vectors[i].dot(v.vectors[j]));
  return s;
}

namespace detail {

// Rows w_j * u_j stacked; Sim(U,V) is then the entry-wise L1 norm of A_u A_v^T.
inline Eigen::MatrixXd weighted_stack(const EigenBehaviorSet& s, Eigen::Index n) {
  Eigen::MatrixXd a(static_cast<Eigen::Index>(s.size()), n);
  for (std::size_t j = 0; j < s.size(); ++j) a.row(static_cast<Eigen::Index>(j)) = s.weights[j] * s.vectors[j].transpose();
  return a;
}

}  // namespace detail

/// Raw and per-row normalized similarity over a population.
struct SimTable {
  std::vector<std::string> users;
  Eigen::MatrixXd raw;
  Eigen::MatrixXd normalized;  // row U divided by max over V != U; diagonal 1
  std::vector<std::string> zero_rows;

  std::size_t size() const { return users.size(); }
  /// Symmetric similarity index used for forwarding decisions.
  double mutual(std::size_t i, std::size_t j) const {
    return 0.5 * (normalized(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) +
                  normalized(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)));
  }
};

/// Divides each row by its largest off-diagonal entry. Rows whose
/// off-diagonal entries are all zero stay zero and are reported in
/// `zero_rows` (by index).
inline Eigen::MatrixXd normalize_sims(const Eigen::MatrixXd& raw, std::vector<std::size_t>* zero_rows = nullptr) {
  if (raw.rows() != raw.cols()) throw Error("normalize_sims: matrix must be square");
  if (raw.rows() < 2) throw Error("normalize_sims: need at least two users");
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(raw.rows(), raw.cols());
  for (Eigen::Index i = 0; i < raw.rows(); ++i) {
    double mx = 0.0;
    for (Eigen::Index j = 0; j < raw.cols(); ++j)
      if (j != i) mx = std::max(mx, raw(i, j));
    if (!(mx > 0.0)) {
      if (zero_rows) zero_rows->push_back(static_cast<std::size_t>(i));
      continue;
    }
    for (Eigen::Index j = 0; j < raw.cols(); ++j) out(i, j) = (j == i) ? 1.0 : raw(i, j) / mx;
  }
  return out;
}

/// Builds the population similarity table. Users without an eigen set
/// (all-offline) have zero similarity to everyone.
inline SimTable sim_table(std::vector<std::string> users, std::span<const std::optional<EigenBehaviorSet>> sets) {
  if (users.size() != sets.size()) throw Error("sim_table: size mismatch");
  const auto n = static_cast<Eigen::Index>(users.size());
  Eigen::Index dim = -1;
  for (const auto& s : sets) {
    if (!s || s->empty()) continue;
    if (dim >= 0 && s->dimension() != dim) throw Error("sim: dimension mismatch");
    dim = s->dimension();
  }
  std::vector<Eigen::MatrixXd> stacks(users.size());
  for (std::size_t i = 0; i < users.size(); ++i)
    if (sets[i] && !sets[i]->empty()) stacks[i] = detail::weighted_stack(*sets[i], dim);
  SimTable t;
  t.users = std::move(users);
  t.raw = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& a = stacks[static_cast<std::size_t>(i)];
    if (a.rows() == 0) continue;
    for (Eigen::Index j = i; j < n; ++j) {
      const auto& b = stacks[static_cast<std::size_t>(j)];
      if (b.rows() == 0) continue;
      t.raw(i, j) = t.raw(j, i) = (a * b.transpose()).cwiseAbs().sum();
    }
  }
  std::vector<std::size_t> zero;
  t.normalized = normalize_sims(t.raw, &zero);
  for (auto z : zero) t.zero_rows.push_back(t.users[z]);
  return t;
}

/// Eigen-behavior distance from normalized similarities:
/// 1 - (Sim(U,V) + Sim(V,U)) / 2.
inline double eigen_distance(const Eigen::MatrixXd& normalized, std::size_t u, std::size_t v) {
  const auto n = static_cast<std::size_t>(normalized.rows());
  if (u >= n || v >= n) throw Error("eigen_distance: missing sims");
  if (u == v) return 0.0;
  const auto i = static_cast<Eigen::Index>(u), j = static_cast<Eigen::Index>(v);
  return std::clamp(1.0 - 0.5 * (normalized(i, j) + normalized(j, i)), 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Population distance matrices

/// Eigen-behavior sets for every user; nullopt for all-offline users.
inline std::vector<std::optional<EigenBehaviorSet>> population_eigen_sets(std::span<const AssociationMatrix> users,
                                                                          double power_floor = kDefaultPowerFloor) {
  std::vector<std::optional<EigenBehaviorSet>> out;
  out.reserve(users.size());
  for (const auto& u : users) {
    if (is_offline(u))
      out.emplace_back(std::nullopt);
    else
      out.emplace_back(eigen_behaviors(u.rows, power_floor));
  }
  return out;
}

inline DistanceMatrix eigen_distance_matrix(const SimTable& t,
                                            std::span<const std::optional<EigenBehaviorSet>> sets) {
  DistanceMatrix dm;
  dm.metric = Metric::eigen;
  dm.users = t.users;
  const auto n = static_cast<Eigen::Index>(t.size());
  dm.values = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t i = 0; i < sets.size(); ++i)
    if (!sets[i] || sets[i]->empty()) dm.flagged.push_back(t.users[i]);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const bool missing = !sets[static_cast<std::size_t>(i)] || !sets[static_cast<std::size_t>(j)];
      dm.values(i, j) = dm.values(j, i) =
          missing ? 1.0 : eigen_distance(t.normalized, static_cast<std::size_t>(i), static_cast<std::size_t>(j));
    }
  }
  return dm;
}

/// Eigen-behavior distance matrix straight from user matrices.
inline DistanceMatrix eigen_distance_matrix(std::span<const AssociationMatrix> users,
                                            double power_floor = kDefaultPowerFloor) {
  const auto sets = population_eigen_sets(users, power_floor);
  std::vector<std::string> ids;
  for (const auto& u : users) ids.push_back(u.user_id);
  return eigen_distance_matrix(sim_table(ids, sets), sets);
}

inline DistanceMatrix amvd_distance_matrix(std::span<const AssociationMatrix> users, AmvdOptions opt = {}) {
  DistanceMatrix dm;
  dm.metric = Metric::amvd;
  const auto n = static_cast<Eigen::Index>(users.size());
  dm.values = Eigen::MatrixXd::Zero(n, n);
  std::vector<Eigen::MatrixXd> rows;
  for (const auto& u : users) {
    dm.users.push_back(u.user_id);
    rows.push_back(amvd_rows(u.rows, opt));
    if (rows.back().rows() == 0) dm.flagged.push_back(u.user_id);
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const auto& a = rows[static_cast<std::size_t>(i)];
      const auto& b = rows[static_cast<std::size_t>(j)];
      dm.values(i, j) = dm.values(j, i) = (a.rows() == 0 || b.rows() == 0) ? 2.0 : amvd_distance(a, b);
    }
  }
  return dm;
}

enum class SummaryKind { onavg, centroid_05, centroid_09 };

inline std::optional<Eigen::VectorXd> summary_vector(const Eigen::MatrixXd& x, SummaryKind kind) {
  if (!(x.cwiseAbs().sum() > 0.0)) return std::nullopt;
  switch (kind) {
    case SummaryKind::onavg: return onavg(x);
    case SummaryKind::centroid_05: return centroid_first_mode(x, 0.5);
    case SummaryKind::centroid_09: return centroid_first_mode(x, 0.9);
  }
  return std::nullopt;
}

/// Pairwise Manhattan distances between per-user summary vectors. Users
/// without a summary (all-offline) are dropped from the matrix and listed in
/// `flagged`.
inline DistanceMatrix summary_l1_distance(std::span<const AssociationMatrix> users, SummaryKind kind) {
  DistanceMatrix dm;
  dm.metric = kind == SummaryKind::onavg ? Metric::onavg_l1 : Metric::centroid_l1;
  std::vector<Eigen::VectorXd> vecs;
  for (const auto& u : users) {
    auto v = summary_vector(u.rows, kind);
    if (!v) {
      dm.flagged.push_back(u.user_id);
      continue;
    }
    dm.users.push_back(u.user_id);
    vecs.push_back(std::move(*v));
  }
  const auto n = static_cast<Eigen::Index>(vecs.size());
  dm.values = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j)
      dm.values(i, j) = dm.values(j, i) =
          manhattan(vecs[static_cast<std::size_t>(i)], vecs[static_cast<std::size_t>(j)]);
  return dm;
}

// ---------------------------------------------------------------------------
// Persistence

/// Upper triangle as `a,b,distance`.
inline std::string distance_matrix_to_csv(const DistanceMatrix& dm) {
  std::string out = "a,b,distance\n";
  for (std::size_t i = 0; i < dm.size(); ++i)
    for (std::size_t j = i + 1; j < dm.size(); ++j)
      out += dm.users[i] + "," + dm.users[j] + "," + detail::fmt17(dm(i, j)) + "\n";
  return out;
}

inline nlohmann::json distance_matrix_sidecar(const DistanceMatrix& dm, const nlohmann::json& params) {
  return {{"metric", metric_name(dm.metric)}, {"n", dm.size()}, {"users", dm.users},
          {"flagged", dm.flagged},           {"params", params}};
}

}  // namespace mobgroups
