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
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "mobgroups/clustering.hpp"
#include "mobgroups/common.hpp"
#include "mobgroups/trace_model.hpp"

namespace mobgroups {

inline constexpr double kDefaultPowerFloor = 0.001;

/// Location-space directions of a user's (or group's) association matrix,
/// ordered by captured power. weights[j] = sigma_j^2 / sum_k sigma_k^2 over
/// the full rank; directions below `power_floor` are dropped.
struct EigenBehaviorSet {
  std::vector<Eigen::VectorXd> vectors;
  std::vector<double> weights;
  double power_floor = kDefaultPowerFloor;

  std::size_t size() const { return vectors.size(); }
  bool empty() const { return vectors.empty(); }
  Eigen::Index dimension() const { return vectors.empty() ? 0 : vectors.front().size(); }
};

/// Per-user behavioral modes: clusters of the user's own online rows.
struct ModeClustering {
  double threshold = 0.0;
  std::vector<std::vector<std::size_t>> clusters;  // non-trivial, each sorted by row index
  std::vector<Eigen::VectorXd> centroids;
  std::vector<std::size_t> trivial_cluster;  // all-zero rows
};

enum class ModalClass { single_modal, multi_modal };

namespace detail {

inline bool row_online(const Eigen::MatrixXd& x, Eigen::Index i) { return x.row(i).cwiseAbs().sum() > 0.0; }

inline double l1_mass(const Eigen::MatrixXd& x) { return x.cwiseAbs().sum(); }

inline void require_online(const Eigen::MatrixXd& x, const char* what) {
  if (!(l1_mass(x) > 0.0)) throw Error(std::string(what) + ": no online days");
}

// Largest-magnitude entry positive; the first such entry on exact ties.
inline void canonical_sign(Eigen::VectorXd& v) {
  Eigen::Index arg = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i)
    if (std::abs(v(i)) > std::abs(v(arg)) + 1e-12) arg = i;
  if (v.size() > 0 && v(arg) < 0.0) v = -v;
}

}  // namespace detail

/// Online average: sum of rows over the sum of their L1 norms.
inline Eigen::VectorXd onavg(const Eigen::MatrixXd& x) {
  const double mass = detail::l1_mass(x);
  if (!(mass > 0.0)) throw Error("onavg: no online days");
  return x.colwise().sum().transpose() / mass;
}

/// Pairwise Manhattan distances between matrix rows.
inline Eigen::MatrixXd row_manhattan(const Eigen::MatrixXd& rows) {
  const auto m = rows.rows();
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(m, m);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = i + 1; j < m; ++j) d(i, j) = d(j, i) = (rows.row(i) - rows.row(j)).cwiseAbs().sum();
  return d;
}

/// Clusters a user's rows into behavioral modes. Offline rows form the
/// trivial cluster; online rows go through average-linkage clustering
/// under Manhattan distance, merged while the closest pair is within
/// `threshold`.
inline ModeClustering behavioral_modes(const Eigen::MatrixXd& x, double threshold) {
  if (!(threshold > 0.0 && threshold <= 2.0)) throw Error("behavioral_modes: threshold must be in (0, 2]");
  ModeClustering mc;
  mc.threshold = threshold;
  std::vector<Eigen::Index> online;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    if (detail::row_online(x, i))
      online.push_back(i);
    else
      mc.trivial_cluster.push_back(static_cast<std::size_t>(i));
  }
  if (online.empty()) return mc;
  Eigen::MatrixXd rows(static_cast<Eigen::Index>(online.size()), x.cols());
  for (std::size_t k = 0; k < online.size(); ++k) rows.row(static_cast<Eigen::Index>(k)) = x.row(online[k]);
  const auto part = agglomerate(row_manhattan(rows), StopRule::at_threshold(threshold));
  mc.clusters.assign(part.cluster_count(), {});
  for (std::size_t k = 0; k < online.size(); ++k)
    mc.clusters[part.assignment[k]].push_back(static_cast<std::size_t>(online[k]));
  for (const auto& c : mc.clusters) {
    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(x.cols());
    for (auto r : c) centroid += x.row(static_cast<Eigen::Index>(r)).transpose();
    mc.centroids.push_back(centroid / static_cast<double>(c.size()));
  }
  return mc;
}

/// multi_modal iff at least two non-trivial modes. An all-offline user has
/// no modes and is reported single_modal.
inline ModalClass modal_class(const Eigen::MatrixXd& x, double threshold) {
  return behavioral_modes(x, threshold).clusters.size() >= 2 ? ModalClass::multi_modal : ModalClass::single_modal;
}

/// Index of the first non-trivial mode: the largest cluster, ties to the
/// cluster holding the smallest row index.
inline std::size_t first_mode_index(const ModeClustering& mc) {
  if (mc.clusters.empty()) throw Error("no non-trivial behavioral mode");
  std::size_t best = 0;
  for (std::size_t c = 1; c < mc.clusters.size(); ++c) {
    const auto& a = mc.clusters[c];
    const auto& b = mc.clusters[best];
    if (a.size() > b.size() || (a.size() == b.size() && a.front() < b.front())) best = c;
  }
  return best;
}

/// Centroid of the first non-trivial behavioral mode.
inline Eigen::VectorXd centroid_first_mode(const Eigen::MatrixXd& x, double threshold) {
  detail::require_online(x, "centroid_first_mode");
  const auto mc = behavioral_modes(x, threshold);
  return mc.centroids[first_mode_index(mc)];
}

/// Fraction of the matrix's L1 row mass captured by projecting every row onto
/// `y` (scaled to unit L2 norm first).
inline double significance(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  if (y.size() != x.cols()) throw Error("significance: dimension mismatch");
  const double mass = detail::l1_mass(x);
  if (!(mass > 0.0)) throw Error("significance: no online days");
  const double norm = y.norm();
  if (!(norm > 0.0)) throw Error("significance: zero summary vector");
  return (x * (y / norm)).cwiseAbs().sum() / mass;
}

/// Singular values of x in decreasing order.
inline Eigen::VectorXd singular_values(const Eigen::MatrixXd& x) {
  if (x.size() == 0) return Eigen::VectorXd();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(x);
  return svd.singularValues();
}

/// Eigen-behavior vectors: unit eigenvectors of X^T X (right singular
/// vectors of X) in decreasing eigenvalue order.
inline EigenBehaviorSet eigen_behaviors(const Eigen::MatrixXd& x, double power_floor = kDefaultPowerFloor) {
  if (!(x.cwiseAbs().maxCoeff() > 0.0)) throw Error("eigen_behaviors: all-zero matrix");
  if (!(power_floor >= 0.0)) throw Error("eigen_behaviors: power_floor must be non-negative");
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(x, Eigen::ComputeThinV);
  const Eigen::VectorXd s = svd.singularValues();
  const double total = s.squaredNorm();
  EigenBehaviorSet set;
  set.power_floor = power_floor;
  for (Eigen::Index j = 0; j < s.size(); ++j) {
    const double w = s(j) * s(j) / total;
    if (w < power_floor || !(w > 0.0)) break;
    Eigen::VectorXd v = svd.matrixV().col(j);
    v.normalize();
    detail::canonical_sign(v);
    set.vectors.push_back(std::move(v));
    set.weights.push_back(w);
  }
  return set;
}

/// Share of the squared Frobenius norm captured by the top k singular values.
inline double power_captured(const Eigen::MatrixXd& x, std::size_t k) {
  if (k < 1) throw Error("power_captured: k must be >= 1");
  const Eigen::VectorXd s = singular_values(x);
  const double total = s.squaredNorm();
  if (!(total > 0.0)) throw Error("power_captured: all-zero matrix");
  const auto top = std::min<Eigen::Index>(static_cast<Eigen::Index>(k), s.size());
  return std::min(1.0, s.head(top).squaredNorm() / total);
}

/// Rank-k reconstruction sum_{j<=k} sigma_j u_j v_j^T.
inline Eigen::MatrixXd reconstruct(const Eigen::MatrixXd& x, std::size_t k) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto top = std::min<Eigen::Index>(static_cast<Eigen::Index>(k), svd.singularValues().size());
  return svd.matrixU().leftCols(top) * svd.singularValues().head(top).asDiagonal() *
         svd.matrixV().leftCols(top).transpose();
}

// ---------------------------------------------------------------------------
// Population summary table

struct SummaryScores {
  double onavg = 0.0;
  double centroid_05 = 0.0;
  double centroid_09 = 0.0;
  double eigen = 0.0;
};

/// SIG of each summary for one (online) user.
inline SummaryScores summary_scores(const Eigen::MatrixXd& x) {
  SummaryScores s;
  s.onavg = significance(x, onavg(x));
  s.centroid_05 = significance(x, centroid_first_mode(x, 0.5));
  s.centroid_09 = significance(x, centroid_first_mode(x, 0.9));
  s.eigen = significance(x, eigen_behaviors(x).vectors.front());
  return s;
}

struct SummaryTable {
  SummaryScores mean;
  std::size_t users = 0;
  std::vector<std::string> excluded;  // all-offline users
};

/// Mean significance of each summary over the online users.
inline SummaryTable summary_table(std::span<const AssociationMatrix> users) {
  SummaryTable t;
  for (const auto& u : users) {
    if (is_offline(u)) {
      t.excluded.push_back(u.user_id);
      continue;
    }
    const auto s = summary_scores(u.rows);
    t.mean.onavg += s.onavg;
    t.mean.centroid_05 += s.centroid_05;
    t.mean.centroid_09 += s.centroid_09;
    t.mean.eigen += s.eigen;
    ++t.users;
  }
  if (t.users > 0) {
    const double n = static_cast<double>(t.users);
    t.mean.onavg /= n;
    t.mean.centroid_05 /= n;
    t.mean.centroid_09 /= n;
    t.mean.eigen /= n;
  }
  return t;
}

inline std::string summary_table_to_csv(const SummaryTable& t) {
  std::string out = "summary,mean_significance,users\n";
  const auto n = std::to_string(t.users);
  out += "onavg," + detail::fmt9(t.mean.onavg) + "," + n + "\n";
  out += "centroid@0.5," + detail::fmt9(t.mean.centroid_05) + "," + n + "\n";
  out += "centroid@0.9," + detail::fmt9(t.mean.centroid_09) + "," + n + "\n";
  out += "svd," + detail::fmt9(t.mean.eigen) + "," + n + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Persistence

inline nlohmann::json eigen_set_to_json(const std::string& user, const EigenBehaviorSet& s) {
  nlohmann::json j;
  j["user"] = user;
  j["power_floor"] = s.power_floor;
  j["weights"] = s.weights;
  auto& vs = j["vectors"] = nlohmann::json::array();
  for (const auto& v : s.vectors) vs.push_back(std::vector<double>(v.data(), v.data() + v.size()));
  return j;
}

inline std::pair<std::string, EigenBehaviorSet> eigen_set_from_json(const nlohmann::json& j) {
  EigenBehaviorSet s;
  try {
    s.power_floor = j.at("power_floor").get<double>();
    s.weights = j.at("weights").get<std::vector<double>>();
    for (const auto& v : j.at("vectors")) {
      const auto vals = v.get<std::vector<double>>();
      s.vectors.emplace_back(Eigen::Map<const Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size())));
    }
    if (s.vectors.size() != s.weights.size()) throw Error("eigen set: vectors/weights length mismatch");
    return {j.at("user").get<std::string>(), std::move(s)};
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("eigen set: ") + e.what());
  }
}

}  // namespace mobgroups
