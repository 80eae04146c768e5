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
#include <string>
#include <vector>

#include "mobgroups/common.hpp"

namespace mobgroups {

enum class Metric { amvd, eigen, onavg_l1, centroid_l1 };

inline const char* metric_name(Metric m) {
  switch (m) {
    case Metric::amvd: return "amvd";
    case Metric::eigen: return "eigen";
    case Metric::onavg_l1: return "onavg_l1";
    case Metric::centroid_l1: return "centroid_l1";
  }
  return "?";
}

inline Metric metric_from_name(const std::string& s) {
  if (s == "amvd") return Metric::amvd;
  if (s == "eigen") return Metric::eigen;
  if (s == "onavg_l1" || s == "onavg") return Metric::onavg_l1;
  if (s == "centroid_l1" || s == "centroid") return Metric::centroid_l1;
  throw Error("unknown metric: " + s);
}

/// Largest value the metric can take; assigned to pairs involving a user
/// with no online slot.
inline double metric_max(Metric m) { return m == Metric::eigen ? 1.0 : 2.0; }

/// Symmetric user-by-user distances under one metric.
struct DistanceMatrix {
  Metric metric = Metric::eigen;
  std::vector<std::string> users;
  Eigen::MatrixXd values;
  // users for which the metric is undefined (all-offline); their rows hold
  // metric_max
  std::vector<std::string> flagged;

  std::size_t size() const { return users.size(); }
  double operator()(std::size_t i, std::size_t j) const {
    return values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }
};

}  // namespace mobgroups
