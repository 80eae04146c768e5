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
#include <cctype>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "mobgroups/common.hpp"

namespace mobgroups {

using Seconds = std::int64_t;
inline constexpr Seconds kSecondsPerDay = 86400;

/// One row of a WLAN association log: `user` was associated with
/// `location` over [start, end).
struct AssociationRecord {
  std::string user_id;
  std::string location_id;
  Seconds start = 0;
  Seconds end = 0;

  friend bool operator==(const AssociationRecord&, const AssociationRecord&) = default;
};

/// AP id -> building id.
using LocationMap = std::map<std::string, std::string>;

/// Ordered list of location ids; column i of every matrix in a run refers to
/// location_index[i].
using LocationIndex = std::vector<std::string>;

enum class Granularity { building, access_point };
enum class Normalization { normalized, absolute };

/// Time-of-day window [begin, end) in seconds since midnight (UTC).
struct DailyWindow {
  Seconds begin = 0;
  Seconds end = kSecondsPerDay;
};

struct TraceConfig {
  Seconds slot_seconds = kSecondsPerDay;
  Seconds trace_start = 0;
  Seconds trace_end = 0;
  Granularity granularity = Granularity::building;
  std::optional<DailyWindow> window;
  Normalization normalization = Normalization::normalized;
  // Slots start at the midnight at or before trace_start instead of at
  // trace_start itself.
  bool align_midnight = false;

  void validate() const {
    if (slot_seconds <= 0) throw Error("slot_seconds must be positive");
    if (trace_end <= trace_start) throw Error("trace_end must be after trace_start");
    if (window) {
      if (window->begin < 0 || window->begin >= window->end || window->end > kSecondsPerDay)
        throw Error("daily window must satisfy 0 <= begin < end <= 86400");
    }
  }

  Seconds origin() const {
    if (!align_midnight) return trace_start;
    Seconds r = trace_start % kSecondsPerDay;
    if (r < 0) r += kSecondsPerDay;
    return trace_start - r;
  }

  /// Number of slots t covering [origin, trace_end).
  std::size_t slot_count() const {
    const Seconds span = trace_end - origin();
    return static_cast<std::size_t>((span + slot_seconds - 1) / slot_seconds);
  }
};

/// One user's t x n matrix of per-slot association vectors.
struct AssociationMatrix {
  std::string user_id;
  Eigen::MatrixXd rows;  // t x n
};

/// All users of one analysis run, sharing t and the location index.
struct MatrixSet {
  TraceConfig config;
  LocationIndex locations;
  std::vector<AssociationMatrix> users;  // ascending user id

  const AssociationMatrix* find(const std::string& user) const {
    auto it = std::lower_bound(users.begin(), users.end(), user,
                               [](const AssociationMatrix& m, const std::string& u) { return m.user_id < u; });
    return (it != users.end() && it->user_id == user) ? &*it : nullptr;
  }
};

// ---------------------------------------------------------------------------
// Parsing

inline std::vector<AssociationRecord> parse_records(std::istream& in, const std::string& source = "<stream>") {
  std::vector<AssociationRecord> out;
  std::string line;
  std::size_t lineno = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    auto body = detail::trim(line);
    if (body.empty()) continue;
    auto cols = detail::split_csv(body);
    if (!header_seen) {
      if (cols.size() != 4 || cols[0] != "user" || cols[1] != "location" || cols[2] != "start" ||
          cols[3] != "end")
        throw Error(source + ":" + std::to_string(lineno) + ": expected header user,location,start,end");
      header_seen = true;
      continue;
    }
    const auto where = source + ":" + std::to_string(lineno);
    if (cols.size() != 4)
      throw Error(where + ": expected 4 columns, got " + std::to_string(cols.size()));
    AssociationRecord r;
    r.user_id = std::string(cols[0]);
    r.location_id = std::string(cols[1]);
    if (r.user_id.empty()) throw Error(where + ": column 1 (user) is empty");
    if (r.location_id.empty()) throw Error(where + ": column 2 (location) is empty");
    if (!detail::parse_int(cols[2], r.start)) throw Error(where + ": column 3 (start) is not an integer");
    if (!detail::parse_int(cols[3], r.end)) throw Error(where + ": column 4 (end) is not an integer");
    if (r.end <= r.start) throw Error(where + ": end <= start");
    out.push_back(std::move(r));
  }
  if (!header_seen) throw Error(source + ": missing header user,location,start,end");
  return out;
}

inline std::vector<AssociationRecord> load_records(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open trace file: " + path);
  return parse_records(in, path);
}

inline LocationMap load_location_map(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open location map: " + path);
  LocationMap map;
  std::string line;
  std::size_t lineno = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    auto body = detail::trim(line);
    if (body.empty()) continue;
    auto cols = detail::split_csv(body);
    if (!header_seen) {
      if (cols.size() != 2 || cols[0] != "ap" || cols[1] != "building")
        throw Error(path + ":" + std::to_string(lineno) + ": expected header ap,building");
      header_seen = true;
      continue;
    }
    if (cols.size() != 2 || cols[0].empty() || cols[1].empty())
      throw Error(path + ":" + std::to_string(lineno) + ": expected ap,building");
    map[std::string(cols[0])] = std::string(cols[1]);
  }
  if (!header_seen) throw Error(path + ": missing header ap,building");
  return map;
}

inline std::string records_to_csv(std::span<const AssociationRecord> records) {
  std::string out = "user,location,start,end\n";
  for (const auto& r : records) {
    out += r.user_id;
    out += ',';
    out += r.location_id;
    out += ',';
    out += std::to_string(r.start);
    out += ',';
    out += std::to_string(r.end);
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Record transforms

/// Replaces each AP id with its building id.
inline std::vector<AssociationRecord> aggregate_locations(std::span<const AssociationRecord> records,
                                                          const LocationMap& map) {
  std::vector<AssociationRecord> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    auto it = map.find(r.location_id);
    if (it == map.end()) throw Error("unmapped: " + r.location_id);
    auto copy = r;
    copy.location_id = it->second;
    out.push_back(std::move(copy));
  }
  return out;
}

/// Clips every record to [begin, end); records falling entirely outside are
/// dropped.
inline std::vector<AssociationRecord> clip_records(std::span<const AssociationRecord> records, Seconds begin,
                                                   Seconds end) {
  std::vector<AssociationRecord> out;
  for (const auto& r : records) {
    const Seconds s = std::max(r.start, begin);
    const Seconds e = std::min(r.end, end);
    if (e > s) out.push_back({r.user_id, r.location_id, s, e});
  }
  return out;
}

/// Lexicographically sorted distinct location ids.
inline LocationIndex make_location_index(std::span<const AssociationRecord> records) {
  LocationIndex idx;
  for (const auto& r : records) idx.push_back(r.location_id);
  std::sort(idx.begin(), idx.end());
  idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
  return idx;
}

/// Smallest start and largest end over all records.
inline std::pair<Seconds, Seconds> record_span(std::span<const AssociationRecord> records) {
  if (records.empty()) throw Error("empty trace");
  Seconds lo = records.front().start, hi = records.front().end;
  for (const auto& r : records) {
    lo = std::min(lo, r.start);
    hi = std::max(hi, r.end);
  }
  return {lo, hi};
}

// ---------------------------------------------------------------------------
// Matrix construction

namespace detail {

struct Piece {
  Seconds start;
  Seconds end;
  int loc;
};

// Per-location seconds of one slot. Overlapping intervals at the same
// location count once; overlap across k distinct locations is split evenly.
inline double sweep_slot(std::vector<Piece>& pieces, Eigen::RowVectorXd& row) {
  struct Event {
    Seconds t;
    int delta;
    int loc;
  };
  std::vector<Event> ev;
  ev.reserve(pieces.size() * 2);
  for (const auto& p : pieces) {
    ev.push_back({p.start, +1, p.loc});
    ev.push_back({p.end, -1, p.loc});
  }
  std::sort(ev.begin(), ev.end(), [](const Event& a, const Event& b) {
    if (a.t != b.t) return a.t < b.t;
    if (a.loc != b.loc) return a.loc < b.loc;
    return a.delta < b.delta;
  });
  std::map<int, int> active;  // loc -> open interval count
  double online = 0.0;
  std::size_t i = 0;
  while (i < ev.size()) {
    const Seconds t = ev[i].t;
    while (i < ev.size() && ev[i].t == t) {
      auto& c = active[ev[i].loc];
      c += ev[i].delta;
      if (c == 0) active.erase(ev[i].loc);
      ++i;
    }
    if (i == ev.size() || active.empty()) continue;
    const double len = static_cast<double>(ev[i].t - t);
    online += len;
    const double share = len / static_cast<double>(active.size());
    for (const auto& [loc, _] : active) row(loc) += share;
  }
  return online;
}

}  // namespace detail

/// Builds one user's association matrix. `records` must all belong to the
/// same user and already be at the target location granularity.
inline AssociationMatrix build_matrix(std::span<const AssociationRecord> records, const TraceConfig& config,
                                      const LocationIndex& location_index) {
  config.validate();
  AssociationMatrix m;
  const std::size_t t = config.slot_count();
  const auto n = static_cast<Eigen::Index>(location_index.size());
  m.rows = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(t), n);
  if (records.empty()) return m;
  m.user_id = records.front().user_id;

  const Seconds origin = config.origin();
  const Seconds lo = std::max(config.trace_start, origin);
  const Seconds hi = config.trace_end;
  std::vector<std::vector<detail::Piece>> per_slot(t);

  auto add_clipped = [&](Seconds s, Seconds e, int loc) {
    // split at slot boundaries
    while (s < e) {
      const auto slot = static_cast<std::size_t>((s - origin) / config.slot_seconds);
      const Seconds slot_end = origin + static_cast<Seconds>(slot + 1) * config.slot_seconds;
      const Seconds piece_end = std::min(e, slot_end);
      per_slot[slot].push_back({s, piece_end, loc});
      s = piece_end;
    }
  };

  for (const auto& r : records) {
    if (r.user_id != m.user_id)
      throw Error("build_matrix: records for more than one user (" + m.user_id + ", " + r.user_id + ")");
    auto it = std::lower_bound(location_index.begin(), location_index.end(), r.location_id);
    if (it == location_index.end() || *it != r.location_id)
      throw Error("build_matrix: location not in index: " + r.location_id);
    const int loc = static_cast<int>(it - location_index.begin());
    const Seconds s = std::max(r.start, lo);
    const Seconds e = std::min(r.end, hi);
    if (e <= s) continue;
    if (!config.window) {
      add_clipped(s, e, loc);
      continue;
    }
    auto floor_day = [](Seconds x) {
      Seconds d = x / kSecondsPerDay;
      if (x % kSecondsPerDay < 0) --d;
      return d;
    };
    for (Seconds d = floor_day(s); d <= floor_day(e - 1); ++d) {
      const Seconds ws = std::max(s, d * kSecondsPerDay + config.window->begin);
      const Seconds we = std::min(e, d * kSecondsPerDay + config.window->end);
      if (we > ws) add_clipped(ws, we, loc);
    }
  }

  for (std::size_t slot = 0; slot < t; ++slot) {
    if (per_slot[slot].empty()) continue;
    Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(n);
    const double online = detail::sweep_slot(per_slot[slot], row);
    if (config.normalization == Normalization::normalized && online > 0.0) row /= online;
    m.rows.row(static_cast<Eigen::Index>(slot)) = row;
  }
  return m;
}

/// Groups records by user and builds every user's matrix. When
/// `location_index` is empty it is derived from the records.
inline MatrixSet build_matrices(std::span<const AssociationRecord> records, const TraceConfig& config,
                                LocationIndex location_index = {}) {
  if (location_index.empty()) location_index = make_location_index(records);
  std::map<std::string, std::vector<AssociationRecord>> by_user;
  for (const auto& r : records) by_user[r.user_id].push_back(r);
  MatrixSet set;
  set.config = config;
  set.locations = std::move(location_index);
  set.users.reserve(by_user.size());
  for (const auto& [user, recs] : by_user) {
    auto m = build_matrix(recs, config, set.locations);
    m.user_id = user;
    set.users.push_back(std::move(m));
  }
  return set;
}

/// Rows with non-zero L1 norm.
inline std::size_t online_slot_count(const AssociationMatrix& m) {
  std::size_t c = 0;
  for (Eigen::Index i = 0; i < m.rows.rows(); ++i)
    if (m.rows.row(i).cwiseAbs().sum() > 0.0) ++c;
  return c;
}

inline bool is_offline(const AssociationMatrix& m) { return online_slot_count(m) == 0; }

// ---------------------------------------------------------------------------
// Persistence

inline nlohmann::json to_json(const TraceConfig& c) {
  nlohmann::json j;
  j["slot_seconds"] = c.slot_seconds;
  j["trace_start"] = c.trace_start;
  j["trace_end"] = c.trace_end;
  j["granularity"] = c.granularity == Granularity::building ? "building" : "access_point";
  j["normalization"] = c.normalization == Normalization::normalized ? "normalized" : "absolute";
  j["align_midnight"] = c.align_midnight;
  if (c.window)
    j["window"] = {c.window->begin, c.window->end};
  else
    j["window"] = nullptr;
  return j;
}

/// Reads the trace-related keys of a config object; absent keys keep the
/// values already in `c`.
inline void update_from_json(TraceConfig& c, const nlohmann::json& j) {
  if (j.contains("slot_seconds")) c.slot_seconds = j.at("slot_seconds").get<Seconds>();
  if (j.contains("trace_start")) c.trace_start = j.at("trace_start").get<Seconds>();
  if (j.contains("trace_end")) c.trace_end = j.at("trace_end").get<Seconds>();
  if (j.contains("granularity")) {
    const auto g = j.at("granularity").get<std::string>();
    if (g == "building")
      c.granularity = Granularity::building;
    else if (g == "access_point")
      c.granularity = Granularity::access_point;
    else
      throw Error("granularity must be building or access_point");
  }
  if (j.contains("normalization")) {
    const auto n = j.at("normalization").get<std::string>();
    if (n == "normalized")
      c.normalization = Normalization::normalized;
    else if (n == "absolute")
      c.normalization = Normalization::absolute;
    else
      throw Error("normalization must be normalized or absolute");
  }
  if (j.contains("align_midnight")) c.align_midnight = j.at("align_midnight").get<bool>();
  if (j.contains("window")) {
    const auto& w = j.at("window");
    if (w.is_null())
      c.window.reset();
    else
      c.window = DailyWindow{w.at(0).get<Seconds>(), w.at(1).get<Seconds>()};
  }
}

inline std::string matrix_to_csv(const Eigen::MatrixXd& m) {
  std::string out;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out += ',';
      out += detail::fmt9(m(i, j));
    }
    out += '\n';
  }
  return out;
}

inline Eigen::MatrixXd matrix_from_csv(const std::string& path) {
  auto lines = detail::read_lines(path);
  std::vector<std::vector<double>> rows;
  for (std::size_t k = 0; k < lines.size(); ++k) {
    auto body = detail::trim(lines[k]);
    if (body.empty()) continue;
    std::vector<double> row;
    for (auto cell : detail::split_csv(body)) {
      double v;
      if (!detail::parse_double(cell, v)) throw Error(path + ":" + std::to_string(k + 1) + ": bad number");
      row.push_back(v);
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw Error(path + ":" + std::to_string(k + 1) + ": ragged row");
    rows.push_back(std::move(row));
  }
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()),
                    rows.empty() ? 0 : static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return m;
}

/// Filename-safe encoding of a user id (bytes outside [A-Za-z0-9._-] become %XX).
inline std::string file_stem(const std::string& id) {
  static const char* hex = "0123456789ABCDEF";
  std::string out;
  for (unsigned char ch : id) {
    if (std::isalnum(ch) || ch == '.' || ch == '_' || ch == '-') {
      out += static_cast<char>(ch);
    } else {
      out += '%';
      out += hex[ch >> 4];
      out += hex[ch & 15];
    }
  }
  if (out == "." || out == "..") out = "%2E" + out.substr(1);
  return out;
}

}  // namespace mobgroups
