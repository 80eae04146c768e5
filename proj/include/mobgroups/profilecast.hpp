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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "mobgroups/clustering.hpp"
#include "mobgroups/common.hpp"
#include "mobgroups/distances.hpp"
#include "mobgroups/trace_model.hpp"

namespace mobgroups {

// ---------------------------------------------------------------------------
// Trace split and encounters

struct TraceSplit {
  Seconds begin = 0;
  Seconds split = 0;
  Seconds end = 0;
  std::vector<AssociationRecord> profile;     // [begin, split)
  std::vector<AssociationRecord> simulation;  // [split, end)
};

/// Splits the trace in time at begin + fraction * (end - begin). Records that
/// straddle the split point are clipped into both halves.
inline TraceSplit split_trace(std::span<const AssociationRecord> records, double fraction = 0.5,
                              std::optional<std::pair<Seconds, Seconds>> span = std::nullopt) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw Error("split_trace: fraction must be in (0, 1)");
  TraceSplit s;
  std::tie(s.begin, s.end) = span ? *span : record_span(records);
  if (s.end - s.begin < 2) throw Error("split_trace: degenerate span");
  s.split = s.begin + static_cast<Seconds>(std::floor(fraction * static_cast<double>(s.end - s.begin)));
  if (s.split <= s.begin || s.split >= s.end) throw Error("split_trace: degenerate span");
  s.profile = clip_records(records, s.begin, s.split);
  s.simulation = clip_records(records, s.split, s.end);
  return s;
}

/// A maximal interval during which users a < b (indices into
/// EncounterTrace::users) were at the same location.
struct Encounter {
  std::size_t a = 0;
  std::size_t b = 0;
  Seconds start = 0;
  Seconds end = 0;
  std::size_t location = 0;  // index into EncounterTrace::locations

  friend bool operator==(const Encounter&, const Encounter&) = default;
};

struct EncounterTrace {
  std::vector<std::string> users;      // sorted
  std::vector<std::string> locations;  // sorted
  std::vector<Encounter> encounters;   // sorted by (start, a, b, end, location)

  std::size_t user_index(const std::string& u) const {
    auto it = std::lower_bound(users.begin(), users.end(), u);
    return (it != users.end() && *it == u) ? static_cast<std::size_t>(it - users.begin()) : users.size();
  }
};

/// Pairwise co-location intervals. Each user's intervals at one location are
/// merged first, so every reported overlap is maximal. `extra_users` are
/// added to the user list even when they have no records.
inline EncounterTrace extract_encounters(std::span<const AssociationRecord> records,
                                         std::vector<std::string> extra_users = {}) {
  EncounterTrace out;
  out.users = std::move(extra_users);
  for (const auto& r : records) out.users.push_back(r.user_id);
  std::sort(out.users.begin(), out.users.end());
  out.users.erase(std::unique(out.users.begin(), out.users.end()), out.users.end());
  out.locations = make_location_index(records);

  struct Interval {
    Seconds start, end;
    std::size_t user;
  };
  std::vector<std::vector<Interval>> by_loc(out.locations.size());
  for (const auto& r : records) {
    const auto loc = static_cast<std::size_t>(
        std::lower_bound(out.locations.begin(), out.locations.end(), r.location_id) - out.locations.begin());
    by_loc[loc].push_back({r.start, r.end, out.user_index(r.user_id)});
  }
  for (std::size_t loc = 0; loc < by_loc.size(); ++loc) {
    auto& iv = by_loc[loc];
    std::sort(iv.begin(), iv.end(), [](const Interval& x, const Interval& y) {
      return std::tie(x.user, x.start, x.end) < std::tie(y.user, y.start, y.end);
    });
    std::vector<Interval> merged;
    for (const auto& x : iv) {
      if (!merged.empty() && merged.back().user == x.user && x.start <= merged.back().end)
        merged.back().end = std::max(merged.back().end, x.end);
      else
        merged.push_back(x);
    }
    std::sort(merged.begin(), merged.end(), [](const Interval& x, const Interval& y) {
      return std::tie(x.start, x.user) < std::tie(y.start, y.user);
    });
    std::vector<Interval> open;
    for (const auto& x : merged) {
      std::erase_if(open, [&](const Interval& o) { return o.end <= x.start; });
      for (const auto& o : open) {
        const Seconds e = std::min(o.end, x.end);
        out.encounters.push_back({std::min(o.user, x.user), std::max(o.user, x.user), x.start, e, loc});
      }
      open.push_back(x);
    }
  }
  std::sort(out.encounters.begin(), out.encounters.end(), [](const Encounter& x, const Encounter& y) {
    return std::tie(x.start, x.a, x.b, x.end, x.location) < std::tie(y.start, y.a, y.b, y.end, y.location);
  });
  return out;
}

// ---------------------------------------------------------------------------
// Messages and forwarding

enum class Scheme { flooding, centralized, similarity, rtx };

inline const char* scheme_name(Scheme s) {
  switch (s) {
    case Scheme::flooding: return "flooding";
    case Scheme::centralized: return "centralized";
    case Scheme::similarity: return "similarity";
    case Scheme::rtx: return "rtx";
  }
  return "?";
}

inline Scheme scheme_from_name(const std::string& s) {
  if (s == "flooding") return Scheme::flooding;
  if (s == "centralized") return Scheme::centralized;
  if (s == "similarity") return Scheme::similarity;
  if (s == "rtx") return Scheme::rtx;
  throw Error("unknown scheme: " + s);
}

struct SimConfig {
  Scheme scheme = Scheme::flooding;
  double sim_threshold = 0.5;  // similarity
  double p = 1.0;              // rtx
  double ttl_factor = 3.0;     // rtx
  double source_fraction = 0.2;
  std::size_t min_group_size = 6;
  std::uint64_t seed = 0;

  /// Sweep parameter shown in result tables.
  double param() const {
    switch (scheme) {
      case Scheme::similarity: return sim_threshold;
      case Scheme::rtx: return ttl_factor;
      default: return 0.0;
    }
  }
};

/// One-shot group message.
struct Message {
  std::size_t id = 0;
  std::size_t source = 0;            // EncounterTrace user index
  std::vector<std::size_t> targets;  // source's group minus the source, sorted
  Seconds created = 0;
};

/// Per group with at least `min_group_size` members, a seeded
/// round(source_fraction * size) (at least one) members each send one message
/// to the rest of their group.
inline std::vector<Message> make_messages(const EncounterTrace& trace, const Partition& groups, Seconds created,
                                          double source_fraction = 0.2, std::size_t min_group_size = 6,
                                          std::uint64_t seed = 0) {
  if (!(source_fraction > 0.0 && source_fraction <= 1.0)) throw Error("source_fraction must be in (0, 1]");
  std::vector<Message> out;
  const auto clusters = groups.clusters();
  for (std::size_t c = 0; c < clusters.size(); ++c) {
    if (clusters[c].size() < min_group_size) continue;
    std::vector<std::size_t> members;
    for (auto e : clusters[c]) {
      const auto u = trace.user_index(groups.elements[e]);
      if (u == trace.users.size()) throw Error("make_messages: user missing from trace population: " + groups.elements[e]);
      members.push_back(u);
    }
    std::sort(members.begin(), members.end());
    auto order = members;
    std::mt19937_64 eng(detail::mix_seed(seed, c));
    for (std::size_t k = 0; k + 1 < order.size(); ++k) {
      const auto pick = k + static_cast<std::size_t>(detail::unit_uniform(eng) * static_cast<double>(order.size() - k));
      std::swap(order[k], order[std::min(pick, order.size() - 1)]);
    }
    const auto n_src = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(source_fraction * static_cast<double>(members.size()))));
    for (std::size_t s = 0; s < n_src; ++s) {
      Message m;
      m.id = out.size();
      m.source = order[s];
      m.created = created;
      for (auto u : members)
        if (u != m.source) m.targets.push_back(u);
      out.push_back(std::move(m));
    }
  }
  return out;
}

struct SimResult {
  double delivery_ratio = 0.0;
  double mean_delay = 0.0;  // seconds, over delivered targets; NaN when none
  std::uint64_t overhead = 0;
  std::uint64_t delivered = 0;
  std::uint64_t targets = 0;
  std::uint64_t leaked = 0;  // transmissions to non-targets
  std::uint64_t hop_budget = 0;  // rtx only
};

struct SimReport {
  SimConfig config;
  std::vector<SimResult> per_message;
  SimResult aggregate;
};

/// What the forwarding rules may consult beyond the encounters.
struct SchemeInputs {
  const Partition* groups = nullptr;  // centralized
  const SimTable* sims = nullptr;     // similarity
};

namespace detail {

inline std::vector<std::size_t> map_users(const std::vector<std::string>& from, const std::vector<std::string>& to) {
  std::map<std::string, std::size_t> pos;
  for (std::size_t i = 0; i < to.size(); ++i) pos.emplace(to[i], i);
  std::vector<std::size_t> out(from.size(), to.size());
  for (std::size_t i = 0; i < from.size(); ++i)
    if (auto it = pos.find(from[i]); it != pos.end()) out[i] = it->second;
  return out;
}

}  // namespace detail

/// Replays every message over the time-ordered encounters under one
/// forwarding scheme. A node holds at most one copy of a message; each
/// (encounter, message) pair yields at most one transmission.
inline SimReport simulate(std::span<const Message> messages, const EncounterTrace& trace, const SimConfig& config,
                          const SchemeInputs& inputs = {}) {
  for (std::size_t k = 1; k < trace.encounters.size(); ++k)
    if (trace.encounters[k].start < trace.encounters[k - 1].start) throw Error("simulate: encounters unsorted");
  const std::size_t n = trace.users.size();
  constexpr auto kNoGroup = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> group_of(n, kNoGroup);
  std::vector<std::size_t> sim_index;
  switch (config.scheme) {
    case Scheme::centralized: {
      if (!inputs.groups) throw Error("simulate: centralized scheme needs a partition");
      const auto idx = detail::map_users(inputs.groups->elements, trace.users);
      for (std::size_t e = 0; e < idx.size(); ++e)
        if (idx[e] < n) group_of[idx[e]] = inputs.groups->assignment[e];
      break;
    }
    case Scheme::similarity:
      if (!inputs.sims) throw Error("simulate: similarity scheme needs a similarity table");
      if (!(config.sim_threshold >= 0.0 && config.sim_threshold <= 1.0))
        throw Error("simulate: sim_threshold must be in [0, 1]");
      sim_index = detail::map_users(trace.users, inputs.sims->users);
      break;
    case Scheme::rtx:
      if (!(config.p >= 0.0 && config.p <= 1.0)) throw Error("simulate: p must be in [0, 1]");
      if (!(config.ttl_factor > 0.0)) throw Error("simulate: ttl_factor must be positive");
      break;
    case Scheme::flooding: break;
  }
  auto similar = [&](std::size_t x, std::size_t y) {
    const auto i = sim_index[x], j = sim_index[y];
    const double s = (i < inputs.sims->size() && j < inputs.sims->size()) ? inputs.sims->mutual(i, j) : 0.0;
    return s >= config.sim_threshold;
  };

  SimReport report;
  report.config = config;
  std::vector<char> has(n), target(n);
  double delay_sum = 0.0;
  for (const auto& msg : messages) {
    std::fill(has.begin(), has.end(), 0);
    std::fill(target.begin(), target.end(), 0);
    for (auto t : msg.targets) target.at(t) = 1;
    has.at(msg.source) = 1;
    SimResult r;
    r.targets = msg.targets.size();
    double msg_delay = 0.0;
    std::size_t custodian = msg.source;
    std::uint64_t budget = 0;
    std::mt19937_64 eng(detail::mix_seed(config.seed, msg.id));
    if (config.scheme == Scheme::rtx) {
      budget = static_cast<std::uint64_t>(std::llround(config.ttl_factor * static_cast<double>(msg.targets.size() + 1)));
      r.hop_budget = budget;
    }
    for (const auto& enc : trace.encounters) {
      if (enc.end <= msg.created) continue;
      std::size_t from, to;
      if (has[enc.a] && !has[enc.b]) {
        from = enc.a;
        to = enc.b;
      } else if (has[enc.b] && !has[enc.a]) {
        from = enc.b;
        to = enc.a;
      } else {
        continue;
      }
      bool send = false;
      switch (config.scheme) {
        case Scheme::flooding: send = true; break;
        case Scheme::centralized: send = group_of[to] != kNoGroup && group_of[to] == group_of[msg.source]; break;
        case Scheme::similarity: send = similar(from, to); break;
        case Scheme::rtx:
          if (from != custodian || budget == 0) break;
          send = detail::unit_uniform(eng) < config.p;
          break;
      }
      if (!send) continue;
      const Seconds at = std::max(enc.start, msg.created);
      has[to] = 1;
      ++r.overhead;
      if (config.scheme == Scheme::rtx) {
        custodian = to;
        --budget;
      }
      if (target[to]) {
        ++r.delivered;
        msg_delay += static_cast<double>(at - msg.created);
      } else {
        ++r.leaked;
      }
    }
    r.delivery_ratio = r.targets ? static_cast<double>(r.delivered) / static_cast<double>(r.targets) : 0.0;
    r.mean_delay = r.delivered ? msg_delay / static_cast<double>(r.delivered) : std::numeric_limits<double>::quiet_NaN();
    delay_sum += msg_delay;
    auto& agg = report.aggregate;
    agg.overhead += r.overhead;
    agg.delivered += r.delivered;
    agg.targets += r.targets;
    agg.leaked += r.leaked;
    agg.hop_budget += r.hop_budget;
    report.per_message.push_back(r);
  }
  auto& agg = report.aggregate;
  agg.delivery_ratio = agg.targets ? static_cast<double>(agg.delivered) / static_cast<double>(agg.targets) : 0.0;
  agg.mean_delay = agg.delivered ? delay_sum / static_cast<double>(agg.delivered) : std::numeric_limits<double>::quiet_NaN();
  return report;
}

// ---------------------------------------------------------------------------
// Comparison tables

struct SchemeRow {
  std::string scheme;
  double param = 0.0;
  SimResult result;
};

struct NormalizedRow {
  std::string scheme;
  double param = 0.0;
  double delivery_ratio = 0.0;
  double mean_delay = 0.0;
  double overhead = 0.0;
};

/// Each scheme's metrics divided by those of the flooding run.
inline std::vector<NormalizedRow> compare_schemes(std::span<const SchemeRow> rows) {
  const SchemeRow* base = nullptr;
  for (const auto& r : rows)
    if (r.scheme == "flooding") {
      base = &r;
      break;
    }
  if (!base) throw Error("compare_schemes: flooding run missing");
  auto ratio = [](double a, double b) { return b != 0.0 ? a / b : std::numeric_limits<double>::quiet_NaN(); };
  std::vector<NormalizedRow> out;
  for (const auto& r : rows) {
    out.push_back({r.scheme, r.param, ratio(r.result.delivery_ratio, base->result.delivery_ratio),
                   ratio(r.result.mean_delay, base->result.mean_delay),
                   ratio(static_cast<double>(r.result.overhead), static_cast<double>(base->result.overhead))});
  }
  return out;
}

inline std::string scheme_rows_to_csv(std::span<const SchemeRow> rows) {
  std::string out = "scheme,param,delivery_ratio,mean_delay_s,overhead\n";
  for (const auto& r : rows)
    out += r.scheme + "," + detail::fmt9(r.param) + "," + detail::fmt9(r.result.delivery_ratio) + "," +
           detail::fmt9(r.result.mean_delay) + "," + std::to_string(r.result.overhead) + "\n";
  return out;
}

inline std::string normalized_rows_to_csv(std::span<const NormalizedRow> rows) {
  std::string out = "scheme,param,delivery_ratio,mean_delay,overhead\n";
  for (const auto& r : rows)
    out += r.scheme + "," + detail::fmt9(r.param) + "," + detail::fmt9(r.delivery_ratio) + "," +
           detail::fmt9(r.mean_delay) + "," + detail::fmt9(r.overhead) + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Scenario

/// Simulation scenario: trace split, message sourcing and the scheme runs.
struct Scenario {
  double split_fraction = 0.5;
  double source_fraction = 0.2;
  std::size_t min_group_size = 6;
  std::uint64_t seed = 0;
  std::vector<SimConfig> runs;  // flooding first
};

/// Parses a scenario. Scheme entries may carry sweeps ("thresholds",
/// "ttl_factors"); a flooding run is added when none is listed.
inline Scenario scenario_from_json(const nlohmann::json& j) {
  Scenario s;
  try {
    s.split_fraction = j.value("split_fraction", s.split_fraction);
    s.source_fraction = j.value("source_fraction", s.source_fraction);
    s.min_group_size = j.value("min_group_size", s.min_group_size);
    s.seed = j.value("seed", s.seed);
    auto base = [&](Scheme sc) {
      SimConfig c;
      c.scheme = sc;
      c.source_fraction = s.source_fraction;
      c.min_group_size = s.min_group_size;
      c.seed = s.seed;
      return c;
    };
    bool has_flooding = false;
    for (const auto& e : j.at("schemes")) {
      const auto sc = scheme_from_name(e.at("scheme").get<std::string>());
      if (sc == Scheme::flooding) {
        if (!has_flooding) s.runs.insert(s.runs.begin(), base(sc));
        has_flooding = true;
      } else if (sc == Scheme::centralized) {
        s.runs.push_back(base(sc));
      } else if (sc == Scheme::similarity) {
        auto ts = e.contains("thresholds") ? e.at("thresholds").get<std::vector<double>>()
                                           : std::vector<double>{e.value("threshold", 0.5)};
        for (double t : ts) {
          auto c = base(sc);
          c.sim_threshold = t;
          s.runs.push_back(c);
        }
      } else {
        auto ttls = e.contains("ttl_factors") ? e.at("ttl_factors").get<std::vector<double>>()
                                              : std::vector<double>{e.value("ttl_factor", 3.0)};
        for (double t : ttls) {
          auto c = base(sc);
          c.p = e.value("p", 1.0);
          c.ttl_factor = t;
          s.runs.push_back(c);
        }
      }
    }
    if (!has_flooding) s.runs.insert(s.runs.begin(), base(Scheme::flooding));
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("scenario: ") + e.what());
  }
  if (!(s.split_fraction > 0.0 && s.split_fraction < 1.0)) throw Error("scenario: split_fraction must be in (0, 1)");
  return s;
}

}  // namespace mobgroups
