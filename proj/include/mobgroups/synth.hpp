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

#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "mobgroups/common.hpp"
#include "mobgroups/trace_model.hpp"

namespace mobgroups {

/// One behavioral mode: a location-weight vector and how often it is chosen.
struct ModeSpec {
  std::vector<double> weights;  // n_locations entries summing to 1
  double probability = 1.0;
};

struct GroupSpec {
  int size = 1;
  std::vector<ModeSpec> modes;
  double p_online = 1.0;
};

/// Generative description of a synthetic campus trace with planted groups.
struct SynthSpec {
  int n_locations = 1;
  int n_days = 1;
  std::vector<GroupSpec> groups;
  std::uint64_t seed = 0;
  double noise_epsilon = 0.0;

  Seconds start_epoch = 0;
  Seconds session_start = 8 * 3600;     // seconds after midnight
  Seconds session_jitter = 0;           // uniform extra delay in [0, jitter]
  Seconds online_seconds = 8 * 3600;    // association time per online day

  void validate() const {
    if (n_locations <= 0) throw Error("synth: n_locations must be positive");
    if (n_days <= 0) throw Error("synth: n_days must be positive");
    if (groups.empty()) throw Error("synth: at least one group is required");
    if (!(noise_epsilon >= 0.0 && noise_epsilon <= 0.5)) throw Error("synth: noise_epsilon must be in [0, 0.5]");
    if (online_seconds <= 0) throw Error("synth: online_seconds must be positive");
    if (session_start < 0 || session_jitter < 0 ||
        session_start + session_jitter + online_seconds > kSecondsPerDay)
      throw Error("synth: session does not fit in one day");
    for (std::size_t g = 0; g < groups.size(); ++g) {
      const auto& gs = groups[g];
      const auto tag = "synth: group " + std::to_string(g) + ": ";
      if (gs.size < 1) throw Error(tag + "size must be >= 1");
      if (!(gs.p_online >= 0.0 && gs.p_online <= 1.0)) throw Error(tag + "p_online must be in [0, 1]");
      if (gs.modes.empty()) throw Error(tag + "at least one mode is required");
      double psum = 0.0;
      for (const auto& m : gs.modes) {
        if (m.weights.size() != static_cast<std::size_t>(n_locations))
          throw Error(tag + "mode vector length must equal n_locations");
        double wsum = 0.0;
        for (double w : m.weights) {
          if (!(w >= 0.0)) throw Error(tag + "mode weights must be non-negative");
          wsum += w;
        }
        if (std::abs(wsum - 1.0) > 1e-9) throw Error(tag + "mode weights must sum to 1");
        if (!(m.probability >= 0.0)) throw Error(tag + "mode probability must be non-negative");
        psum += m.probability;
      }
      if (std::abs(psum - 1.0) > 1e-9) throw Error(tag + "mode probabilities must sum to 1");
    }
  }

  int total_users() const {
    int n = 0;
    for (const auto& g : groups) n += g.size;
    return n;
  }
};

struct SynthTrace {
  std::vector<AssociationRecord> records;
  std::vector<std::pair<std::string, int>> truth;  // user -> group index
  Seconds trace_start = 0;
  Seconds trace_end = 0;
};

inline std::string synth_user_id(int k) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "u%05d", k);
  return buf;
}

inline std::string synth_location_id(int k) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "L%03d", k);
  return buf;
}

namespace detail {

// Integer split of `total` proportional to `w` (largest remainder, ties to
// the lower index). Exact when every w_i * total is an integer.
inline std::vector<Seconds> apportion(const std::vector<double>& w, Seconds total) {
  std::vector<Seconds> out(w.size());
  std::vector<std::pair<double, std::size_t>> rem;
  Seconds used = 0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double exact = w[i] * static_cast<double>(total);
    const double fl = std::floor(exact + 1e-9);
    out[i] = static_cast<Seconds>(fl);
    used += out[i];
    rem.emplace_back(exact - fl, i);
  }
  std::stable_sort(rem.begin(), rem.end(), [](auto& a, auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; used < total && k < rem.size(); ++k) {
    if (w[rem[k].second] <= 0.0) continue;
    ++out[rem[k].second];
    ++used;
  }
  return out;
}

}  // namespace detail

/// Draws a trace from `spec`. Users are numbered u00000.. in group order;
/// every user draws from its own sub-seeded engine.
inline SynthTrace generate(const SynthSpec& spec) {
  spec.validate();
  SynthTrace out;
  out.trace_start = spec.start_epoch;
  out.trace_end = spec.start_epoch + static_cast<Seconds>(spec.n_days) * kSecondsPerDay;
  int user = 0;
  const auto n = static_cast<std::size_t>(spec.n_locations);
  for (std::size_t g = 0; g < spec.groups.size(); ++g) {
    const auto& gs = spec.groups[g];
    for (int member = 0; member < gs.size; ++member, ++user) {
      const auto uid = synth_user_id(user);
      out.truth.emplace_back(uid, static_cast<int>(g));
      std::mt19937_64 eng(detail::mix_seed(spec.seed, static_cast<std::uint64_t>(user)));
      for (int day = 0; day < spec.n_days; ++day) {
        // draws happen in a fixed order whether or not they are used
        const double online_draw = detail::unit_uniform(eng);
        const double mode_draw = detail::unit_uniform(eng);
        const double jitter_draw = detail::unit_uniform(eng);
        std::vector<double> noise(n);
        for (auto& v : noise) v = detail::unit_uniform(eng);
        if (!(online_draw < gs.p_online)) continue;

        std::size_t mode = 0;
        double acc = 0.0;
        for (; mode + 1 < gs.modes.size(); ++mode) {
          acc += gs.modes[mode].probability;
          if (mode_draw < acc) break;
        }
        std::vector<double> w = gs.modes[mode].weights;
        if (spec.noise_epsilon > 0.0) {
          double sum = 0.0;
          for (std::size_t i = 0; i < n; ++i) {
            w[i] = std::max(0.0, w[i] + spec.noise_epsilon * (2.0 * noise[i] - 1.0));
            sum += w[i];
          }
          if (sum > 0.0)
            for (auto& v : w) v /= sum;
          else
            w = gs.modes[mode].weights;
        }
        const auto durations = detail::apportion(w, spec.online_seconds);
        const Seconds jitter = static_cast<Seconds>(jitter_draw * static_cast<double>(spec.session_jitter + 1));
        Seconds t = spec.start_epoch + static_cast<Seconds>(day) * kSecondsPerDay + spec.session_start +
                    std::min(jitter, spec.session_jitter);
        for (std::size_t i = 0; i < n; ++i) {
          if (durations[i] <= 0) continue;
          out.records.push_back({uid, synth_location_id(static_cast<int>(i)), t, t + durations[i]});
          t += durations[i];
        }
      }
    }
  }
  return out;
}

inline std::string truth_to_csv(const SynthTrace& trace) {
  std::string out = "user,group\n";
  for (const auto& [u, g] : trace.truth) out += u + "," + std::to_string(g) + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// JSON

namespace detail {

inline std::vector<double> mode_weights_from_json(const nlohmann::json& j, int n_locations) {
  std::vector<double> w(static_cast<std::size_t>(std::max(n_locations, 0)), 0.0);
  if (j.is_array()) {
    w.clear();
    for (const auto& v : j) w.push_back(v.get<double>());
    return w;
  }
  if (j.is_object()) {
    // sparse form: {"3": 0.75, "7": 0.25}
    for (const auto& [k, v] : j.items()) {
      std::int64_t idx;
      if (!parse_int(k, idx) || idx < 0 || idx >= n_locations) throw Error("synth: bad location index " + k);
      w[static_cast<std::size_t>(idx)] = v.get<double>();
    }
    return w;
  }
  throw Error("synth: mode weights must be an array or an object");
}

}  // namespace detail

/// Parses a SynthSpec; the result is validated.
inline SynthSpec synth_spec_from_json(const nlohmann::json& j) {
  SynthSpec s;
  try {
    s.n_locations = j.at("n_locations").get<int>();
    s.n_days = j.at("n_days").get<int>();
    s.seed = j.value("seed", std::uint64_t{0});
    s.noise_epsilon = j.value("noise_epsilon", 0.0);
    s.start_epoch = j.value("start_epoch", Seconds{0});
    s.session_start = j.value("session_start", s.session_start);
    s.session_jitter = j.value("session_jitter", s.session_jitter);
    s.online_seconds = j.value("online_seconds", s.online_seconds);
    for (const auto& gj : j.at("groups")) {
      GroupSpec g;
      g.size = gj.at("size").get<int>();
      g.p_online = gj.value("p_online", 1.0);
      for (const auto& mj : gj.at("modes")) {
        ModeSpec m;
        m.weights = detail::mode_weights_from_json(mj.at("weights"), s.n_locations);
        m.probability = mj.value("probability", 1.0);
        g.modes.push_back(std::move(m));
      }
      s.groups.push_back(std::move(g));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("synth spec: ") + e.what());
  }
  s.validate();
  return s;
}

inline nlohmann::json to_json(const SynthSpec& s) {
  nlohmann::json j;
  j["n_locations"] = s.n_locations;
  j["n_days"] = s.n_days;
  j["seed"] = s.seed;
  j["noise_epsilon"] = s.noise_epsilon;
  j["start_epoch"] = s.start_epoch;
  j["session_start"] = s.session_start;
  j["session_jitter"] = s.session_jitter;
  j["online_seconds"] = s.online_seconds;
  auto& groups = j["groups"] = nlohmann::json::array();
  for (const auto& g : s.groups) {
    nlohmann::json gj{{"size", g.size}, {"p_online", g.p_online}, {"modes", nlohmann::json::array()}};
    for (const auto& m : g.modes) gj["modes"].push_back({{"weights", m.weights}, {"probability", m.probability}});
    groups.push_back(std::move(gj));
  }
  return j;
}

/// A mode placing weights on a few locations, zero elsewhere.
inline ModeSpec sparse_mode(int n_locations, std::initializer_list<std::pair<int, double>> entries,
                            double probability = 1.0) {
  ModeSpec m;
  m.weights.assign(static_cast<std::size_t>(n_locations), 0.0);
  for (auto [loc, w] : entries) m.weights.at(static_cast<std::size_t>(loc)) = w;
  m.probability = probability;
  return m;
}

}  // namespace mobgroups
