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

// mobgroups command-line front end.
//
//   mobgroups synth SPEC --out DIR
//   mobgroups pipeline TRACE --out DIR [--config FILE] [--metric M] [--target K | --threshold T]
//   mobgroups simulate TRACE PIPELINE_DIR SCENARIO --out DIR
//   mobgroups compare PARTITION_A PARTITION_B

#include <openssl/evp.h>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mobgroups.hpp"

namespace fs = std::filesystem;
using namespace mobgroups;
using nlohmann::json;

namespace {

std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr)) throw Error("sha256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json load_json(const std::string& path) {
  try {
    return json::parse(slurp(path));
  } catch (const json::exception& e) {
    throw Error(path + ": " + e.what());
  }
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

// Everything a command produces is staged here and only hits the disk once
// the whole computation succeeded.
class Outputs {
 public:
  void add(std::string rel, std::string text) { files_.emplace_back(std::move(rel), std::move(text)); }

  void add_input(const std::string& path) {
    inputs_.push_back({{"file", fs::path(path).filename().string()}, {"sha256", sha256_hex(slurp(path))}});
  }

  void add_input_dir_file(const std::string& label, const std::string& content) {
    inputs_.push_back({{"file", label}, {"sha256", sha256_hex(content)}});
  }

  void commit(const std::string& out_dir, const std::string& command, const json& config, std::uint64_t seed,
              json timestamps) {
    if (const char* sde = std::getenv("SOURCE_DATE_EPOCH")) timestamps["source_date_epoch"] = sde;
    json manifest{{"tool", "mobgroups"},
                  {"version", kVersion},
                  {"command", command},
                  {"seed", seed},
                  {"config", config},
                  {"config_sha256", sha256_hex(config.dump())},
                  {"inputs", inputs_},
                  {"timestamps", timestamps}};
    auto& outs = manifest["outputs"] = json::array();
    for (const auto& [rel, text] : files_) outs.push_back({{"file", rel}, {"sha256", sha256_hex(text)}});

    fs::create_directories(out_dir);
    for (const auto& [rel, text] : files_) {
      const auto p = fs::path(out_dir) / rel;
      fs::create_directories(p.parent_path());
      detail::write_text(p.string(), text);
    }
    detail::write_text((fs::path(out_dir) / "manifest.json").string(), dump(manifest));
  }

 private:
  std::vector<std::pair<std::string, std::string>> files_;
  json inputs_ = json::array();
};

std::vector<AssociationRecord> load_trace(const std::string& trace, const std::string& locmap, Outputs& out) {
  auto records = load_records(trace);
  out.add_input(trace);
  if (!locmap.empty()) {
    records = aggregate_locations(records, load_location_map(locmap));
    out.add_input(locmap);
  }
  if (records.empty()) throw Error(trace + ": no records");
  return records;
}

// ---------------------------------------------------------------------------
// synth

struct SynthArgs {
  std::string spec;
};

void cmd_synth(const SynthArgs& a, const std::string& out_dir, std::optional<std::uint64_t> seed) {
  const auto j = load_json(a.spec);
  auto spec = synth_spec_from_json(j);
  if (seed) spec.seed = *seed;
  spec.validate();
  const auto trace = generate(spec);

  Outputs out;
  out.add_input(a.spec);
  out.add("trace.csv", records_to_csv(trace.records));
  out.add("truth.csv", truth_to_csv(trace));
  out.commit(out_dir, "synth", to_json(spec), spec.seed,
             {{"data_start", trace.trace_start}, {"data_end", trace.trace_end}});
}

// ---------------------------------------------------------------------------
// pipeline

struct PipelineArgs {
  std::string trace;
  std::string locmap;
  std::string metric;
  std::optional<std::size_t> target;
  std::optional<double> threshold;
};

struct PipelineConfig {
  TraceConfig trace;
  std::optional<double> split_fraction;
  std::string metric = "eigen";
  double power_floor = kDefaultPowerFloor;
  bool amvd_include_offline = false;
  std::optional<std::size_t> target;
  std::optional<double> threshold;
  std::size_t scatter_min_size = 5;
  std::size_t top_k = 4;
  std::size_t report_top_locations = 5;
  std::uint64_t seed = 0;

  json to_json() const {
    json j{{"trace", mobgroups::to_json(trace)},
           {"metric", metric},
           {"power_floor", power_floor},
           {"amvd_include_offline", amvd_include_offline},
           {"scatter_min_size", scatter_min_size},
           {"top_k", top_k},
           {"report_top_locations", report_top_locations},
           {"seed", seed}};
    j["split_fraction"] = split_fraction ? json(*split_fraction) : json(nullptr);
    j["stop"] = target ? json{{"target", *target}} : json{{"threshold", *threshold}};
    return j;
  }
};

PipelineConfig pipeline_config(const json& j) {
  PipelineConfig c;
  try {
    if (j.contains("trace")) update_from_json(c.trace, j.at("trace"));
    if (j.contains("split_fraction") && !j.at("split_fraction").is_null())
      c.split_fraction = j.at("split_fraction").get<double>();
    c.metric = j.value("metric", c.metric);
    c.power_floor = j.value("power_floor", c.power_floor);
    c.amvd_include_offline = j.value("amvd_include_offline", c.amvd_include_offline);
    if (j.contains("stop")) {
      const auto& s = j.at("stop");
      if (s.contains("target")) c.target = s.at("target").get<std::size_t>();
      if (s.contains("threshold")) c.threshold = s.at("threshold").get<double>();
    }
    c.scatter_min_size = j.value("scatter_min_size", c.scatter_min_size);
    c.top_k = j.value("top_k", c.top_k);
    c.report_top_locations = j.value("report_top_locations", c.report_top_locations);
    c.seed = j.value("seed", c.seed);
  } catch (const json::exception& e) {
    throw Error(std::string("pipeline config: ") + e.what());
  }
  return c;
}

DistanceMatrix pipeline_distances(const PipelineConfig& c, const MatrixSet& set,
                                  const std::vector<std::optional<EigenBehaviorSet>>& sets, json& params) {
  if (c.metric == "eigen") {
    std::vector<std::string> ids;
    for (const auto& u : set.users) ids.push_back(u.user_id);
    params["power_floor"] = c.power_floor;
    return eigen_distance_matrix(sim_table(ids, sets), sets);
  }
  if (c.metric == "amvd") {
    params["include_offline"] = c.amvd_include_offline;
    return amvd_distance_matrix(set.users, AmvdOptions{c.amvd_include_offline});
  }
  if (c.metric == "onavg") return summary_l1_distance(set.users, SummaryKind::onavg);
  if (c.metric == "centroid0.5" || c.metric == "centroid0.9") {
    params["mode_threshold"] = c.metric == "centroid0.5" ? 0.5 : 0.9;
    return summary_l1_distance(set.users, c.metric == "centroid0.5" ? SummaryKind::centroid_05 : SummaryKind::centroid_09);
  }
  throw Error("unknown metric: " + c.metric + " (expected eigen, amvd, onavg, centroid0.5 or centroid0.9)");
}

void cmd_pipeline(const PipelineArgs& a, const std::string& config_path, const std::string& out_dir,
                  std::optional<std::uint64_t> seed) {
  Outputs out;
  auto c = pipeline_config(config_path.empty() ? json::object() : load_json(config_path));
  if (!config_path.empty()) out.add_input(config_path);
  if (!a.metric.empty()) c.metric = a.metric;
  if (a.target || a.threshold) {
    c.target = a.target;
    c.threshold = a.threshold;
  }
  if (seed) c.seed = *seed;
  if (c.target && c.threshold) throw Error("give either a target cluster count or a threshold, not both");
  if (!c.target && !c.threshold) throw Error("missing stop rule: pass --target or --threshold");

  auto records = load_trace(a.trace, a.locmap, out);
  const auto span = record_span(records);
  if (c.trace.trace_end <= c.trace.trace_start) std::tie(c.trace.trace_start, c.trace.trace_end) = span;
  if (c.split_fraction) {
    // profile only the first part; the rest is left for simulate
    const auto s = split_trace(records, *c.split_fraction, std::pair{c.trace.trace_start, c.trace.trace_end});
    c.trace.trace_end = s.split;
    records = s.profile;
  }
  c.trace.validate();

  auto set = build_matrices(records, c.trace);
  json loc_index{{"config", to_json(c.trace)}, {"locations", set.locations}, {"users", json::array()}};
  for (const auto& u : set.users) {
    const auto stem = file_stem(u.user_id);
    out.add("matrices/" + stem + ".csv", matrix_to_csv(u.rows));
    loc_index["users"].push_back({{"user", u.user_id}, {"file", stem + ".csv"}});
  }
  out.add("matrices/index.json", dump(loc_index));

  const auto sets = population_eigen_sets(set.users, c.power_floor);
  for (std::size_t i = 0; i < sets.size(); ++i)
    if (sets[i]) out.add("eigen/" + file_stem(set.users[i].user_id) + ".json", dump(eigen_set_to_json(set.users[i].user_id, *sets[i])));

  json params = json::object();
  const auto dm = pipeline_distances(c, set, sets, params);
  if (dm.size() < 1) throw Error("no users left to cluster");
  out.add("distances.csv", distance_matrix_to_csv(dm));
  out.add("distances.json", dump(distance_matrix_sidecar(dm, params)));
  for (const auto& f : dm.flagged) std::cerr << "mobgroups: warning: no online slot for user " << f << "\n";

  const auto stop = c.target ? StopRule::with_count(*c.target) : StopRule::at_threshold(*c.threshold);
  const auto part = cluster_population(dm, stop);
  out.add("partition.csv", partition_to_csv(part));
  out.add("merges.csv", merges_to_csv(part));
  out.add("cdf.csv", cdfs_to_csv(distance_cdfs(part, dm.values)));

  out.add("summary_table.csv", summary_table_to_csv(summary_table(set.users)));
  out.add("scatter.csv", power_scatter_to_csv(group_power_scatter(set, part, c.scatter_min_size, c.seed, c.top_k)));

  json report;
  report["metric"] = metric_name(dm.metric);
  report["users"] = part.size();
  report["clusters"] = part.cluster_count();
  report["sizes"] = part.sizes();
  report["top10_share"] = top_groups_share(part, 10);
  try {
    report["rank_size_slope"] = rank_size_fit(part, 5);
  } catch (const Error&) {
    report["rank_size_slope"] = nullptr;
  }
  const auto cs = cross_significance(set, part);
  report["cross_significance"] = {{"own", cs.own}, {"other", cs.other}};
  std::size_t multi = 0, online = 0;
  for (const auto& u : set.users) {
    if (is_offline(u)) continue;
    ++online;
    if (modal_class(u.rows, 0.5) == ModalClass::multi_modal) ++multi;
  }
  report["multi_modal_users"] = multi;
  report["online_users"] = online;
  report["groups"] = group_report(group_profiles(set, part, c.top_k, c.power_floor), set.locations,
                                  c.report_top_locations);
  out.add("report.json", dump(report));

  out.commit(out_dir, "pipeline", c.to_json(), c.seed,
             {{"data_start", c.trace.trace_start}, {"data_end", c.trace.trace_end}});
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateArgs {
  std::string trace;
  std::string pipeline_dir;
  std::string scenario;
  std::string locmap;
};

void cmd_simulate(const SimulateArgs& a, const std::string& out_dir, std::optional<std::uint64_t> seed) {
  Outputs out;
  auto scenario = scenario_from_json(load_json(a.scenario));
  out.add_input(a.scenario);
  if (seed) {
    scenario.seed = *seed;
    for (auto& r : scenario.runs) r.seed = *seed;
  }
  const auto records = load_trace(a.trace, a.locmap, out);

  const fs::path pdir(a.pipeline_dir);
  const auto part_path = (pdir / "partition.csv").string();
  if (!fs::exists(part_path)) throw Error("missing profiles: " + part_path + " not found");
  if (!fs::is_directory(pdir / "eigen")) throw Error("missing profiles: " + (pdir / "eigen").string() + " not found");
  const auto part = load_partition(part_path);
  out.add_input_dir_file("partition.csv", slurp(part_path));

  std::vector<fs::path> eigen_files;
  for (const auto& e : fs::directory_iterator(pdir / "eigen"))
    if (e.path().extension() == ".json") eigen_files.push_back(e.path());
  std::sort(eigen_files.begin(), eigen_files.end());
  std::map<std::string, EigenBehaviorSet> by_user;
  for (const auto& f : eigen_files) {
    const auto text = slurp(f.string());
    out.add_input_dir_file("eigen/" + f.filename().string(), text);
    try {
      auto [user, set] = eigen_set_from_json(json::parse(text));
      by_user.emplace(std::move(user), std::move(set));
    } catch (const json::exception& e) {
      throw Error(f.string() + ": " + e.what());
    }
  }

  const auto split = split_trace(records, scenario.split_fraction);
  auto users = part.elements;
  std::sort(users.begin(), users.end());
  std::vector<std::optional<EigenBehaviorSet>> sets;
  for (const auto& u : users) {
    auto it = by_user.find(u);
    sets.push_back(it == by_user.end() ? std::nullopt : std::optional<EigenBehaviorSet>(it->second));
  }
  const auto sims = sim_table(users, sets);
  const auto enc = extract_encounters(split.simulation, users);
  const auto msgs =
      make_messages(enc, part, split.split, scenario.source_fraction, scenario.min_group_size, scenario.seed);
  if (msgs.empty()) std::cerr << "mobgroups: warning: no group has " << scenario.min_group_size << " members; nothing to send\n";

  std::vector<SchemeRow> rows;
  for (const auto& run : scenario.runs) {
    const auto rep = simulate(msgs, enc, run, {&part, &sims});
    rows.push_back({scheme_name(run.scheme), run.param(), rep.aggregate});
  }
  out.add("results.csv", scheme_rows_to_csv(rows));
  out.add("normalized.csv", normalized_rows_to_csv(compare_schemes(rows)));

  json cfg{{"split_fraction", scenario.split_fraction},
           {"source_fraction", scenario.source_fraction},
           {"min_group_size", scenario.min_group_size},
           {"messages", msgs.size()},
           {"encounters", enc.encounters.size()}};
  auto& runs = cfg["runs"] = json::array();
  for (const auto& r : scenario.runs)
    runs.push_back({{"scheme", scheme_name(r.scheme)}, {"sim_threshold", r.sim_threshold}, {"p", r.p},
                    {"ttl_factor", r.ttl_factor}});
  out.commit(out_dir, "simulate", cfg, scenario.seed,
             {{"data_start", split.begin}, {"split", split.split}, {"data_end", split.end}});
}

// ---------------------------------------------------------------------------
// compare

void cmd_compare(const std::string& a, const std::string& b) {
  const double j = jaccard(load_partition(a), load_partition(b));
  std::printf("%.4f\n", j);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mobility profiling, behavioral grouping and profile-based forwarding"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  std::optional<std::uint64_t> seed;
  std::string out_dir, config_path;
  auto add_globals = [&](CLI::App* sub) {
    sub->add_option("--seed", seed, "Seed for every random choice");
    sub->add_option("--out", out_dir, "Output directory");
    sub->add_option("--config", config_path, "Config JSON file")->check(CLI::ExistingFile);
  };

  SynthArgs sa;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic trace with planted groups");
  synth->add_option("spec", sa.spec, "Synthetic spec JSON")->check(CLI::ExistingFile);
  add_globals(synth);

  PipelineArgs pa;
  auto* pipe = app.add_subcommand("pipeline", "Profile users, compute distances, cluster and report");
  pipe->add_option("trace", pa.trace, "Association trace CSV (user,location,start,end)")->required();
  pipe->add_option("--locmap", pa.locmap, "Access point to building map CSV")->check(CLI::ExistingFile);
  pipe->add_option("--metric", pa.metric, "eigen, amvd, onavg, centroid0.5 or centroid0.9");
  auto* tgt = pipe->add_option("--target", pa.target, "Stop at this many clusters")->check(CLI::PositiveNumber);
  pipe->add_option("--threshold", pa.threshold, "Stop when the closest clusters are farther apart than this")
      ->excludes(tgt);
  add_globals(pipe);

  SimulateArgs ma;
  auto* simc = app.add_subcommand("simulate", "Replay group messages under each forwarding scheme");
  simc->add_option("trace", ma.trace, "Association trace CSV")->required();
  simc->add_option("pipeline_dir", ma.pipeline_dir, "Output directory of a pipeline run")->required();
  simc->add_option("scenario", ma.scenario, "Scenario JSON");
  simc->add_option("--locmap", ma.locmap, "Access point to building map CSV")->check(CLI::ExistingFile);
  add_globals(simc);

  std::string pa_a, pa_b;
  auto* cmp = app.add_subcommand("compare", "Jaccard index between two partitions");
  cmp->add_option("a", pa_a, "Partition CSV (element,cluster)")->required();
  cmp->add_option("b", pa_b, "Partition CSV (element,cluster)")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    auto need_out = [&]() {
      if (out_dir.empty()) throw Error("--out is required");
    };
    if (*synth) {
      if (sa.spec.empty()) sa.spec = config_path;
      if (sa.spec.empty()) throw Error("synth: give a spec file or --config");
      need_out();
      cmd_synth(sa, out_dir, seed);
    } else if (*pipe) {
      need_out();
      cmd_pipeline(pa, config_path, out_dir, seed);
    } else if (*simc) {
      if (ma.scenario.empty()) ma.scenario = config_path;
      if (ma.scenario.empty()) throw Error("simulate: give a scenario file or --config");
      need_out();
      cmd_simulate(ma, out_dir, seed);
    } else if (*cmp) {
      cmd_compare(pa_a, pa_b);
    }
  } catch (const std::exception& e) {
    std::cerr << "mobgroups: error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
