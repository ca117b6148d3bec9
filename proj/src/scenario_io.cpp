#include "scengen/scenario_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "scengen/errors.hpp"

namespace scengen {

using nlohmann::json;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void spill(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DomainError("cannot write " + path);
  out << text;
  if (!out) throw DomainError("write failed for " + path);
}

json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(what + ": " + e.what());
  }
}

void check_keys(const json& j, std::initializer_list<const char*> allowed,
                const std::string& where) {
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* k : allowed)
      if (item.key() == k) { known = true; break; }
    if (!known)
      throw ValidationError("unknown key '" + item.key() + "' in " + where);
  }
}

template <typename T>
void read_into(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    j.at(key).get_to(out);
  } catch (const json::exception&) {
    throw ValidationError(std::string("bad value for '") + key + "' in " + where);
  }
}

}  // namespace

void validate(const RunConfig& config) {
  if (config.map_path.empty()) throw ValidationError("config: map path is required");
  if (config.scenario_count < 1)
    throw ValidationError("config: scenario_count must be >= 1");
  if (config.workers < 0) throw ValidationError("config: workers must be >= 0");
  if (config.sample_hz < 1) throw ValidationError("config: sample_hz must be >= 1");
  if (!(config.limits.r_min > 0.0))
    throw ValidationError("config: r_min must be positive");
  if (!(config.limits.a_y_max > 0.0))
    throw ValidationError("config: a_y_max must be positive");
  if (!(config.metrics.iou_threshold >= 0.0 && config.metrics.iou_threshold < 1.0))
    throw ValidationError("config: iou_threshold must be in [0, 1)");
  if (!(config.metrics.vehicle_length > 0.0 && config.metrics.vehicle_width > 0.0))
    throw ValidationError("config: vehicle footprint must be positive");
  if (!(config.decision.cell_length > 0.0))
    throw ValidationError("config: cell_length must be positive");
  validate(config.sim);
}

RunConfig run_config_from_string(const std::string& text) {
  json j = parse_json(text, "config");
  if (!j.is_object()) throw ValidationError("config: top level must be an object");
  check_keys(j,
             {"map", "originals", "out", "scenario_count", "seed", "workers",
              "sample_hz", "sim", "decision", "limits", "metrics"},
             "config");
  RunConfig c;
  read_into(j, "map", c.map_path, "config");
  read_into(j, "originals", c.originals_path, "config");
  read_into(j, "out", c.out_dir, "config");
  read_into(j, "scenario_count", c.scenario_count, "config");
  read_into(j, "seed", c.seed, "config");
  read_into(j, "workers", c.workers, "config");
  read_into(j, "sample_hz", c.sample_hz, "config");

  if (j.contains("sim")) {
    const json& s = j.at("sim");
    check_keys(s,
               {"delta", "horizon_ticks", "n_generated", "speed_min", "speed_max",
                "behavior_mix", "prediction_horizon", "conflict_radius",
                "spawn_gap_cells", "headway_cells", "max_deferrals",
                "disable_topology", "disable_collision", "disable_smoothing"},
               "config.sim");
    read_into(s, "delta", c.sim.delta, "config.sim");
    read_into(s, "horizon_ticks", c.sim.horizon_ticks, "config.sim");
    read_into(s, "n_generated", c.sim.n_generated, "config.sim");
    read_into(s, "speed_min", c.sim.speed_min, "config.sim");
    read_into(s, "speed_max", c.sim.speed_max, "config.sim");
    read_into(s, "prediction_horizon", c.sim.prediction_horizon, "config.sim");
    read_into(s, "conflict_radius", c.sim.conflict_radius, "config.sim");
    read_into(s, "spawn_gap_cells", c.sim.spawn_gap_cells, "config.sim");
    read_into(s, "headway_cells", c.sim.headway_cells, "config.sim");
    read_into(s, "max_deferrals", c.sim.max_deferrals, "config.sim");
    read_into(s, "disable_topology", c.sim.disable_topology, "config.sim");
    read_into(s, "disable_collision", c.sim.disable_collision, "config.sim");
    read_into(s, "disable_smoothing", c.sim.disable_smoothing, "config.sim");
    if (s.contains("behavior_mix")) {
      const json& m = s.at("behavior_mix");
      check_keys(m, {"straight", "left_turn", "right_turn", "lane_change", "overtake"},
                 "config.sim.behavior_mix");
      read_into(m, "straight", c.sim.behavior_mix.straight, "behavior_mix");
      read_into(m, "left_turn", c.sim.behavior_mix.left_turn, "behavior_mix");
      read_into(m, "right_turn", c.sim.behavior_mix.right_turn, "behavior_mix");
      read_into(m, "lane_change", c.sim.behavior_mix.lane_change, "behavior_mix");
      read_into(m, "overtake", c.sim.behavior_mix.overtake, "behavior_mix");
    }
  }
  if (j.contains("decision")) {
    const json& d = j.at("decision");
    check_keys(d,
               {"d_obs", "d_safe_front", "d_safe_rear", "d_overtake", "cell_length",
                "f_left_min", "f_right_min", "lateral_cooldown"},
               "config.decision");
    read_into(d, "d_obs", c.decision.d_obs, "config.decision");
    read_into(d, "d_safe_front", c.decision.d_safe_front, "config.decision");
    read_into(d, "d_safe_rear", c.decision.d_safe_rear, "config.decision");
    read_into(d, "d_overtake", c.decision.d_overtake, "config.decision");
    read_into(d, "cell_length", c.decision.cell_length, "config.decision");
    read_into(d, "f_left_min", c.decision.f_left_min, "config.decision");
    read_into(d, "f_right_min", c.decision.f_right_min, "config.decision");
    read_into(d, "lateral_cooldown", c.decision.lateral_cooldown, "config.decision");
  }
  if (j.contains("limits")) {
    const json& l = j.at("limits");
    check_keys(l, {"r_min", "a_y_max"}, "config.limits");
    read_into(l, "r_min", c.limits.r_min, "config.limits");
    read_into(l, "a_y_max", c.limits.a_y_max, "config.limits");
  }
  if (j.contains("metrics")) {
    const json& m = j.at("metrics");
    check_keys(m, {"iou_threshold", "vehicle_length", "vehicle_width", "delta"},
               "config.metrics");
    read_into(m, "iou_threshold", c.metrics.iou_threshold, "config.metrics");
    read_into(m, "vehicle_length", c.metrics.vehicle_length, "config.metrics");
    read_into(m, "vehicle_width", c.metrics.vehicle_width, "config.metrics");
    read_into(m, "delta", c.metrics.delta, "config.metrics");
  }
  return c;
}

RunConfig load_run_config(const std::string& path) {
  return run_config_from_string(slurp(path));
}

std::string to_json_string(const RunConfig& config) {
  json j;
  j["map"] = config.map_path;
  j["originals"] = config.originals_path;
  j["out"] = config.out_dir;
  j["scenario_count"] = config.scenario_count;
  j["seed"] = config.seed;
  j["workers"] = config.workers;
  j["sample_hz"] = config.sample_hz;
  json s;
  s["delta"] = config.sim.delta;
  s["horizon_ticks"] = config.sim.horizon_ticks;
  s["n_generated"] = config.sim.n_generated;
  s["speed_min"] = config.sim.speed_min;
  s["speed_max"] = config.sim.speed_max;
  s["behavior_mix"] = {{"straight", config.sim.behavior_mix.straight},
                       {"left_turn", config.sim.behavior_mix.left_turn},
                       {"right_turn", config.sim.behavior_mix.right_turn},
                       {"lane_change", config.sim.behavior_mix.lane_change},
                       {"overtake", config.sim.behavior_mix.overtake}};
  s["prediction_horizon"] = config.sim.prediction_horizon;
  s["conflict_radius"] = config.sim.conflict_radius;
  s["spawn_gap_cells"] = config.sim.spawn_gap_cells;
  s["headway_cells"] = config.sim.headway_cells;
  s["max_deferrals"] = config.sim.max_deferrals;
  s["disable_topology"] = config.sim.disable_topology;
  s["disable_collision"] = config.sim.disable_collision;
  s["disable_smoothing"] = config.sim.disable_smoothing;
  j["sim"] = s;
  j["decision"] = {{"d_obs", config.decision.d_obs},
                   {"d_safe_front", config.decision.d_safe_front},
                   {"d_safe_rear", config.decision.d_safe_rear},
                   {"d_overtake", config.decision.d_overtake},
                   {"cell_length", config.decision.cell_length},
                   {"f_left_min", config.decision.f_left_min},
                   {"f_right_min", config.decision.f_right_min},
                   {"lateral_cooldown", config.decision.lateral_cooldown}};
  j["limits"] = {{"r_min", config.limits.r_min}, {"a_y_max", config.limits.a_y_max}};
  j["metrics"] = {{"iou_threshold", config.metrics.iou_threshold},
                  {"vehicle_length", config.metrics.vehicle_length},
                  {"vehicle_width", config.metrics.vehicle_width},
                  {"delta", config.metrics.delta}};
  return j.dump(2) + "\n";
}

// --- scenario files ---------------------------------------------------------

namespace {

const char* kPolicyLabels[] = {"straight", "left_turn", "right_turn", "lane_change",
                               "overtake"};

bool known_policy(const std::string& p) {
  for (const char* k : kPolicyLabels)
    if (p == k) return true;
  return false;
}

}  // namespace

std::string to_json_string(const ScenarioFile& scenario) {
  json j;
  j["format"] = kScenarioFormat;
  j["map"] = scenario.map_ref;
  json meta;
  meta["seed"] = scenario.seed;
  meta["generator"] = scenario.generator;
  meta["config"] = scenario.config_echo.empty()
                       ? json(nullptr)
                       : parse_json(scenario.config_echo, "config echo");
  j["metadata"] = meta;
  json agents = json::array();
  for (const ScenarioAgent& a : scenario.agents) {
    json ja;
    ja["id"] = a.id;
    ja["kind"] = a.kind;
    ja["policy"] = a.policy;
    json samples = json::array();
    for (const TrajPoint& p : a.samples)
      samples.push_back({p.t, p.position.x, p.position.y, p.speed, p.heading});
    ja["samples"] = samples;
    agents.push_back(ja);
  }
  j["agents"] = agents;
  return j.dump(2) + "\n";
}

ScenarioFile scenario_from_string(const std::string& text) {
  json j = parse_json(text, "scenario");
  if (!j.is_object() || !j.contains("format") || j.at("format") != kScenarioFormat)
    throw ValidationError("scenario: missing or unknown format tag");
  ScenarioFile s;
  read_into(j, "map", s.map_ref, "scenario");
  if (j.contains("metadata")) {
    const json& m = j.at("metadata");
    read_into(m, "seed", s.seed, "scenario.metadata");
    read_into(m, "generator", s.generator, "scenario.metadata");
    if (m.contains("config") && !m.at("config").is_null())
      s.config_echo = m.at("config").dump(2) + "\n";
  }
  if (!j.contains("agents") || !j.at("agents").is_array())
    throw ValidationError("scenario: agents array is required");
  for (const json& ja : j.at("agents")) {
    ScenarioAgent a;
    read_into(ja, "id", a.id, "scenario agent");
    read_into(ja, "kind", a.kind, "scenario agent");
    read_into(ja, "policy", a.policy, "scenario agent");
    std::string who = "agent " + std::to_string(a.id);
    if (a.kind != "original" && a.kind != "generated")
      throw ValidationError(who + ": unknown kind '" + a.kind + "'");
    if (!known_policy(a.policy))
      throw ValidationError(who + ": unknown policy '" + a.policy + "'");
    if (!ja.contains("samples") || !ja.at("samples").is_array())
      throw ValidationError(who + ": samples array is required");
    for (const json& row : ja.at("samples")) {
      if (!row.is_array() || row.size() != 5)
        throw ValidationError(who + ": each sample must be [t, x, y, v, theta]");
      TrajPoint p;
      p.t = row[0].get<double>();
      p.position = {row[1].get<double>(), row[2].get<double>()};
      p.speed = row[3].get<double>();
      p.heading = row[4].get<double>();
      if (!a.samples.empty() && !(p.t > a.samples.back().t))
        throw ValidationError(who + ": samples not strictly time-ordered");
      a.samples.push_back(p);
    }
    s.agents.push_back(std::move(a));
  }
  return s;
}

void save_scenario(const ScenarioFile& scenario, const std::string& path) {
  spill(path, to_json_string(scenario));
}

ScenarioFile load_scenario(const std::string& path) {
  try {
    return scenario_from_string(slurp(path));
  } catch (const ValidationError& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

std::vector<OriginalTrack> tracks_from_scenario(const ScenarioFile& scenario,
                                                double delta) {
  std::vector<OriginalTrack> tracks;
  for (const ScenarioAgent& a : scenario.agents) {
    if (a.samples.empty()) continue;
    OriginalTrack t;
    t.id = a.id;
    t.label = a.policy;
    t.first_tick = int(std::lround(a.samples.front().t / delta));
    for (const TrajPoint& p : a.samples) {
      t.positions.push_back(p.position);
      t.speeds.push_back(p.speed);
      t.headings.push_back(p.heading);
    }
    tracks.push_back(std::move(t));
  }
  return tracks;
}

std::vector<EvalAgent> eval_agents(const ScenarioFile& scenario) {
  std::vector<EvalAgent> out;
  out.reserve(scenario.agents.size());
  for (const ScenarioAgent& a : scenario.agents)
    out.push_back({a.id, a.kind == "generated", a.policy, a.samples});
  return out;
}

// --- generation ----------------------------------------------------------------

GenerationOutput generate_one(const MapModel& map, const RunConfig& config,
                              int scenario_index,
                              const std::vector<OriginalTrack>& originals,
                              const std::string& originals_ref) {
  RunConfig eff = config;
  eff.seed = config.seed ^ std::uint64_t(scenario_index);
  eff.scenario_count = 1;
  eff.workers = 1;
  eff.out_dir = "out";  // run-local detail, normalized so bytes are reproducible
  eff.originals_path = originals_ref;
  eff.sim.seed = eff.seed;

  ScenarioResult res = run_scenario(map, originals, eff.sim, eff.decision, eff.limits);

  ScenarioFile f;
  f.map_ref = config.map_path;
  f.seed = eff.seed;
  f.config_echo = to_json_string(eff);
  int step = std::max(1, int(std::lround(1.0 / (config.sample_hz * eff.sim.delta))));
  for (const AgentLog& log : res.agents) {
    if (log.output.empty()) continue;
    ScenarioAgent a;
    a.id = log.id;
    a.kind = log.kind == AgentKind::original ? "original" : "generated";
    a.policy = log.policy_label;
    for (size_t i = 0; i < log.output.size(); i += size_t(step))
      a.samples.push_back(log.output[i]);
    f.agents.push_back(std::move(a));
  }
  return {std::move(f), res.stats};
}

// --- reports --------------------------------------------------------------------

std::string report_table(const EvalReport& report) {
  char line[128];
  std::ostringstream out;
  out << "metric        value\n";
  auto row = [&](const char* name, double v) {
    std::snprintf(line, sizeof line, "%-13s %.3f\n", name, v);
    out << line;
  };
  row("LO (m/s^2)", report.metrics.lo);
  row("LA (m/s^2)", report.metrics.la);
  row("JE (m/s^3)", report.metrics.je);
  row("SCR", report.metrics.scr);
  row("ORR", report.metrics.orr);
  out << "scenarios     " << report.metrics.scenarios << "\n";
  out << "agents        " << report.n_agents << "\n";
  out << "skipped files " << report.skipped_files << "\n";
  for (const std::string& n : report.notes) out << "note: " << n << "\n";
  return out.str();
}

std::string report_json(const EvalReport& report) {
  json j;
  j["lo"] = report.metrics.lo;
  j["la"] = report.metrics.la;
  j["je"] = report.metrics.je;
  j["scr"] = report.metrics.scr;
  j["orr"] = report.metrics.orr;
  j["n_scenarios"] = report.metrics.scenarios;
  j["n_agents"] = report.n_agents;
  j["offroad_samples"] = report.metrics.offroad_samples;
  j["total_samples"] = report.metrics.total_samples;
  j["skipped_files"] = report.skipped_files;
  j["notes"] = report.notes;
  j["config_echo"] = report.config_echo.empty()
                         ? json(nullptr)
                         : parse_json(report.config_echo, "config echo");
  return j.dump(2) + "\n";
}

// --- distribution summaries -------------------------------------------------------

Histogram density_histogram(const std::vector<int>& agent_counts, int bin_width) {
  Histogram h;
  if (agent_counts.empty() || bin_width < 1) return h;
  int max_count = *std::max_element(agent_counts.begin(), agent_counts.end());
  int n_bins = max_count / bin_width + 1;
  std::vector<int> bins(n_bins, 0);
  for (int c : agent_counts)
    if (c >= 0) ++bins[c / bin_width];
  for (int b = 0; b < n_bins; ++b) {
    std::string label = std::to_string(b * bin_width) + "-" +
                        std::to_string((b + 1) * bin_width - 1);
    h.bins.push_back({label, bins[b]});
  }
  return h;
}

Histogram behavior_histogram(const std::vector<std::string>& labels) {
  const std::pair<const char*, const char*> kinds[] = {{"straight", "ST"},
                                                       {"left_turn", "LT"},
                                                       {"right_turn", "RT"},
                                                       {"lane_change", "LC"},
                                                       {"overtake", "OT"}};
  Histogram h;
  for (const auto& [full, shortname] : kinds) {
    int n = int(std::count(labels.begin(), labels.end(), full));
    h.bins.push_back({shortname, n});
  }
  return h;
}

std::string histogram_table(const Histogram& density, const Histogram& behavior) {
  std::ostringstream out;
  out << "scenario density (agents per scenario)\n";
  for (const auto& [label, count] : density.bins)
    out << "  " << label << (label.size() < 6 ? std::string(6 - label.size(), ' ')
                                              : " ")
        << count << "\n";
  out << "behavior mix\n";
  for (const auto& [label, count] : behavior.bins)
    out << "  " << label << "    " << count << "\n";
  return out.str();
}

std::string histogram_csv(const Histogram& density, const Histogram& behavior) {
  std::ostringstream out;
  out << "kind,bin,count\n";
  for (const auto& [label, count] : density.bins)
    out << "density," << label << "," << count << "\n";
  for (const auto& [label, count] : behavior.bins)
    out << "behavior," << label << "," << count << "\n";
  return out.str();
}

}  // namespace scengen
