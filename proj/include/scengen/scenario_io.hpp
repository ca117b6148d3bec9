#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "scengen/engine.hpp"
#include "scengen/metrics.hpp"

namespace scengen {

inline constexpr const char* kScenarioFormat = "scenario-v1";
inline constexpr const char* kGeneratorVersion = "scengen 0.1.0";

// --- run configuration -------------------------------------------------------

// Everything a generation or evaluation run needs; echoed verbatim into every
// output file so any output can be re-derived from its own metadata.
struct RunConfig {
  std::string map_path;
  std::string originals_path;  // scenario file or directory; empty for none
  std::string out_dir = "out";
  int scenario_count = 1;
  std::uint64_t seed = 0;
  int workers = 1;  // 0 picks the hardware concurrency
  int sample_hz = 10;
  SimConfig sim;
  DecisionParams decision;
  FeasibilityLimits limits;
  MetricParams metrics;
};

void validate(const RunConfig& config);  // throws ValidationError

RunConfig run_config_from_string(const std::string& text);
RunConfig load_run_config(const std::string& path);
std::string to_json_string(const RunConfig& config);  // canonical form

// --- scenario files ------------------------------------------------------------

struct ScenarioAgent {
  int id{};
  std::string kind = "generated";  // "original" or "generated"
  std::string policy = "straight";
  std::vector<TrajPoint> samples;  // strictly time-ordered
};

struct ScenarioFile {
  std::string map_ref;             // path of the map the scenario was built on
  std::uint64_t seed = 0;
  std::string generator = kGeneratorVersion;
  std::string config_echo;         // canonical RunConfig JSON
  std::vector<ScenarioAgent> agents;
};

std::string to_json_string(const ScenarioFile& scenario);
ScenarioFile scenario_from_string(const std::string& text);
void save_scenario(const ScenarioFile& scenario, const std::string& path);
ScenarioFile load_scenario(const std::string& path);

// recorded tracks for replay: every agent of the file becomes an original
std::vector<OriginalTrack> tracks_from_scenario(const ScenarioFile& scenario,
                                                double delta);

std::vector<EvalAgent> eval_agents(const ScenarioFile& scenario);

// --- generation ------------------------------------------------------------------

struct GenerationOutput {
  ScenarioFile file;
  ScenarioStats stats;
};

// One deterministic scenario: seed = config.seed xor index.  `originals_ref`
// names the originals file replayed into this scenario (echoed so the output
// regenerates from its own metadata alone).
GenerationOutput generate_one(const MapModel& map, const RunConfig& config,
                              int scenario_index,
                              const std::vector<OriginalTrack>& originals,
                              const std::string& originals_ref);

// --- reports -------------------------------------------------------------------

struct EvalReport {
  DatasetMetrics metrics;
  int n_agents = 0;
  int skipped_files = 0;
  std::vector<std::string> notes;  // one line per skipped file
  std::string config_echo;
};

std::string report_table(const EvalReport& report);  // human-readable
std::string report_json(const EvalReport& report);   // machine-readable

// --- distribution summaries ------------------------------------------------------

struct Histogram {
  std::vector<std::pair<std::string, int>> bins;  // ordered label -> count
};

// contiguous bins of `bin_width` agents from zero to the densest scenario
Histogram density_histogram(const std::vector<int>& agent_counts, int bin_width = 10);

// fixed-order behavior bins ST/LT/RT/LC/OT
Histogram behavior_histogram(const std::vector<std::string>& labels);

std::string histogram_table(const Histogram& density, const Histogram& behavior);
// plot-ready rows: kind,bin,count
std::string histogram_csv(const Histogram& density, const Histogram& behavior);

}  // namespace scengen
