#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "scengen/frenet.hpp"
#include "scengen/gridify.hpp"
#include "scengen/policy.hpp"

namespace scengen {

struct BehaviorMix {
  double straight = 0.4;
  double left_turn = 0.1;
  double right_turn = 0.1;
  double lane_change = 0.2;
  double overtake = 0.2;

  double sum() const {
    return straight + left_turn + right_turn + lane_change + overtake;
  }
};

struct SimConfig {
  double delta = 0.1;        // s per tick
  int horizon_ticks = 110;   // 11 s at 10 Hz
  std::uint64_t seed = 0;
  int n_generated = 20;
  double speed_min = 5.0;    // m/s
  double speed_max = 10.0;   // m/s
  BehaviorMix behavior_mix;
  int prediction_horizon = 30;   // ticks of forward conflict checking
  double conflict_radius = 2.7;  // m between predicted path segments
  int spawn_gap_cells = 2;       // same-lane spacing at spawn
  int headway_cells = 2;         // free cells required ahead of a claim
  int max_deferrals = 3;         // deferrals before the reroute fallback
  bool disable_topology = false;
  bool disable_collision = false;
  bool disable_smoothing = false;
};

// throws ValidationError when a field is out of range or the mix is off
void validate(const SimConfig& config);

enum class AgentKind { original, generated };

struct AgentRecord {
  int tick{};
  Vec2 position;
  double speed{};
  double heading{};
};

struct AgentLog {
  AgentId id{};
  AgentKind kind = AgentKind::generated;
  std::string policy_label = "straight";
  std::vector<AgentRecord> records;  // discrete grid path, one per active tick
  std::vector<TrajPoint> output;     // smoothed unless smoothing is disabled
  std::vector<PathKnot> knots;
  bool unsmoothable = false;
};

struct ScenarioStats {
  int n_generated = 0;
  int n_originals = 0;
  int spawn_shortfall = 0;
  std::map<std::string, int> policy_counts;  // final per-agent labels
  int claims_rejected = 0;
  int deferrals = 0;
  int reroutes = 0;
  int evictions = 0;
  int plan_aborts = 0;
  int retired = 0;
  int unsmoothable = 0;
  int scaled_segments = 0;
  int grid_overlaps = 0;  // co-occupied (cell, tick) pairs; zero unless
                          // collision handling is disabled
  int originals_skipped_off_lane = 0;
};

struct ScenarioResult {
  std::vector<AgentLog> agents;  // originals first, then generated, id order
  ScenarioStats stats;
  OccupancyLedger ledger;        // full history for audits
};

// --- pieces exposed for direct testing ------------------------------------

// ceil((ds_effective / v) / delta); nullopt asks the caller to hold one tick
std::optional<int> dwell_steps(double ds_effective, double v, double delta);

struct SpawnResult {
  std::vector<GeneratedAgent> agents;
  int shortfall = 0;
};

// Fills free cells with generated agents: same-lane spacing, disposition and
// trigger-tick draws, curvature-capped initial speeds.  Deterministic for a
// fixed rng state.
SpawnResult spawn_agents(const GridTopology& topo, OccupancyLedger& ledger,
                         const SimConfig& config, std::mt19937_64& rng,
                         AgentId first_id);

struct ClaimRequest {
  AgentId agent{};
  CellRef target;
  bool executing = false;  // mid-maneuver claims outrank fresh ones
  double distance = 0.0;   // from the agent to the target center
};

// winner under (executing, closer, smaller id); claims must be non-empty
AgentId pick_cell_winner(const std::vector<ClaimRequest>& claims);

// minimal distance between two segments; intersecting segments give 0
double segment_distance(Vec2 a0, Vec2 a1, Vec2 b0, Vec2 b1);

// true when two predicted tick-synchronous paths come within `radius` of
// each other during the first `horizon` steps
bool paths_conflict(const std::vector<Vec2>& a, const std::vector<Vec2>& b,
                    int horizon, double radius);

// --- the full pipeline -----------------------------------------------------

ScenarioResult run_scenario(const MapModel& map,
                            const std::vector<OriginalTrack>& originals,
                            const SimConfig& config,
                            const DecisionParams& dparams,
                            const FeasibilityLimits& limits);

}  // namespace scengen
