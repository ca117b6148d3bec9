#pragma once

#include <deque>
#include <optional>
#include <vector>

#include "scengen/gridify.hpp"

namespace scengen {

enum class PolicyKind { straight, left_turn, right_turn, lane_change, overtake };

const char* to_string(PolicyKind p);
std::optional<PolicyKind> policy_from_string(const std::string& s);

struct AgentState {
  Vec2 position;
  double speed{};    // m/s
  double heading{};  // rad
};

struct DecisionParams {
  double d_obs = 30.0;          // m, forward observation range
  double d_safe_front = 10.0;   // m, required gap ahead in the target lane
  double d_safe_rear = 8.0;     // m, required gap behind in the target lane
  double d_overtake = 20.0;     // m, required free corridor for an overtake
  double cell_length = kDefaultCellLength;
  double f_left_min = 0.5;      // left-turn speed factor at mid-turn
  double f_right_min = 0.75;    // right-turn speed factor at mid-turn
  int lateral_cooldown = 3;     // forward moves required between lateral hops
};

struct GeneratedAgent {
  AgentId id{};
  AgentState state;
  CellRef cell;
  PolicyKind policy = PolicyKind::straight;
  PolicyKind disposition = PolicyKind::straight;  // drawn at spawn, gates maneuvers
  int trigger_tick = -1;          // lane-change trigger; -1 means never
  bool lane_change_done = false;  // a disposition buys one lane change
  std::deque<CellRef> maneuver_plan;  // pending overtake/lane-change cells
  double entry_speed{};           // speed on entering the current lane
  bool suppress_lane_change = false;  // set after repeated deferrals ("reroute")
  int straight_run = 0;           // forward arrivals since the last lateral hop
};

struct Decision {
  CellRef next_cell;
  PolicyKind policy = PolicyKind::straight;
  std::vector<CellRef> plan;  // full cell sequence when a new maneuver starts
};

// --- speed shaping ---------------------------------------------------------

// v0 * f(alpha) where f dips to the configured minimum at mid-turn and is 1 at
// both ends; alpha is progress through the lane, clamped to [0, 1]
double turn_speed(double v0, double alpha, LaneType lane_type,
                  const DecisionParams& params);

double straight_speed(double v);

// --- maneuver feasibility ----------------------------------------------------

// Diagonal target in an adjacent same-direction lane.  Requires the three
// neighborhood cells (indices j-1, j, j+1) of the target lane to be free and
// enough remaining lane beyond the current index.  The left neighbor is
// preferred when both sides qualify.
std::optional<CellRef> lane_change_feasible(const GeneratedAgent& agent,
                                            const OccupancyLedger& ledger,
                                            const GridTopology& topo,
                                            const DecisionParams& params);

// Full overtake plan: lateral entry, passing cells in the overtaking lane,
// and the return cell past the blocker.  Empty when any of the three
// conditions (free lane, safe gaps, long-enough corridor) fails.
std::vector<CellRef> overtake_feasible(const GeneratedAgent& agent, int blocker_index,
                                       const OccupancyLedger& ledger,
                                       const GridTopology& topo,
                                       const DecisionParams& params);

// index of the nearest occupied cell ahead in the agent's lane within d_obs,
// or -1 when the stretch is clear
int blocker_ahead(const GeneratedAgent& agent, const OccupancyLedger& ledger,
                  const GridTopology& topo, const DecisionParams& params);

// --- the decision rule --------------------------------------------------------

// One (next_cell, policy) pair per call, or nullopt when the agent has reached
// a lane end with no successor.  Priority: active maneuver plan, lane change
// at the trigger tick, overtake past a blocker, then the lane-type default.
std::optional<Decision> decide(const GeneratedAgent& agent,
                               const OccupancyLedger& ledger,
                               const GridTopology& topo, int tick,
                               const DecisionParams& params);

}  // namespace scengen
