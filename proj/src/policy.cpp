#include "scengen/policy.hpp"

#include <algorithm>
#include <cmath>

namespace scengen {

const char* to_string(PolicyKind p) {
  switch (p) {
    case PolicyKind::straight: return "straight";
    case PolicyKind::left_turn: return "left_turn";
    case PolicyKind::right_turn: return "right_turn";
    case PolicyKind::lane_change: return "lane_change";
    case PolicyKind::overtake: return "overtake";
  }
  return "straight";
}

std::optional<PolicyKind> policy_from_string(const std::string& s) {
  if (s == "straight") return PolicyKind::straight;
  if (s == "left_turn") return PolicyKind::left_turn;
  if (s == "right_turn") return PolicyKind::right_turn;
  if (s == "lane_change") return PolicyKind::lane_change;
  if (s == "overtake") return PolicyKind::overtake;
  return std::nullopt;
}

double turn_speed(double v0, double alpha, LaneType lane_type,
                  const DecisionParams& params) {
  alpha = std::clamp(alpha, 0.0, 1.0);
  double f_min = 1.0;
  switch (lane_type) {
    case LaneType::left_turn: f_min = params.f_left_min; break;
    case LaneType::right_turn: f_min = params.f_right_min; break;
    case LaneType::straight: return v0;
  }
  return v0 * (1.0 - (1.0 - f_min) * std::sin(M_PI * alpha));
}

double straight_speed(double v) { return v; }

namespace {

bool cell_free(const OccupancyLedger& ledger, const GridTopology& topo,
               const LaneId& lane, int index) {
  CellRef ref{lane, index};
  if (!topo.has_cell(ref)) return true;  // beyond the lane counts as empty space
  return ledger.occupancy(ref) == Occupancy::free_cell;
}

int obs_cell_range(const DecisionParams& params) {
  return int(params.d_obs / params.cell_length);
}

int front_gap_cells(const DecisionParams& params) {
  return std::max(1, int(std::ceil(params.d_safe_front / params.cell_length - 1e-9)));
}

}  // namespace

int blocker_ahead(const GeneratedAgent& agent, const OccupancyLedger& ledger,
                  const GridTopology& topo, const DecisionParams& params) {
  int n = topo.cell_count(agent.cell.lane);
  int k_max = obs_cell_range(params);
  for (int k = 1; k <= k_max; ++k) {
    int j = agent.cell.index + k;
    if (j >= n) break;
    if (ledger.occupancy({agent.cell.lane, j}) != Occupancy::free_cell) return j;
  }
  return -1;
}

std::optional<CellRef> lane_change_feasible(const GeneratedAgent& agent,
                                            const OccupancyLedger& ledger,
                                            const GridTopology& topo,
                                            const DecisionParams& params) {
  int j = agent.cell.index;
  for (const CellRef& side : topo.lateral_partners(agent.cell)) {
    const Lane* target_lane = topo.map().find(side.lane);
    if (!target_lane) continue;
    bool clear = true;
    for (int k = -1; k <= 1; ++k)
      if (!cell_free(ledger, topo, side.lane, j + k)) { clear = false; break; }
    if (!clear) continue;
    double remaining = target_lane->length() - (j + 1) * params.cell_length;
    if (!(remaining > 2.0 * params.cell_length + params.d_safe_front)) continue;
    CellRef target{side.lane, j + 1};
    if (!topo.has_cell(target)) continue;
    return target;
  }
  return std::nullopt;
}

std::vector<CellRef> overtake_feasible(const GeneratedAgent& agent, int blocker_index,
                                       const OccupancyLedger& ledger,
                                       const GridTopology& topo,
                                       const DecisionParams& params) {
  const LaneId& lane = agent.cell.lane;
  int j = agent.cell.index;
  int k_b = blocker_index - j;
  if (k_b < 1) return {};
  int k_ret = k_b + front_gap_cells(params);
  CellRef return_cell{lane, j + k_ret};
  if (!topo.has_cell(return_cell)) return {};
  if (ledger.occupancy(return_cell) != Occupancy::free_cell) return {};

  for (const CellRef& side : topo.lateral_partners(agent.cell)) {
    int n_side = topo.cell_count(side.lane);
    if (j >= n_side) continue;

    // condition 1: a free corridor in the overtaking lane, starting beside us
    int m = 0;
    while (j + m < n_side &&
           ledger.occupancy({side.lane, j + m}) == Occupancy::free_cell)
      ++m;
    if (m == 0) continue;

    // condition 2: safe gaps around the entry cell
    int ahead = -1;
    for (int i = j + 1; i < n_side; ++i)
      if (ledger.occupancy({side.lane, i}) != Occupancy::free_cell) { ahead = i; break; }
    if (ahead >= 0 && (ahead - j) * params.cell_length < params.d_safe_front) continue;
    int behind = -1;
    for (int i = j - 1; i >= 0; --i)
      if (ledger.occupancy({side.lane, i}) != Occupancy::free_cell) { behind = i; break; }
    if (behind >= 0 && (j - behind) * params.cell_length < params.d_safe_rear) continue;

    // condition 3: the corridor is long enough and covers the passing stretch
    if (m * params.cell_length < params.d_overtake) continue;
    if (m < k_ret) continue;

    std::vector<CellRef> plan;
    plan.reserve(k_ret + 1);
    for (int i = 0; i < k_ret; ++i) plan.push_back({side.lane, j + i});
    plan.push_back(return_cell);
    return plan;
  }
  return {};
}

namespace {

PolicyKind policy_for_lane(LaneType t) {
  switch (t) {
    case LaneType::left_turn: return PolicyKind::left_turn;
    case LaneType::right_turn: return PolicyKind::right_turn;
    case LaneType::straight: break;
  }
  return PolicyKind::straight;
}

// deterministic successor choice: the disposition's turn direction first,
// then a straight continuation, then file order
std::optional<CellRef> pick_successor(const GeneratedAgent& agent,
                                      const GridTopology& topo) {
  auto succ = topo.neighbors(agent.cell).successors;
  if (succ.empty()) return std::nullopt;
  auto wanted = [&](LaneType t) -> std::optional<CellRef> {
    for (const CellRef& c : succ)
      if (topo.map().find(c.lane)->lane_type == t) return c;
    return std::nullopt;
  };
  if (agent.disposition == PolicyKind::left_turn)
    if (auto c = wanted(LaneType::left_turn)) return c;
  if (agent.disposition == PolicyKind::right_turn)
    if (auto c = wanted(LaneType::right_turn)) return c;
  if (auto c = wanted(LaneType::straight)) return c;
  return succ.front();
}

}  // namespace

std::optional<Decision> decide(const GeneratedAgent& agent,
                               const OccupancyLedger& ledger,
                               const GridTopology& topo, int tick,
                               const DecisionParams& params) {
  // an active maneuver runs to completion before anything else is considered
  if (!agent.maneuver_plan.empty())
    return Decision{agent.maneuver_plan.front(), agent.policy, {}};

  // back-to-back lateral hops would zig-zag tighter than the curvature
  // budget allows; require a straight run in between
  bool lateral_ok = agent.straight_run >= params.lateral_cooldown;

  if (agent.disposition == PolicyKind::lane_change && !agent.lane_change_done &&
      !agent.suppress_lane_change && lateral_ok && agent.trigger_tick >= 0 &&
      tick >= agent.trigger_tick) {
    if (auto target = lane_change_feasible(agent, ledger, topo, params))
      return Decision{*target, PolicyKind::lane_change, {*target}};
  }

  int blocker = blocker_ahead(agent, ledger, topo, params);
  if (blocker >= 0) {
    if (agent.disposition == PolicyKind::overtake && lateral_ok) {
      auto plan = overtake_feasible(agent, blocker, ledger, topo, params);
      if (!plan.empty()) return Decision{plan.front(), PolicyKind::overtake, plan};
    }
    CellRef forward{agent.cell.lane, agent.cell.index + 1};
    if (!topo.has_cell(forward)) {
      auto succ = pick_successor(agent, topo);
      if (!succ) return std::nullopt;
      forward = *succ;
    }
    return Decision{forward, PolicyKind::straight, {}};
  }

  CellRef forward{agent.cell.lane, agent.cell.index + 1};
  if (!topo.has_cell(forward)) {
    auto succ = pick_successor(agent, topo);
    if (!succ) return std::nullopt;  // lane end, nowhere to go
    forward = *succ;
  }
  return Decision{forward, policy_for_lane(topo.cell(forward).lane_type), {}};
}

}  // namespace scengen
