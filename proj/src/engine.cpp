#include "scengen/engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>
#include <utility>

#include "scengen/errors.hpp"

namespace scengen {

void validate(const SimConfig& config) {
  if (!(config.delta > 0.0)) throw ValidationError("delta must be positive");
  if (config.horizon_ticks < 0) throw ValidationError("horizon_ticks must be >= 0");
  if (config.n_generated < 0) throw ValidationError("n_generated must be >= 0");
  if (!(config.speed_min > 0.0) || !(config.speed_max >= config.speed_min))
    throw ValidationError("speed range must satisfy 0 < speed_min <= speed_max");
  const BehaviorMix& m = config.behavior_mix;
  for (double w : {m.straight, m.left_turn, m.right_turn, m.lane_change, m.overtake})
    if (w < 0.0) throw ValidationError("behavior mix weights must be >= 0");
  if (std::abs(m.sum() - 1.0) > 1e-9)
    throw ValidationError("behavior mix must sum to 1");
  if (config.prediction_horizon < 0)
    throw ValidationError("prediction_horizon must be >= 0");
  if (config.conflict_radius < 0.0)
    throw ValidationError("conflict_radius must be >= 0");
  if (config.spawn_gap_cells < 1) throw ValidationError("spawn_gap_cells must be >= 1");
  if (config.headway_cells < 1) throw ValidationError("headway_cells must be >= 1");
  if (config.max_deferrals < 1) throw ValidationError("max_deferrals must be >= 1");
}

std::optional<int> dwell_steps(double ds_effective, double v, double delta) {
  if (!(v > 0.0)) return std::nullopt;
  double n = std::ceil(ds_effective / v / delta - 1e-9);
  return std::max(1, int(n));
}

double segment_distance(Vec2 a0, Vec2 a1, Vec2 b0, Vec2 b1) {
  Vec2 da = a1 - a0, db = b1 - b0;
  double d1 = cross(da, b0 - a0), d2 = cross(da, b1 - a0);
  double d3 = cross(db, a0 - b0), d4 = cross(db, a1 - b0);
  if (((d1 > 0) != (d2 > 0)) && ((d3 > 0) != (d4 > 0)) && d1 != 0 && d2 != 0)
    return 0.0;  // proper crossing
  auto point_seg = [](Vec2 p, Vec2 s0, Vec2 s1) {
    return dist(p, lerp(s0, s1, segment_param(s0, s1, p)));
  };
  double d = point_seg(a0, b0, b1);
  d = std::min(d, point_seg(a1, b0, b1));
  d = std::min(d, point_seg(b0, a0, a1));
  d = std::min(d, point_seg(b1, a0, a1));
  return d;
}

bool paths_conflict(const std::vector<Vec2>& a, const std::vector<Vec2>& b,
                    int horizon, double radius) {
  int steps = std::min({horizon, int(a.size()) - 1, int(b.size()) - 1});
  for (int h = 0; h < steps; ++h)
    if (segment_distance(a[h], a[h + 1], b[h], b[h + 1]) < radius) return true;
  return false;
}

namespace {

// deterministic draws on top of mt19937_64, stable across platforms
double rng_real(std::mt19937_64& g) { return double(g() >> 11) * 0x1.0p-53; }

std::uint64_t rng_below(std::mt19937_64& g, std::uint64_t n) {
  return n ? g() % n : 0;
}

double rng_range(std::mt19937_64& g, double lo, double hi) {
  return lo + (hi - lo) * rng_real(g);
}

double wrap_angle(double a) {
  while (a > M_PI) a -= 2.0 * M_PI;
  while (a < -M_PI) a += 2.0 * M_PI;
  return a;
}

// per-cell path curvature from consecutive cell headings
std::map<LaneId, std::vector<double>> cell_curvatures(const GridTopology& topo) {
  std::map<LaneId, std::vector<double>> out;
  for (const Lane& lane : topo.map().lanes) {
    const auto& cells = topo.cells(lane.id);
    std::vector<double> k(cells.size(), 0.0);
    for (size_t j = 0; j + 1 < cells.size(); ++j) {
      double ds = cells[j + 1].s_center - cells[j].s_center;
      if (ds > 1e-9)
        k[j] = std::abs(wrap_angle(cells[j + 1].heading - cells[j].heading)) / ds;
    }
    if (cells.size() > 1) k.back() = k[cells.size() - 2];
    out.emplace(lane.id, std::move(k));
  }
  return out;
}

// speed that keeps the lateral acceleration under the limit with some margin
double curvature_speed_cap(double kappa, double a_y_max) {
  if (kappa < 1e-9) return std::numeric_limits<double>::infinity();
  return std::sqrt(0.9 * a_y_max / kappa);
}

struct Sim {
  GeneratedAgent a;
  int dwell_left = 0;   // ticks until the current move completes
  int move_ticks = 0;   // total ticks of the current move
  int hold_ticks = 0;   // forced wait (deferral or zero speed)
  Vec2 move_from, move_to;
  int deferrals = 0;      // case-3 deferrals toward the reroute fallback
  int blocked_ticks = 0;  // consecutive denied claims of an active plan cell
  bool retired = false;
  bool coasting = false;  // no-topology ablation: straight past the lane end
  bool lateral_pending = false;  // the move in flight is a lateral hop
  bool did_lc = false, did_ot = false, did_lt = false, did_rt = false;
  std::vector<AgentRecord> records;
  std::vector<PathKnot> knots;
  std::vector<CellRef> cell_seq;
};

const char* final_label(const Sim& s) {
  if (s.did_ot) return "overtake";
  if (s.did_lc) return "lane_change";
  if (s.did_lt) return "left_turn";
  if (s.did_rt) return "right_turn";
  return "straight";
}

// H+1 positions at tick granularity along start -> waypoints at speed v
std::vector<Vec2> sample_route(Vec2 start, const std::vector<Vec2>& waypoints,
                               double v, int horizon, double delta) {
  std::vector<Vec2> pts{start};
  pts.insert(pts.end(), waypoints.begin(), waypoints.end());
  std::vector<Vec2> out;
  out.reserve(horizon + 1);
  double step = v * delta;
  size_t seg = 0;
  double into = 0.0;  // distance covered within pts[seg] -> pts[seg+1]
  Vec2 cur = start;
  out.push_back(cur);
  for (int h = 1; h <= horizon; ++h) {
    double remaining = step;
    while (remaining > 0.0 && seg + 1 < pts.size()) {
      double len = dist(pts[seg], pts[seg + 1]);
      double left = len - into;
      if (remaining < left) {
        into += remaining;
        remaining = 0.0;
      } else {
        remaining -= left;
        ++seg;
        into = 0.0;
      }
    }
    cur = (seg + 1 < pts.size())
              ? lerp(pts[seg], pts[seg + 1],
                     dist(pts[seg], pts[seg + 1]) > 0.0
                         ? into / dist(pts[seg], pts[seg + 1])
                         : 0.0)
              : pts.back();
    out.push_back(cur);
  }
  return out;
}

// future cell centers: the pending move, the remaining plan, then the lane ahead
std::vector<Vec2> future_waypoints(const GridTopology& topo, const Sim& s,
                                   const std::optional<CellRef>& tentative,
                                   const std::vector<CellRef>& tentative_rest,
                                   double reach) {
  std::vector<CellRef> cells;
  if (s.dwell_left > 0) cells.push_back(s.a.cell);  // mid-move target
  if (tentative) cells.push_back(*tentative);
  if (tentative) cells.insert(cells.end(), tentative_rest.begin(), tentative_rest.end());
  else cells.insert(cells.end(), s.a.maneuver_plan.begin(), s.a.maneuver_plan.end());
  if (cells.empty() && s.dwell_left == 0) return {};  // resting, treated as static
  CellRef cur = cells.empty() ? s.a.cell : cells.back();
  double acc = 0.0;
  while (acc < reach) {
    CellRef next{cur.lane, cur.index + 1};
    if (!topo.has_cell(next)) break;
    cells.push_back(next);
    acc += topo.cell(next).length;
    cur = next;
  }
  std::vector<Vec2> way;
  way.reserve(cells.size());
  for (const CellRef& c : cells) way.push_back(topo.cell(c).center);
  return way;
}

bool outranks(const ClaimRequest& a, const ClaimRequest& b) {
  if (a.executing != b.executing) return a.executing;
  if (a.distance != b.distance) return a.distance < b.distance;
  return a.agent < b.agent;
}

}  // namespace

AgentId pick_cell_winner(const std::vector<ClaimRequest>& claims) {
  const ClaimRequest* best = &claims.front();
  for (const ClaimRequest& c : claims)
    if (outranks(c, *best)) best = &c;
  return best->agent;
}

SpawnResult spawn_agents(const GridTopology& topo, OccupancyLedger& ledger,
                         const SimConfig& config, std::mt19937_64& rng,
                         AgentId first_id) {
  const MapModel& map = topo.map();

  // distance past the lane end before a turn lane of each type begins
  // (within two successor hops); infinity when unreachable
  const double inf = std::numeric_limits<double>::infinity();
  std::map<LaneId, std::map<LaneType, double>> turn_extra;
  for (const Lane& lane : map.lanes) {
    auto& e = turn_extra[lane.id];
    e[LaneType::left_turn] = e[LaneType::right_turn] = inf;
    for (const LaneId& s1 : lane.successors) {
      const Lane* l1 = map.find(s1);
      if (!l1) continue;
      if (l1->lane_type != LaneType::straight)
        e[l1->lane_type] = std::min(e[l1->lane_type], 0.0);
      for (const LaneId& s2 : l1->successors)
        if (const Lane* l2 = map.find(s2); l2 && l2->lane_type != LaneType::straight)
          e[l2->lane_type] = std::min(e[l2->lane_type], l1->length());
    }
  }
  // a turn disposition only makes sense if the turn is reachable in the run
  const double turn_reach =
      0.7 * config.speed_min * config.horizon_ticks * config.delta;

  std::vector<CellRef> candidates;
  for (const Lane& lane : map.lanes)
    for (const GridCell& c : topo.cells(lane.id)) {
      if (ledger.occupancy(c.ref) != Occupancy::free_cell) continue;
      // skip terminal cells with no exit: an agent there retires immediately
      if (!config.disable_topology && c.ref.index + 1 >= topo.cell_count(lane.id) &&
          topo.neighbors(c.ref).successors.empty())
        continue;
      candidates.push_back(c.ref);
    }
  for (size_t i = candidates.size(); i > 1; --i)
    std::swap(candidates[i - 1], candidates[rng_below(rng, i)]);

  // same-lane indices that constrain spacing: originals plus placed agents
  std::map<LaneId, std::vector<int>> taken;
  for (const auto& [ref, claim] : ledger.occupied()) {
    (void)claim;
    taken[ref.lane].push_back(ref.index);
  }
  auto spaced = [&](const CellRef& ref) {
    auto it = taken.find(ref.lane);
    if (it == taken.end()) return true;
    for (int idx : it->second)
      if (std::abs(idx - ref.index) < config.spawn_gap_cells) return false;
    return true;
  };

  auto turn_reachable = [&](const CellRef& ref, LaneType t) {
    const GridCell& cell = topo.cell(ref);
    if (cell.lane_type == t) return true;
    double extra = turn_extra[ref.lane][t];
    if (extra == inf) return false;
    return map.find(ref.lane)->length() - cell.s_center + extra <= turn_reach;
  };
  auto suitable = [&](const CellRef& ref, PolicyKind disposition) {
    int n = topo.cell_count(ref.lane);
    switch (disposition) {
      case PolicyKind::straight: return true;
      case PolicyKind::left_turn: return turn_reachable(ref, LaneType::left_turn);
      case PolicyKind::right_turn: return turn_reachable(ref, LaneType::right_turn);
      case PolicyKind::lane_change:
        return !topo.lateral_partners(ref).empty() && ref.index < n - 4;
      case PolicyKind::overtake:
        return !topo.lateral_partners(ref).empty() && ref.index < n - 8;
    }
    return true;
  };

  const BehaviorMix& mix = config.behavior_mix;
  std::vector<bool> used(candidates.size(), false);
  SpawnResult out;
  for (int i = 0; i < config.n_generated; ++i) {
    double r = rng_real(rng);
    PolicyKind disposition = PolicyKind::overtake;
    double acc = mix.straight;
    if (r < acc) disposition = PolicyKind::straight;
    else if (r < (acc += mix.left_turn)) disposition = PolicyKind::left_turn;
    else if (r < (acc += mix.right_turn)) disposition = PolicyKind::right_turn;
    else if (r < (acc += mix.lane_change)) disposition = PolicyKind::lane_change;
    double speed = rng_range(rng, config.speed_min, config.speed_max);
    int trigger = -1;
    if (disposition == PolicyKind::lane_change)
      trigger = int(rng_below(rng, std::uint64_t(config.horizon_ticks / 2 + 1)));

    int pick = -1;
    for (size_t c = 0; c < candidates.size() && pick < 0; ++c)
      if (!used[c] && spaced(candidates[c]) && suitable(candidates[c], disposition))
        pick = int(c);
    for (size_t c = 0; c < candidates.size() && pick < 0; ++c)
      if (!used[c] && spaced(candidates[c])) pick = int(c);
    if (pick < 0) {
      ++out.shortfall;
      continue;
    }

    const CellRef ref = candidates[pick];
    used[pick] = true;
    const GridCell& cell = topo.cell(ref);
    GeneratedAgent agent;
    agent.id = first_id + int(out.agents.size());
    agent.cell = ref;
    agent.disposition = disposition;
    agent.trigger_tick = trigger;
    agent.entry_speed = speed;
    agent.state.position = cell.center;
    agent.state.heading = cell.heading;
    const Lane* lane = map.find(ref.lane);
    agent.state.speed = turn_speed(speed, cell.s_center / lane->length(),
                                   cell.lane_type, DecisionParams{});
    ledger.try_claim(ref, 0, agent.id, Occupancy::generated);
    taken[ref.lane].push_back(ref.index);
    out.agents.push_back(std::move(agent));
  }
  return out;
}

ScenarioResult run_scenario(const MapModel& map,
                            const std::vector<OriginalTrack>& originals,
                            const SimConfig& config,
                            const DecisionParams& dparams,
                            const FeasibilityLimits& limits) {
  validate(config);
  GridTopology topo(map, dparams.cell_length, !config.disable_topology);
  auto curvatures = cell_curvatures(topo);
  auto cap_for = [&](const CellRef& ref) {
    return curvature_speed_cap(curvatures[ref.lane][ref.index], limits.a_y_max);
  };

  ScenarioResult result;
  ScenarioStats& stats = result.stats;
  OccupancyLedger& ledger = result.ledger;
  const OccupancyLedger blind;  // decision view when collision handling is off
  std::mt19937_64 rng(config.seed);

  std::map<AgentId, CellRef> held;
  auto rep = map_original_agents(topo, originals, 0, ledger, held);
  stats.originals_skipped_off_lane += rep.skipped_off_lane;
  stats.n_originals = int(originals.size());

  AgentId first_id = 0;
  for (const OriginalTrack& o : originals) first_id = std::max(first_id, o.id + 1);
  SpawnResult spawned = spawn_agents(topo, ledger, config, rng, first_id);
  stats.n_generated = int(spawned.agents.size());
  stats.spawn_shortfall = spawned.shortfall;
  if (config.disable_collision)  // placement only; moves are not tracked
    for (const GeneratedAgent& a : spawned.agents) ledger.release(a.cell, a.id);

  std::vector<Sim> sims;
  sims.reserve(spawned.agents.size());
  for (GeneratedAgent& a : spawned.agents) {
    Sim s;
    s.a = std::move(a);
    s.a.state.speed = std::min(s.a.state.speed, cap_for(s.a.cell));
    const GridCell& cell = topo.cell(s.a.cell);
    s.knots.push_back({0.0, cell.center, cell.ref.lane, cell.s_center, false});
    s.cell_seq.push_back(s.a.cell);
    sims.push_back(std::move(s));
  }

  auto retire = [&](Sim& s) {
    if (!config.disable_collision) ledger.release(s.a.cell, s.a.id);
    s.retired = true;
    ++stats.retired;
  };

  auto abort_plan = [&](Sim& s) {
    s.a.maneuver_plan.clear();
    s.a.policy = PolicyKind::straight;
    s.blocked_ticks = 0;
    ++stats.plan_aborts;
  };

  // arrival bookkeeping: snap the position, shape the speed, emit a knot
  auto arrive = [&](Sim& s, int t) {
    if (s.lateral_pending) {
      s.lateral_pending = false;
      s.a.straight_run = 0;
    } else {
      ++s.a.straight_run;
    }
    const GridCell& cell = topo.cell(s.a.cell);
    s.a.state.position = cell.center;
    s.a.state.heading = cell.heading;
    bool new_lane = s.knots.empty() || s.knots.back().lane != cell.ref.lane;
    if (new_lane) s.a.entry_speed = s.a.state.speed;
    if (cell.lane_type != LaneType::straight) {
      const Lane* lane = map.find(cell.ref.lane);
      s.a.state.speed = turn_speed(s.a.entry_speed, cell.s_center / lane->length(),
                                   cell.lane_type, dparams);
    }
    s.a.state.speed = std::min(s.a.state.speed, cap_for(s.a.cell));
    s.knots.push_back({t * config.delta, cell.center, cell.ref.lane, cell.s_center,
                       false});
    if (s.a.maneuver_plan.empty() &&
        (s.a.policy == PolicyKind::lane_change || s.a.policy == PolicyKind::overtake)) {
      if (s.a.policy == PolicyKind::lane_change) s.a.lane_change_done = true;
      s.a.policy = PolicyKind::straight;
    }
  };

  const double delta = config.delta;
  const int horizon = config.horizon_ticks;

  for (int t = 0; t <= horizon; ++t) {
    if (t > 0) {
      // originals move first; they are the authoritative part of the scene
      auto r = map_original_agents(topo, originals, t, ledger, held);
      stats.originals_skipped_off_lane += r.skipped_off_lane;
      for (AgentId evicted : r.evicted) {
        ++stats.evictions;
        for (Sim& s : sims) {
          if (s.a.id != evicted || s.retired) continue;
          s.dwell_left = 0;
          s.move_ticks = 0;
          if (!s.a.maneuver_plan.empty()) abort_plan(s);
          s.a.policy = PolicyKind::straight;
          if (s.cell_seq.size() >= 2) {
            CellRef prev = s.cell_seq[s.cell_seq.size() - 2];
            if (ledger.try_claim(prev, t, s.a.id, Occupancy::generated)) {
              s.a.cell = prev;
              s.cell_seq.push_back(prev);
              double back = dist(s.a.state.position, topo.cell(prev).center);
              if (back < 1e-9) {
                arrive(s, t);
              } else if (auto n = dwell_steps(back, s.a.state.speed, delta)) {
                s.move_from = s.a.state.position;
                s.move_to = topo.cell(prev).center;
                s.dwell_left = s.move_ticks = *n;
              } else {
                s.a.state.position = topo.cell(prev).center;
                arrive(s, t);
              }
              break;
            }
          }
          s.retired = true;  // cell already handed over, nothing to release
          ++stats.retired;
          break;
        }
      }

      // movement phase: dwell countdowns, holds, coasting
      for (Sim& s : sims) {
        if (s.retired) continue;
        if (s.coasting) {
          s.a.state.position = s.a.state.position +
              Vec2{std::cos(s.a.state.heading), std::sin(s.a.state.heading)} *
                  (s.a.state.speed * delta);
          continue;
        }
        if (s.hold_ticks > 0) {
          --s.hold_ticks;
          continue;
        }
        if (s.dwell_left > 0) {
          --s.dwell_left;
          if (s.dwell_left == 0) {
            arrive(s, t);
          } else {
            double frac = double(s.move_ticks - s.dwell_left) / s.move_ticks;
            s.a.state.position = lerp(s.move_from, s.move_to, frac);
          }
        }
      }
    }

    // decision phase
    if (t < horizon) {
      std::vector<int> eligible;
      for (int i = 0; i < int(sims.size()); ++i) {
        const Sim& s = sims[i];
        if (!s.retired && !s.coasting && s.dwell_left == 0 && s.hold_ticks == 0)
          eligible.push_back(i);
      }
      std::sort(eligible.begin(), eligible.end(), [&](int x, int y) {
        const GeneratedAgent& a = sims[x].a;
        const GeneratedAgent& b = sims[y].a;
        return std::tie(a.cell.lane, a.cell.index, a.id) <
               std::tie(b.cell.lane, b.cell.index, b.id);
      });

      struct Request {
        int sim;
        Decision decision;
        bool executing;
        double distance;
        bool granted = true;
      };
      std::vector<Request> requests;
      const OccupancyLedger& view = config.disable_collision ? blind : ledger;
      for (int i : eligible) {
        Sim& s = sims[i];
        auto d = decide(s.a, view, topo, t, dparams);
        if (!d) {
          if (config.disable_topology) {
            s.coasting = true;
            if (!config.disable_collision) ledger.release(s.a.cell, s.a.id);
          } else {
            retire(s);
          }
          continue;
        }
        bool executing = !s.a.maneuver_plan.empty();
        double d_target = dist(s.a.state.position, topo.cell(d->next_cell).center);
        requests.push_back({i, *d, executing, d_target});
      }

      if (!config.disable_collision) {
        // case 2: one winner per contested cell
        std::map<CellRef, std::vector<ClaimRequest>> by_cell;
        for (const Request& r : requests)
          by_cell[r.decision.next_cell].push_back(
              {sims[r.sim].a.id, r.decision.next_cell, r.executing, r.distance});
        for (Request& r : requests) {
          const auto& group = by_cell[r.decision.next_cell];
          if (group.size() > 1 && pick_cell_winner(group) != sims[r.sim].a.id) {
            r.granted = false;
            ++stats.claims_rejected;
          }
        }

        // case 3: predicted path conflicts over the next few seconds
        const int H = config.prediction_horizon;
        const double radius = config.conflict_radius;
        auto route_of = [&](const Sim& s, const std::optional<CellRef>& tentative,
                            const std::vector<CellRef>& rest) {
          double v = s.a.state.speed;
          auto way = future_waypoints(topo, s, tentative, rest, v * delta * H + radius);
          return sample_route(s.a.state.position, way, v, H, delta);
        };
        auto defer = [&](Request& r) {
          r.granted = false;
          Sim& s = sims[r.sim];
          auto n = dwell_steps(topo.cell(r.decision.next_cell).length,
                               s.a.state.speed, delta);
          s.hold_ticks = n ? *n : 1;
          ++s.deferrals;
          ++stats.deferrals;
          if (s.deferrals >= config.max_deferrals) {
            s.deferrals = 0;
            s.a.suppress_lane_change = true;
            if (s.a.disposition == PolicyKind::lane_change ||
                s.a.disposition == PolicyKind::overtake)
              s.a.disposition = PolicyKind::straight;
            if (!s.a.maneuver_plan.empty()) abort_plan(s);
            ++stats.reroutes;
          }
        };
        std::vector<std::vector<Vec2>> routes(requests.size());
        for (size_t i = 0; i < requests.size(); ++i) {
          const Request& r = requests[i];
          std::vector<CellRef> rest;
          if (r.executing) {
            const auto& plan = sims[r.sim].a.maneuver_plan;
            rest.assign(plan.begin() + 1, plan.end());
          } else {
            const auto& plan = r.decision.plan;
            if (!plan.empty()) rest.assign(plan.begin() + 1, plan.end());
          }
          routes[i] = route_of(sims[r.sim], r.decision.next_cell, rest);
        }
        // requesters versus committed traffic: mid-move agents and originals
        for (size_t i = 0; i < requests.size(); ++i) {
          Request& r = requests[i];
          if (!r.granted) continue;
          const Sim& self = sims[r.sim];
          double reach = (self.a.state.speed + config.speed_max) * delta * H + radius;
          for (const Sim& other : sims) {
            if (other.a.id == self.a.id || other.retired || other.coasting) continue;
            if (other.dwell_left == 0) continue;  // resting agents are static
            if (dist(self.a.state.position, other.a.state.position) > reach) continue;
            auto route = route_of(other, std::nullopt, {});
            if (paths_conflict(routes[i], route, H, radius)) {
              defer(r);
              break;
            }
          }
          if (!r.granted) continue;
          for (const OriginalTrack& o : originals) {
            if (!o.alive_at(t)) continue;
            if (dist(self.a.state.position, o.position_at(t)) > reach) continue;
            std::vector<Vec2> route(H + 1);
            for (int h = 0; h <= H; ++h) {
              int tt = std::min(t + h, o.first_tick + int(o.positions.size()) - 1);
              route[h] = o.alive_at(tt) ? o.position_at(tt) : o.positions.back();
            }
            if (paths_conflict(routes[i], route, H, radius)) {
              defer(r);
              break;
            }
          }
        }
        // requester pairs: the lower-ranked claim defers
        for (size_t i = 0; i < requests.size(); ++i) {
          if (!requests[i].granted) continue;
          for (size_t j = i + 1; j < requests.size(); ++j) {
            if (!requests[i].granted) break;
            if (!requests[j].granted) continue;
            const Sim& a = sims[requests[i].sim];
            const Sim& b = sims[requests[j].sim];
            double reach = (a.a.state.speed + b.a.state.speed) * delta * H + radius;
            if (dist(a.a.state.position, b.a.state.position) > reach) continue;
            if (!paths_conflict(routes[i], routes[j], H, radius)) continue;
            ClaimRequest ca{a.a.id, requests[i].decision.next_cell,
                            requests[i].executing, requests[i].distance};
            ClaimRequest cb{b.a.id, requests[j].decision.next_cell,
                            requests[j].executing, requests[j].distance};
            defer(outranks(ca, cb) ? requests[j] : requests[i]);
          }
        }
      }

      // grant phase: headway gate, ledger claim, move start
      for (Request& r : requests) {
        if (!r.granted) continue;
        Sim& s = sims[r.sim];
        const CellRef target = r.decision.next_cell;
        auto n = dwell_steps(
            target.lane == s.a.cell.lane ? topo.cell(target).length
                                         : dist(s.a.state.position,
                                                topo.cell(target).center),
            s.a.state.speed, delta);
        if (!n) {  // zero speed: hold a tick and try again
          s.hold_ticks = 1;
          continue;
        }
        bool ok = true;
        if (!config.disable_collision) {
          // headway gate: the cells directly ahead of the target, following
          // successor links across lane ends, must be free
          std::vector<CellRef> frontier{target};
          for (int k = 1; k < config.headway_cells && ok; ++k) {
            std::vector<CellRef> next;
            for (const CellRef& c : frontier) {
              CellRef fwd{c.lane, c.index + 1};
              if (topo.has_cell(fwd)) next.push_back(fwd);
              else for (const CellRef& sc : topo.neighbors(c).successors)
                next.push_back(sc);
            }
            for (const CellRef& c : next)
              if (ledger.occupancy(c) != Occupancy::free_cell &&
                  ledger.owner(c) != std::optional<AgentId>(s.a.id))
                ok = false;
            frontier = std::move(next);
          }
          if (ok) ok = ledger.try_claim(target, t, s.a.id, Occupancy::generated);
        }
        if (!ok) {
          ++stats.claims_rejected;
          if (r.executing) {
            ++s.blocked_ticks;
            if (s.blocked_ticks >= 3) abort_plan(s);
          }
          continue;
        }
        s.blocked_ticks = 0;
        CellRef from = s.a.cell;
        if (!config.disable_collision && target != from) ledger.release(from, s.a.id);
        // a rest before this move gets its own knot, so the fitted s(t)
        // stands still through the rest instead of smearing the motion
        // into a multi-second crawl
        if (target != from && !s.knots.empty() &&
            t * delta > s.knots.back().t + 0.5 * delta) {
          PathKnot k = s.knots.back();
          k.t = t * delta;
          k.lateral_join_next = false;
          s.knots.push_back(k);
        }
        // a lateral hop is any lane switch that is not a successor link
        bool via_successor = false;
        if (target.lane != from.lane) {
          for (const CellRef& c : topo.neighbors(from).successors)
            if (c == target) via_successor = true;
          if (!via_successor) {
            s.lateral_pending = true;
            if (!s.knots.empty()) s.knots.back().lateral_join_next = true;
          }
        }
        if (!s.a.maneuver_plan.empty() && s.a.maneuver_plan.front() == target)
          s.a.maneuver_plan.pop_front();
        else if (!r.decision.plan.empty()) {
          s.a.maneuver_plan.assign(r.decision.plan.begin() + 1,
                                   r.decision.plan.end());
          if (r.decision.policy == PolicyKind::lane_change) s.did_lc = true;
          if (r.decision.policy == PolicyKind::overtake) s.did_ot = true;
        }
        s.a.policy = r.decision.policy;
        if (r.decision.policy == PolicyKind::left_turn) s.did_lt = true;
        if (r.decision.policy == PolicyKind::right_turn) s.did_rt = true;
        if (target != from) {
          s.move_from = s.a.state.position;
          s.move_to = topo.cell(target).center;
          s.a.cell = target;
          s.cell_seq.push_back(target);
          s.dwell_left = s.move_ticks = *n;
        }
      }
    }

    // record the tick for every active generated agent
    for (Sim& s : sims) {
      if (s.retired) continue;
      double speed = s.a.state.speed;
      double heading = s.a.state.heading;
      if (s.dwell_left > 0) {
        speed = dist(s.move_from, s.move_to) / (s.move_ticks * delta);
        Vec2 dir = s.move_to - s.move_from;
        if (norm(dir) > 1e-9) heading = std::atan2(dir.y, dir.x);
      } else if (!s.coasting) {
        speed = 0.0;  // holding, blocked, or between moves: not moving this tick
      }
      s.records.push_back({t, s.a.state.position, speed, heading});
    }

    // co-occupancy audit (and the ablation overlap counter)
    {
      std::map<CellRef, int> counts;
      for (const Sim& s : sims)
        if (!s.retired && !s.coasting) ++counts[s.a.cell];
      for (const auto& [id, cell] : held) {
        (void)id;
        ++counts[cell];
      }
      for (const auto& [cell, k] : counts) {
        (void)cell;
        if (k > 1) stats.grid_overlaps += k - 1;
      }
    }

    ledger.commit_tick(t);
  }

  // assemble the logs: originals first, then generated agents
  std::vector<const OriginalTrack*> sorted_originals;
  for (const OriginalTrack& o : originals) sorted_originals.push_back(&o);
  std::sort(sorted_originals.begin(), sorted_originals.end(),
            [](const OriginalTrack* a, const OriginalTrack* b) { return a->id < b->id; });
  for (const OriginalTrack* o : sorted_originals) {
    AgentLog log;
    log.id = o->id;
    log.kind = AgentKind::original;
    log.policy_label = o->label;
    int n = int(o->positions.size());
    for (int i = 0; i < n; ++i) {
      int tick = o->first_tick + i;
      if (tick > horizon) break;
      double speed;
      if (i < int(o->speeds.size())) speed = o->speeds[i];
      else {
        int j = std::max(1, i);
        speed = (j < n) ? dist(o->positions[j], o->positions[j - 1]) / delta : 0.0;
      }
      double heading;
      if (i < int(o->headings.size())) heading = o->headings[i];
      else {
        int j = std::min(i + 1, n - 1);
        Vec2 d = o->positions[j] - o->positions[std::max(0, j - 1)];
        heading = norm(d) > 1e-9 ? std::atan2(d.y, d.x) : 0.0;
      }
      log.records.push_back({tick, o->positions[i], speed, heading});
      log.output.push_back({tick * delta, o->positions[i], speed, heading});
    }
    ++stats.policy_counts[log.policy_label];
    result.agents.push_back(std::move(log));
  }

  for (Sim& s : sims) {
    // a trailing knot covers any hold at the end of the run
    if (!s.retired && !s.coasting && s.dwell_left == 0 && !s.knots.empty() &&
        !s.records.empty() &&
        dist(s.records.back().position, s.knots.back().position) < 1e-9 &&
        s.records.back().tick * delta > s.knots.back().t + 0.5 * delta) {
      PathKnot k = s.knots.back();
      k.t = s.records.back().tick * delta;
      k.lateral_join_next = false;
      s.knots.push_back(k);
    }
    AgentLog log;
    log.id = s.a.id;
    log.kind = AgentKind::generated;
    log.policy_label = final_label(s);
    log.records = std::move(s.records);
    log.knots = s.knots;
    auto raw_output = [&]() {
      std::vector<TrajPoint> pts;
      pts.reserve(log.records.size());
      for (const AgentRecord& r : log.records)
        pts.push_back({r.tick * delta, r.position, r.speed, r.heading});
      return pts;
    };
    if (config.disable_smoothing || s.coasting || s.knots.size() < 2) {
      log.output = raw_output();
    } else {
      SmoothResult sm = smooth_path(s.knots, map, limits, delta);
      if (sm.unsmoothable) {
        log.unsmoothable = true;
        ++stats.unsmoothable;
        log.output = raw_output();
      } else {
        log.output = std::move(sm.points);
        stats.scaled_segments += sm.scaled_segments;
        // feasibility rescaling stretches time; the log still ends at the horizon
        while (!log.output.empty() &&
               log.output.back().t > horizon * delta + 1e-9)
          log.output.pop_back();
      }
    }
    ++stats.policy_counts[log.policy_label];
    result.agents.push_back(std::move(log));
  }

  return result;
}

}  // namespace scengen
