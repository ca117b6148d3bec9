#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>
#include <string>

#include "scengen/gridify.hpp"
#include "scengen/policy.hpp"

using namespace scengen;

namespace {

MapModel corridor_map() {
  return load_map_from_string(R"({"lanes": [
    {"id": "c0", "centerline": [[0,0],[120,0]], "left_neighbor": "c1"},
    {"id": "c1", "centerline": [[0,3.5],[120,3.5]], "right_neighbor": "c0",
     "left_neighbor": "c2"},
    {"id": "c2", "centerline": [[0,7],[120,7]], "right_neighbor": "c1"}
  ]})", "inline");
}

// a straight lane that forks into left-turn, straight, and right-turn lanes
MapModel fork_map() {
  return load_map_from_string(R"({"lanes": [
    {"id": "M", "centerline": [[0,0],[40,0]],
     "successors": ["FL", "FS", "FR"]},
    {"id": "FL", "centerline": [[40,0],[60,20]], "lane_type": "left_turn",
     "predecessors": ["M"]},
    {"id": "FS", "centerline": [[40,0],[80,0]], "predecessors": ["M"]},
    {"id": "FR", "centerline": [[40,0],[60,-20]], "lane_type": "right_turn",
     "predecessors": ["M"]}
  ]})", "inline");
}

GeneratedAgent agent_at(const GridTopology& topo, const CellRef& cell,
                        double speed = 8.0) {
  GeneratedAgent a;
  a.id = 1;
  a.cell = cell;
  a.state.position = topo.cell(cell).center;
  a.state.speed = speed;
  a.state.heading = topo.cell(cell).heading;
  a.straight_run = 100;  // far from any previous lateral hop
  return a;
}

}  // namespace

TEST_CASE("turn speed dips mid-turn and recovers") {
  DecisionParams params;
  CHECK(turn_speed(10.0, 0.0, LaneType::left_turn, params) == doctest::Approx(10.0));
  CHECK(turn_speed(10.0, 1.0, LaneType::left_turn, params) == doctest::Approx(10.0));
  CHECK(turn_speed(10.0, 0.5, LaneType::left_turn, params) == doctest::Approx(5.0));
  CHECK(turn_speed(10.0, 0.5, LaneType::right_turn, params) == doctest::Approx(7.5));
  CHECK(turn_speed(10.0, 0.3, LaneType::straight, params) == doctest::Approx(10.0));
  // out-of-range progress clamps
  CHECK(turn_speed(10.0, -0.5, LaneType::left_turn, params) == doctest::Approx(10.0));
  CHECK(turn_speed(10.0, 1.5, LaneType::left_turn, params) == doctest::Approx(10.0));
}

TEST_CASE("right turns always keep more speed than left turns") {
  DecisionParams params;
  for (int i = 1; i < 1000; ++i) {
    double alpha = i / 1000.0;
    CHECK(turn_speed(10.0, alpha, LaneType::right_turn, params) >
          turn_speed(10.0, alpha, LaneType::left_turn, params));
  }
}

TEST_CASE("straight speed is the identity") {
  CHECK(straight_speed(8.0) == 8.0);
  CHECK(straight_speed(0.0) == 0.0);
  CHECK(straight_speed(31.4) == 31.4);
}

TEST_CASE("blocker scan is bounded by the observation range") {
  MapModel map = corridor_map();
  GridTopology topo(map);
  OccupancyLedger ledger;
  DecisionParams params;  // d_obs 30 m = 7 cells
  GeneratedAgent a = agent_at(topo, {"c0", 5});
  CHECK(blocker_ahead(a, ledger, topo, params) == -1);
  ledger.try_claim({"c0", 7}, 0, 9, Occupancy::generated);
  CHECK(blocker_ahead(a, ledger, topo, params) == 7);
  ledger.release({"c0", 7}, 9);
  ledger.try_claim({"c0", 13}, 0, 9, Occupancy::generated);  // 8 cells out
  CHECK(blocker_ahead(a, ledger, topo, params) == -1);
}

TEST_CASE("lane change needs a free neighborhood") {
  MapModel map = corridor_map();
  GridTopology topo(map);
  OccupancyLedger ledger;
  DecisionParams params;
  GeneratedAgent a = agent_at(topo, {"c0", 5});
  auto target = lane_change_feasible(a, ledger, topo, params);
  REQUIRE(target.has_value());
  CHECK(*target == CellRef{"c1", 6});

  // any occupied cell among indices j-1, j, j+1 of the target lane blocks it
  for (int k = -1; k <= 1; ++k) {
    ledger.try_claim({"c1", 5 + k}, 0, 9, Occupancy::generated);
    CHECK(!lane_change_feasible(a, ledger, topo, params).has_value());
    ledger.release({"c1", 5 + k}, 9);
  }
}

TEST_CASE("lane change needs room to finish") {
  MapModel map = corridor_map();
  GridTopology topo(map);
  OccupancyLedger ledger;
  DecisionParams params;  // completion needs 2 cells + 10 m beyond index j+1
  GeneratedAgent near_end = agent_at(topo, {"c0", 28});  // 120 m lane, 30 cells
  CHECK(!lane_change_feasible(near_end, ledger, topo, params).has_value());
  GeneratedAgent mid = agent_at(topo, {"c0", 24});
  CHECK(lane_change_feasible(mid, ledger, topo, params).has_value());
}

TEST_CASE("the middle lane prefers its left neighbor") {
  MapModel map = corridor_map();
  GridTopology topo(map);
  OccupancyLedger ledger;
  DecisionParams params;
  GeneratedAgent a = agent_at(topo, {"c1", 5});
  auto target = lane_change_feasible(a, ledger, topo, params);
  REQUIRE(target.has_value());
  CHECK(target->lane == "c2");
  // with the left side blocked the right one qualifies
  ledger.try_claim({"c2", 5}, 0, 9, Occupancy::generated);
  target = lane_change_feasible(a, ledger, topo, params);
  REQUIRE(target.has_value());
  CHECK(target->lane == "c0");
}

TEST_CASE("overtake plans enter, pass, and return past the blocker") {
  MapModel map = corridor_map();
  GridTopology topo(map);
  OccupancyLedger ledger;
  DecisionParams params;
  GeneratedAgent a = agent_at(topo, {"c0", 5});
  int blocker = 7;
  ledger.try_claim({"c0", blocker}, 0, 9, Occupancy::generated);
  auto plan = overtake_feasible(a, blocker, ledger, topo, params);
  REQUIRE(!plan.empty());
  // lateral entry at the same index, return in the original lane past the blocker
  CHECK(plan.front() == CellRef{"c1", 5});
  CHECK(plan.back().lane == "c0");
  CHECK(plan.back().index > blocker);
  for (size_t i = 1; i + 1 < plan.size(); ++i) {
    CHECK(plan[i].lane == "c1");
    CHECK(plan[i].index == 5 + int(i));
  }
}

TEST_CASE("overtaking needs a long-enough corridor") {
  MapModel map = corridor_map();
  GridTopology topo(map);
  OccupancyLedger ledger;
  DecisionParams params;  // d_overtake 20 m = 5 cells
  GeneratedAgent a = agent_at(topo, {"c0", 5});
  ledger.try_claim({"c0", 7}, 0, 9, Occupancy::generated);
  // free corridor of only 4 cells beside us: 16 m < 20 m
  ledger.try_claim({"c1", 9}, 0, 10, Occupancy::generated);
  CHECK(overtake_feasible(a, 7, ledger, topo, params).empty());
  ledger.release({"c1", 9}, 10);
  CHECK(!overtake_feasible(a, 7, ledger, topo, params).empty());
}

TEST_CASE("overtaking needs safe gaps in the target lane") {
  MapModel map = corridor_map();
  GridTopology topo(map);
  OccupancyLedger ledger;
  DecisionParams params;  // d_safe_rear 8 m
  GeneratedAgent a = agent_at(topo, {"c0", 5});
  ledger.try_claim({"c0", 7}, 0, 9, Occupancy::generated);
  // an agent one cell behind in the overtaking lane: 4 m < 8 m
  ledger.try_claim({"c1", 4}, 0, 11, Occupancy::generated);
  CHECK(overtake_feasible(a, 7, ledger, topo, params).empty());
  ledger.release({"c1", 4}, 11);
  ledger.try_claim({"c1", 2}, 0, 11, Occupancy::generated);  // 12 m back
  CHECK(!overtake_feasible(a, 7, ledger, topo, params).empty());
}

TEST_CASE("overtake plans on fuzzed ledgers always return past the blocker") {
  MapModel map = corridor_map();
  GridTopology topo(map);
  DecisionParams params;
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int> cell_pick(0, 29), count_pick(0, 12);
  int plans_seen = 0;
  for (int trial = 0; trial < 400; ++trial) {
    OccupancyLedger ledger;
    int n = count_pick(rng);
    for (int i = 0; i < n; ++i) {
      int lane = cell_pick(rng) % 3;
      ledger.try_claim({lane == 0 ? "c0" : lane == 1 ? "c1" : "c2", cell_pick(rng)},
                       0, 50 + i, Occupancy::generated);
    }
    GeneratedAgent a = agent_at(topo, {"c0", cell_pick(rng)});
    int blocker = blocker_ahead(a, ledger, topo, params);
    if (blocker < 0) continue;
    auto plan = overtake_feasible(a, blocker, ledger, topo, params);
    if (plan.empty()) continue;
    ++plans_seen;
    CHECK(plan.back().lane == a.cell.lane);
    CHECK(plan.back().index > blocker);
    // every planned cell is free right now
    for (const CellRef& c : plan)
      CHECK(ledger.occupancy(c) == Occupancy::free_cell);
  }
  CHECK(plans_seen > 0);
}

TEST_CASE("an active plan runs before anything else") {
  MapModel map = corridor_map();
  GridTopology topo(map);
  OccupancyLedger ledger;
  DecisionParams params;
  GeneratedAgent a = agent_at(topo, {"c0", 5});
  a.policy = PolicyKind::overtake;
  a.maneuver_plan = {CellRef{"c1", 5}, CellRef{"c1", 6}};
  auto d = decide(a, ledger, topo, 0, params);
  REQUIRE(d.has_value());
  CHECK(d->next_cell == CellRef{"c1", 5});
  CHECK(d->policy == PolicyKind::overtake);
}

TEST_CASE("the lane-change branch waits for its trigger") {
  MapModel map = corridor_map();
  GridTopology topo(map);
  OccupancyLedger ledger;
  DecisionParams params;
  GeneratedAgent a = agent_at(topo, {"c0", 5});
  a.disposition = PolicyKind::lane_change;
  a.trigger_tick = 10;
  auto before = decide(a, ledger, topo, 9, params);
  REQUIRE(before.has_value());
  CHECK(before->policy == PolicyKind::straight);
  CHECK(before->next_cell == CellRef{"c0", 6});
  auto after = decide(a, ledger, topo, 10, params);
  REQUIRE(after.has_value());
  CHECK(after->policy == PolicyKind::lane_change);
  CHECK(after->next_cell == CellRef{"c1", 6});
  REQUIRE(after->plan.size() == 1);
  CHECK(after->plan[0] == CellRef{"c1", 6});
}

TEST_CASE("one disposition buys one lane change") {
  MapModel map = corridor_map();
  GridTopology topo(map);
  OccupancyLedger ledger;
  DecisionParams params;
  GeneratedAgent a = agent_at(topo, {"c0", 5});
  a.disposition = PolicyKind::lane_change;
  a.trigger_tick = 0;
  a.lane_change_done = true;
  auto d = decide(a, ledger, topo, 5, params);
  REQUIRE(d.has_value());
  CHECK(d->policy == PolicyKind::straight);
}

TEST_CASE("a recent lateral hop suppresses new maneuvers") {
  MapModel map = corridor_map();
  GridTopology topo(map);
  OccupancyLedger ledger;
  DecisionParams params;
  GeneratedAgent a = agent_at(topo, {"c0", 5});
  a.disposition = PolicyKind::lane_change;
  a.trigger_tick = 0;
  a.straight_run = params.lateral_cooldown - 1;
  auto d = decide(a, ledger, topo, 5, params);
  REQUIRE(d.has_value());
  CHECK(d->policy == PolicyKind::straight);
  a.straight_run = params.lateral_cooldown;
  d = decide(a, ledger, topo, 5, params);
  REQUIRE(d.has_value());
  CHECK(d->policy == PolicyKind::lane_change);

  // the overtake branch honors the same cooldown
  GeneratedAgent b = agent_at(topo, {"c0", 5});
  b.disposition = PolicyKind::overtake;
  b.straight_run = params.lateral_cooldown - 1;
  ledger.try_claim({"c0", 7}, 0, 9, Occupancy::generated);
  d = decide(b, ledger, topo, 5, params);
  REQUIRE(d.has_value());
  CHECK(d->policy == PolicyKind::straight);
  b.straight_run = params.lateral_cooldown;
  d = decide(b, ledger, topo, 5, params);
  REQUIRE(d.has_value());
  CHECK(d->policy == PolicyKind::overtake);
}

TEST_CASE("a blocked agent without dispositions rolls forward") {
  MapModel map = corridor_map();
  GridTopology topo(map);
  OccupancyLedger ledger;
  DecisionParams params;
  ledger.try_claim({"c0", 7}, 0, 9, Occupancy::generated);
  GeneratedAgent a = agent_at(topo, {"c0", 5});
  auto d = decide(a, ledger, topo, 0, params);
  REQUIRE(d.has_value());
  CHECK(d->next_cell == CellRef{"c0", 6});
  CHECK(d->policy == PolicyKind::straight);
}

TEST_CASE("a lane end without successors is terminal") {
  MapModel map = corridor_map();
  GridTopology topo(map);
  OccupancyLedger ledger;
  DecisionParams params;
  GeneratedAgent a = agent_at(topo, {"c0", 29});
  CHECK(!decide(a, ledger, topo, 0, params).has_value());
}

TEST_CASE("forks pick the successor matching the disposition") {
  MapModel map = fork_map();
  GridTopology topo(map);
  OccupancyLedger ledger;
  DecisionParams params;
  GeneratedAgent a = agent_at(topo, {"M", 9});

  a.disposition = PolicyKind::left_turn;
  auto d = decide(a, ledger, topo, 0, params);
  REQUIRE(d.has_value());
  CHECK(d->next_cell.lane == "FL");
  CHECK(d->policy == PolicyKind::left_turn);

  a.disposition = PolicyKind::right_turn;
  d = decide(a, ledger, topo, 0, params);
  REQUIRE(d.has_value());
  CHECK(d->next_cell.lane == "FR");
  CHECK(d->policy == PolicyKind::right_turn);

  a.disposition = PolicyKind::straight;
  d = decide(a, ledger, topo, 0, params);
  REQUIRE(d.has_value());
  CHECK(d->next_cell.lane == "FS");
  CHECK(d->policy == PolicyKind::straight);
}

TEST_CASE("decisions are deterministic and stay on the grid") {
  MapModel map = corridor_map();
  GridTopology topo(map);
  DecisionParams params;
  std::mt19937_64 rng(13);
  std::uniform_int_distribution<int> cell_pick(0, 29), disp_pick(0, 4);
  for (int trial = 0; trial < 300; ++trial) {
    OccupancyLedger ledger;
    for (int i = 0; i < 8; ++i) {
      int lane = cell_pick(rng) % 3;
      ledger.try_claim({lane == 0 ? "c0" : lane == 1 ? "c1" : "c2", cell_pick(rng)},
                       0, 50 + i, Occupancy::generated);
    }
    GeneratedAgent a = agent_at(topo, {"c1", cell_pick(rng)});
    a.disposition = static_cast<PolicyKind>(disp_pick(rng));
    a.trigger_tick = 0;
    auto d1 = decide(a, ledger, topo, 3, params);
    auto d2 = decide(a, ledger, topo, 3, params);
    REQUIRE(d1.has_value() == d2.has_value());
    if (!d1) continue;
    CHECK(d1->next_cell == d2->next_cell);
    CHECK(d1->policy == d2->policy);
    // the step target is one topology link away
    const CellRef& from = a.cell;
    const CellRef& to = d1->next_cell;
    bool forward = to.lane == from.lane && to.index == from.index + 1;
    bool lateral = false;
    for (const CellRef& c : topo.lateral_partners(from))
      if (c.lane == to.lane && (to.index == from.index || to.index == from.index + 1))
        lateral = true;
    bool successor = false;
    for (const CellRef& c : topo.neighbors(from).successors)
      if (c == to) successor = true;
    CHECK((forward || lateral || successor));
  }
}
