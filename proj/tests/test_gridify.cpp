#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <string>

#include "scengen/errors.hpp"
#include "scengen/gridify.hpp"

using namespace scengen;

namespace {

// a single straight lane of the requested length along the x-axis
MapModel straight_map(double length) {
  std::ostringstream os;
  os.precision(17);
  os << R"({"lanes": [{"id": "L", "centerline": [[0,0],[)" << length
     << R"(,0]]}]})";
  return load_map_from_string(os.str(), "inline");
}

MapModel corridor_map() {
  return load_map_from_string(R"({"lanes": [
    {"id": "c0", "centerline": [[0,0],[40,0]], "left_neighbor": "c1"},
    {"id": "c1", "centerline": [[0,3.5],[40,3.5]], "right_neighbor": "c0",
     "left_neighbor": "c2"},
    {"id": "c2", "centerline": [[0,7],[40,7]], "right_neighbor": "c1"}
  ]})", "inline");
}

MapModel chain_map() {
  return load_map_from_string(R"({"lanes": [
    {"id": "A", "centerline": [[0,0],[20,0]], "successors": ["B"]},
    {"id": "B", "centerline": [[20,0],[40,0]], "predecessors": ["A"]}
  ]})", "inline");
}

}  // namespace

TEST_CASE("an exact-multiple lane splits into uniform cells") {
  MapModel map = straight_map(40.0);
  GridTopology topo(map);
  REQUIRE(topo.cell_count("L") == 10);
  for (const GridCell& c : topo.cells("L")) {
    CHECK(c.length == doctest::Approx(4.0));
    CHECK(c.s_center == doctest::Approx((c.ref.index + 0.5) * 4.0));
  }
}

TEST_CASE("the final cell absorbs the remainder") {
  MapModel map = straight_map(41.0);
  GridTopology topo(map);
  REQUIRE(topo.cell_count("L") == 11);
  CHECK(topo.cells("L").back().length == doctest::Approx(1.0));
  CHECK(topo.cells("L").back().s_center == doctest::Approx(40.5));
}

TEST_CASE("a short lane still gets one cell") {
  MapModel map = straight_map(2.0);
  GridTopology topo(map);
  REQUIRE(topo.cell_count("L") == 1);
  CHECK(topo.cells("L")[0].length == doctest::Approx(2.0));
}

TEST_CASE("cell length must be positive") {
  MapModel map = straight_map(40.0);
  CHECK_THROWS_AS(GridTopology(map, 0.0), DomainError);
  CHECK_THROWS_AS(GridTopology(map, -1.0), DomainError);
}

TEST_CASE("random lane lengths gridify exactly") {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> len(2.0, 500.0);
  for (int i = 0; i < 1000; ++i) {
    double L = len(rng);
    MapModel map = straight_map(L);
    GridTopology topo(map);
    int expect = int(std::ceil(L / 4.0));
    REQUIRE(topo.cell_count("L") == expect);
    double sum = 0.0;
    for (const GridCell& c : topo.cells("L")) {
      CHECK(c.length > 0.0);
      CHECK(c.length <= 4.0 + 1e-12);
      sum += c.length;
    }
    CHECK(std::abs(sum - L) < 1e-9);
  }
}

TEST_CASE("cell centers lie on the centerline") {
  MapModel map = load_map_from_string(R"({"lanes": [
    {"id": "bend", "centerline": [[0,0],[10,0],[10,10],[25,10]]}
  ]})", "inline");
  GridTopology topo(map);
  const Lane& lane = map.lanes[0];
  for (const GridCell& c : topo.cells("bend")) {
    Vec2 expect = point_at_arclength(lane.arc, lane.centerline, c.s_center);
    CHECK(dist(c.center, expect) < 1e-6);
  }
}

TEST_CASE("neighbors returns forward, lateral, and successor links") {
  MapModel map = corridor_map();
  GridTopology topo(map);
  CellNeighbors mid = topo.neighbors({"c0", 3});
  REQUIRE(mid.forward.has_value());
  CHECK(*mid.forward == CellRef{"c0", 4});
  CHECK(mid.successors.empty());
  CellNeighbors last = topo.neighbors({"c0", 9});
  CHECK(!last.forward.has_value());

  // middle lane sees both sides, left first
  auto partners = topo.lateral_partners({"c1", 5});
  REQUIRE(partners.size() == 2);
  CHECK(partners[0] == CellRef{"c2", 5});
  CHECK(partners[1] == CellRef{"c0", 5});

  // lateral links are symmetric
  auto back = topo.lateral_partners({"c2", 5});
  REQUIRE(back.size() == 1);
  CHECK(back[0] == CellRef{"c1", 5});

  CHECK_THROWS_AS(topo.neighbors({"c0", 99}), DomainError);
  CHECK_THROWS_AS(topo.cell({"zz", 0}), DomainError);
}

TEST_CASE("successor links connect lane ends") {
  MapModel map = chain_map();
  GridTopology topo(map);
  CellNeighbors last = topo.neighbors({"A", 4});
  CHECK(!last.forward.has_value());
  REQUIRE(last.successors.size() == 1);
  CHECK(last.successors[0] == CellRef{"B", 0});
  CHECK(topo.neighbors({"A", 3}).successors.empty());
}

TEST_CASE("disabling links drops lateral and successor edges") {
  MapModel map = chain_map();
  GridTopology topo(map, kDefaultCellLength, false);
  CHECK(topo.neighbors({"A", 4}).successors.empty());
  MapModel cm = corridor_map();
  GridTopology ct(cm, kDefaultCellLength, false);
  CHECK(ct.lateral_partners({"c1", 5}).empty());
}

TEST_CASE("lateral links require the same-direction flag") {
  MapModel map = load_map_from_string(R"({"lanes": [
    {"id": "c0", "centerline": [[0,0],[40,0]], "left_neighbor": "c1",
     "neighbor_same_direction": false},
    {"id": "c1", "centerline": [[0,3.5],[40,3.5]], "right_neighbor": "c0",
     "neighbor_same_direction": false}
  ]})", "inline");
  GridTopology topo(map);
  CHECK(topo.lateral_partners({"c0", 2}).empty());
}

TEST_CASE("claims respect the occupancy hierarchy") {
  OccupancyLedger ledger;
  CellRef cell{"c0", 2};
  CHECK(ledger.occupancy(cell) == Occupancy::free_cell);
  CHECK(ledger.try_claim(cell, 0, 7, Occupancy::generated));
  CHECK(ledger.occupancy(cell) == Occupancy::generated);
  CHECK(ledger.owner(cell) == std::optional<AgentId>(7));

  // another generated agent is refused; the holder itself is a no-op success
  CHECK(!ledger.try_claim(cell, 0, 8, Occupancy::generated));
  CHECK(ledger.try_claim(cell, 0, 7, Occupancy::generated));

  // an original evicts the generated holder
  CHECK(ledger.try_claim(cell, 0, 100, Occupancy::original));
  CHECK(ledger.occupancy(cell) == Occupancy::original);
  auto evicted = ledger.take_evictions();
  REQUIRE(evicted.size() == 1);
  CHECK(evicted[0] == 7);
  CHECK(ledger.take_evictions().empty());

  // generated claims never displace originals
  CHECK(!ledger.try_claim(cell, 0, 8, Occupancy::generated));

  // release by a non-owner is ignored
  ledger.release(cell, 8);
  CHECK(ledger.occupancy(cell) == Occupancy::original);
  ledger.release(cell, 100);
  CHECK(ledger.occupancy(cell) == Occupancy::free_cell);
}

TEST_CASE("fuzzed claim sequences never double-occupy") {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> cell_pick(0, 9), agent_pick(0, 5), op(0, 2);
  OccupancyLedger ledger;
  for (int step = 0; step < 1000; ++step) {
    CellRef cell{"L", cell_pick(rng)};
    AgentId agent = agent_pick(rng);
    switch (op(rng)) {
      case 0: ledger.try_claim(cell, 0, agent, Occupancy::generated); break;
      case 1: ledger.try_claim(cell, 0, 100 + agent, Occupancy::original); break;
      default: ledger.release(cell, agent); break;
    }
    for (const auto& [ref, claim] : ledger.occupied()) {
      CHECK(claim.kind != Occupancy::free_cell);
      CHECK(claim.owner >= 0);
    }
  }
  ledger.take_evictions();
}

TEST_CASE("snapshots record the occupied cells per tick") {
  OccupancyLedger ledger;
  ledger.try_claim({"L", 1}, 0, 1, Occupancy::generated);
  ledger.try_claim({"L", 5}, 0, 2, Occupancy::original);
  ledger.commit_tick(0);
  ledger.release({"L", 1}, 1);
  ledger.try_claim({"L", 2}, 1, 1, Occupancy::generated);
  ledger.commit_tick(1);
  REQUIRE(ledger.history().size() == 2);
  REQUIRE(ledger.history()[0].size() == 2);
  CHECK(ledger.history()[0][0].cell == CellRef{"L", 1});
  CHECK(ledger.history()[0][1].cell == CellRef{"L", 5});
  REQUIRE(ledger.history()[1].size() == 2);
  CHECK(ledger.history()[1][0].cell == CellRef{"L", 2});
  CHECK(ledger.history()[1][0].owner == 1);
}

TEST_CASE("locate_cell matches an exhaustive scan") {
  MapModel map = corridor_map();
  GridTopology topo(map);
  std::mt19937_64 rng(55);
  std::uniform_real_distribution<double> px(0.0, 39.9), py(-1.5, 8.5);
  for (int i = 0; i < 300; ++i) {
    Vec2 p{px(rng), py(rng)};
    auto got = locate_cell(topo, map, p);
    REQUIRE(got.has_value());
    // oracle: the cell whose arc interval on the projected lane contains s
    LaneProjection pr = project_to_lane(map, p);
    int expect = std::min(int(pr.s / 4.0), topo.cell_count(pr.lane) - 1);
    CHECK(got->lane == pr.lane);
    CHECK(got->index == expect);
  }
  CHECK(!locate_cell(topo, map, {20.0, 50.0}).has_value());
}

TEST_CASE("a stationary original holds its cell every tick") {
  MapModel map = corridor_map();
  GridTopology topo(map);
  OccupancyLedger ledger;
  std::map<AgentId, CellRef> held;
  OriginalTrack track;
  track.id = 500;
  track.positions.assign(6, topo.cell({"c1", 2}).center);
  for (int t = 0; t < 6; ++t) {
    auto report = map_original_agents(topo, {track}, t, ledger, held);
    CHECK(report.mapped == 1);
    CHECK(report.skipped_off_lane == 0);
    CHECK(ledger.occupancy({"c1", 2}) == Occupancy::original);
    CHECK(ledger.owner({"c1", 2}) == std::optional<AgentId>(500));
    ledger.commit_tick(t);
  }
}

TEST_CASE("a moving original hands its cell over cleanly") {
  MapModel map = corridor_map();
  GridTopology topo(map);
  OccupancyLedger ledger;
  std::map<AgentId, CellRef> held;
  OriginalTrack track;
  track.id = 500;
  track.positions = {topo.cell({"c0", 2}).center, topo.cell({"c0", 3}).center};
  map_original_agents(topo, {track}, 0, ledger, held);
  CHECK(ledger.occupancy({"c0", 2}) == Occupancy::original);
  map_original_agents(topo, {track}, 1, ledger, held);
  CHECK(ledger.occupancy({"c0", 2}) == Occupancy::free_cell);
  CHECK(ledger.occupancy({"c0", 3}) == Occupancy::original);
}

TEST_CASE("an original evicts a generated holder on arrival") {
  MapModel map = corridor_map();
  GridTopology topo(map);
  OccupancyLedger ledger;
  std::map<AgentId, CellRef> held;
  CHECK(ledger.try_claim({"c0", 2}, 0, 7, Occupancy::generated));
  OriginalTrack track;
  track.id = 500;
  track.positions = {topo.cell({"c0", 2}).center};
  auto report = map_original_agents(topo, {track}, 0, ledger, held);
  REQUIRE(report.evicted.size() == 1);
  CHECK(report.evicted[0] == 7);
  CHECK(ledger.occupancy({"c0", 2}) == Occupancy::original);
}

TEST_CASE("off-lane originals are skipped with a count") {
  MapModel map = corridor_map();
  GridTopology topo(map);
  OccupancyLedger ledger;
  std::map<AgentId, CellRef> held;
  OriginalTrack track;
  track.id = 500;
  track.positions = {{20.0, 60.0}};  // 53 m off the nearest lane
  auto report = map_original_agents(topo, {track}, 0, ledger, held);
  CHECK(report.mapped == 0);
  CHECK(report.skipped_off_lane == 1);
  CHECK(ledger.occupied().empty());
}
