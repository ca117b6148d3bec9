#pragma once

#include <map>
#include <optional>
#include <vector>

#include "scengen/map_model.hpp"

namespace scengen {

inline constexpr double kDefaultCellLength = 4.0;  // m

struct CellRef {
  LaneId lane;
  int index{};

  friend bool operator==(const CellRef&, const CellRef&) = default;
  friend auto operator<=>(const CellRef&, const CellRef&) = default;
};

struct GridCell {
  CellRef ref;
  Vec2 center;
  double heading{};   // rad
  double length{};    // m, the last cell of a lane may be shorter
  double s_center{};  // arc position of the center within its lane
  LaneType lane_type = LaneType::straight;
  double width{};     // m
};

struct CellNeighbors {
  std::optional<CellRef> forward;    // next cell in the same lane
  std::vector<CellRef> lateral;      // same index in same-direction neighbor lanes
  std::vector<CellRef> successors;   // first cells of successor lanes (last cell only)
};

// Per-lane cell decomposition plus the link structure between cells.
// With links disabled the grid degenerates to per-lane forward chains.
class GridTopology {
 public:
  GridTopology(const MapModel& map, double cell_length = kDefaultCellLength,
               bool with_links = true);

  const MapModel& map() const { return *map_; }
  double cell_length() const { return cell_length_; }
  bool links_enabled() const { return with_links_; }

  const std::vector<GridCell>& cells(const LaneId& lane) const;
  const GridCell& cell(const CellRef& ref) const;  // DomainError when unknown
  bool has_cell(const CellRef& ref) const;
  int cell_count(const LaneId& lane) const;
  int total_cell_count() const;

  CellNeighbors neighbors(const CellRef& ref) const;

  // same-direction lateral partners of (lane, index), left side first
  std::vector<CellRef> lateral_partners(const CellRef& ref) const;

 private:
  const MapModel* map_;
  double cell_length_;
  bool with_links_;
  std::vector<std::vector<GridCell>> per_lane_;  // map lane order
};

// --- occupancy -----------------------------------------------------------

enum class Occupancy : uint8_t { free_cell = 0, original = 1, generated = 2 };

using AgentId = int;

struct CellClaim {
  Occupancy kind = Occupancy::free_cell;
  AgentId owner = -1;
};

// One σ value and owner per cell per tick.  Claims mutate the current tick;
// a per-tick snapshot history is kept for post-run audits.
class OccupancyLedger {
 public:
  Occupancy occupancy(const CellRef& ref) const;
  std::optional<AgentId> owner(const CellRef& ref) const;

  // Returns true when the claim now holds the cell.  Claims on σ=1 cells
  // fail; original claims evict a generated holder (reported via
  // take_evictions); a cell already held by the same agent is a no-op.
  bool try_claim(const CellRef& ref, int tick, AgentId agent, Occupancy kind);

  // releasing a cell the agent does not hold is ignored
  void release(const CellRef& ref, AgentId agent);

  // evicted generated agents since the last call, in eviction order
  std::vector<AgentId> take_evictions();

  // closes tick t: records the snapshot used by history audits
  void commit_tick(int tick);

  struct SnapshotEntry {
    CellRef cell;
    Occupancy kind;
    AgentId owner;
  };
  // history[t] holds the occupied cells at tick t, sorted by cell
  const std::vector<std::vector<SnapshotEntry>>& history() const { return history_; }

  const std::map<CellRef, CellClaim>& occupied() const { return state_; }

 private:
  std::map<CellRef, CellClaim> state_;  // occupied cells only
  std::vector<std::vector<SnapshotEntry>> history_;
  std::vector<AgentId> evictions_;
};

// --- original agents -----------------------------------------------------

struct OriginalTrack {
  AgentId id{};
  std::string label = "straight";
  int first_tick = 0;
  std::vector<Vec2> positions;  // one per tick from first_tick on
  std::vector<double> speeds;   // parallel to positions, may be empty
  std::vector<double> headings; // parallel to positions, may be empty

  bool alive_at(int tick) const {
    return tick >= first_tick && tick < first_tick + int(positions.size());
  }
  Vec2 position_at(int tick) const { return positions[tick - first_tick]; }
};

struct OriginalMappingReport {
  int mapped = 0;
  int skipped_off_lane = 0;           // farther than the off-lane cutoff
  std::vector<AgentId> evicted;       // generated agents displaced this tick
};

inline constexpr double kOffLaneCutoff = 10.0;  // m

// Claims σ=1 cells for every original alive at `tick`, releasing the cells
// they held at the previous tick.  `held` carries each original's current
// cell between calls and is updated in place.
OriginalMappingReport map_original_agents(const GridTopology& topo,
                                          const std::vector<OriginalTrack>& originals,
                                          int tick, OccupancyLedger& ledger,
                                          std::map<AgentId, CellRef>& held);

// cell whose arc interval contains the projection of p; nullopt when p is
// farther than kOffLaneCutoff from every centerline
std::optional<CellRef> locate_cell(const GridTopology& topo, const MapModel& map,
                                   Vec2 p);

}  // namespace scengen
