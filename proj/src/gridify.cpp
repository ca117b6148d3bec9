#include "scengen/gridify.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <utility>

#include "scengen/errors.hpp"

namespace scengen {

GridTopology::GridTopology(const MapModel& map, double cell_length, bool with_links)
    : map_(&map), cell_length_(cell_length), with_links_(with_links) {
  if (!(cell_length > 0.0)) {
    std::ostringstream os;
    os << "cell length must be positive, got " << cell_length;
    throw DomainError(os.str());
  }
  per_lane_.resize(map.lanes.size());
  for (size_t li = 0; li < map.lanes.size(); ++li) {
    const Lane& lane = map.lanes[li];
    double L = lane.length();
    int n = std::max(1, int(std::ceil(L / cell_length)));
    double width = estimate_lane_width(lane);
    auto& cells = per_lane_[li];
    cells.reserve(n);
    for (int j = 0; j < n; ++j) {
      double s0 = j * cell_length;
      double len = (j == n - 1) ? L - s0 : cell_length;
      double sc = s0 + len / 2.0;
      GridCell c;
      c.ref = {lane.id, j};
      c.center = point_at_arclength(lane.arc, lane.centerline, sc);
      c.heading = heading_at_arclength(lane.arc, lane.centerline, sc);
      c.length = len;
      c.s_center = sc;
      c.lane_type = lane.lane_type;
      c.width = width;
      cells.push_back(c);
    }
  }
}

const std::vector<GridCell>& GridTopology::cells(const LaneId& lane) const {
  int li = map_->lane_index(lane);
  if (li < 0) throw DomainError("unknown lane " + lane);
  return per_lane_[li];
}

bool GridTopology::has_cell(const CellRef& ref) const {
  int li = map_->lane_index(ref.lane);
  return li >= 0 && ref.index >= 0 && ref.index < int(per_lane_[li].size());
}

const GridCell& GridTopology::cell(const CellRef& ref) const {
  int li = map_->lane_index(ref.lane);
  if (li < 0 || ref.index < 0 || ref.index >= int(per_lane_[li].size())) {
    std::ostringstream os;
    os << "unknown cell (" << ref.lane << ", " << ref.index << ")";
    throw DomainError(os.str());
  }
  return per_lane_[li][ref.index];
}

int GridTopology::cell_count(const LaneId& lane) const {
  return int(cells(lane).size());
}

int GridTopology::total_cell_count() const {
  int n = 0;
  for (const auto& v : per_lane_) n += int(v.size());
  return n;
}

std::vector<CellRef> GridTopology::lateral_partners(const CellRef& ref) const {
  std::vector<CellRef> out;
  if (!with_links_) return out;
  const Lane* lane = map_->find(ref.lane);
  if (!lane || !lane->neighbor_same_direction) return out;
  for (const auto& nb : {lane->left_neighbor, lane->right_neighbor}) {
    if (!nb) continue;
    int li = map_->lane_index(*nb);
    if (li < 0) continue;  // dangling neighbor references are tolerated
    if (!map_->lanes[li].neighbor_same_direction) continue;
    if (ref.index < int(per_lane_[li].size()))
      out.push_back({*nb, ref.index});
  }
  return out;
}

CellNeighbors GridTopology::neighbors(const CellRef& ref) const {
  const GridCell& c = cell(ref);  // validates
  (void)c;
  CellNeighbors nb;
  int li = map_->lane_index(ref.lane);
  int n = int(per_lane_[li].size());
  if (ref.index + 1 < n) nb.forward = CellRef{ref.lane, ref.index + 1};
  nb.lateral = lateral_partners(ref);
  if (with_links_ && ref.index == n - 1) {
    for (const LaneId& succ : map_->lanes[li].successors) {
      int si = map_->lane_index(succ);
      if (si >= 0 && !per_lane_[si].empty()) nb.successors.push_back({succ, 0});
    }
  }
  return nb;
}

// --- ledger ----------------------------------------------------------------

Occupancy OccupancyLedger::occupancy(const CellRef& ref) const {
  auto it = state_.find(ref);
  return it == state_.end() ? Occupancy::free_cell : it->second.kind;
}

std::optional<AgentId> OccupancyLedger::owner(const CellRef& ref) const {
  auto it = state_.find(ref);
  if (it == state_.end()) return std::nullopt;
  return it->second.owner;
}

bool OccupancyLedger::try_claim(const CellRef& ref, int /*tick*/, AgentId agent,
                                Occupancy kind) {
  auto it = state_.find(ref);
  if (it == state_.end()) {
    state_.emplace(ref, CellClaim{kind, agent});
    return true;
  }
  CellClaim& cur = it->second;
  if (cur.owner == agent && cur.kind == kind) return true;  // already held
  if (cur.kind == Occupancy::original) return false;  // originals are immovable
  if (kind == Occupancy::original) {
    // recorded traffic always wins; the displaced agent is reported
    evictions_.push_back(cur.owner);
    cur = CellClaim{kind, agent};
    return true;
  }
  return false;
}

void OccupancyLedger::release(const CellRef& ref, AgentId agent) {
  auto it = state_.find(ref);
  if (it != state_.end() && it->second.owner == agent) state_.erase(it);
}

std::vector<AgentId> OccupancyLedger::take_evictions() {
  return std::exchange(evictions_, {});
}

void OccupancyLedger::commit_tick(int tick) {
  if (int(history_.size()) <= tick) history_.resize(tick + 1);
  auto& snap = history_[tick];
  snap.clear();
  snap.reserve(state_.size());
  for (const auto& [cell, claim] : state_)
    snap.push_back({cell, claim.kind, claim.owner});
}

// --- original mapping --------------------------------------------------------

std::optional<CellRef> locate_cell(const GridTopology& topo, const MapModel& map,
                                   Vec2 p) {
  LaneProjection proj = project_to_lane(map, p);
  if (std::abs(proj.d) > kOffLaneCutoff) return std::nullopt;
  int n = topo.cell_count(proj.lane);
  int j = std::min(int(proj.s / topo.cell_length()), n - 1);
  return CellRef{proj.lane, std::max(0, j)};
}

OriginalMappingReport map_original_agents(const GridTopology& topo,
                                          const std::vector<OriginalTrack>& originals,
                                          int tick, OccupancyLedger& ledger,
                                          std::map<AgentId, CellRef>& held) {
  OriginalMappingReport report;
  for (const OriginalTrack& orig : originals) {
    auto it = held.find(orig.id);
    if (!orig.alive_at(tick)) {
      if (it != held.end()) {
        ledger.release(it->second, orig.id);
        held.erase(it);
      }
      continue;
    }
    std::optional<CellRef> target = locate_cell(topo, topo.map(), orig.position_at(tick));
    if (!target) {
      ++report.skipped_off_lane;
      if (it != held.end()) {
        ledger.release(it->second, orig.id);
        held.erase(it);
      }
      continue;
    }
    if (it != held.end() && it->second == *target) {
      ++report.mapped;
      continue;
    }
    if (ledger.try_claim(*target, tick, orig.id, Occupancy::original)) {
      if (it != held.end()) ledger.release(it->second, orig.id);
      held[orig.id] = *target;
      ++report.mapped;
    } else if (it != held.end()) {
      // blocked by another original; the agent keeps its previous cell
      ++report.mapped;
    }
  }
  auto evicted = ledger.take_evictions();
  report.evicted.insert(report.evicted.end(), evicted.begin(), evicted.end());
  return report;
}

}  // namespace scengen
