#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "scengen/geom.hpp"

namespace scengen {

using LaneId = std::string;

enum class LaneType { straight, left_turn, right_turn };

const char* to_string(LaneType t);
std::optional<LaneType> lane_type_from_string(const std::string& s);

// cumulative arc length over a polyline; cumulative_s[i] is the distance
// from the first vertex to vertex i, so cumulative_s.front() == 0
struct ArcLengthTable {
  std::vector<double> cumulative_s;
  double total_length{};
};

struct Lane {
  LaneId id;
  std::vector<Vec2> centerline;
  std::vector<Vec2> left_boundary;   // empty means absent
  std::vector<Vec2> right_boundary;  // empty means absent
  LaneType lane_type = LaneType::straight;
  std::vector<LaneId> successors;
  std::vector<LaneId> predecessors;
  std::optional<LaneId> left_neighbor;
  std::optional<LaneId> right_neighbor;
  bool neighbor_same_direction = true;
  ArcLengthTable arc;  // filled on load

  double length() const { return arc.total_length; }
};

struct MapModel {
  std::vector<Lane> lanes;  // file order, which is the canonical order everywhere
  std::vector<std::vector<Vec2>> drivable_area;  // simple polygons

  const Lane* find(const LaneId& id) const;
  int lane_index(const LaneId& id) const;  // -1 when absent

 private:
  friend MapModel finalize_map(MapModel m, const std::string& source);
  std::unordered_map<LaneId, int> index_;
};

// --- arc-length parameterization ----------------------------------------

// rejects polylines with fewer than 2 points or repeated consecutive points
ArcLengthTable arc_length_param(const std::vector<Vec2>& pts);

// position at arc length s, piecewise-linear; s outside [0, total] is a DomainError
Vec2 point_at_arclength(const ArcLengthTable& arc, const std::vector<Vec2>& pts,
                        double s);

// heading (radians) at arc length s; at a vertex the following segment wins,
// at the last vertex the preceding one
double heading_at_arclength(const ArcLengthTable& arc, const std::vector<Vec2>& pts,
                            double s);

// --- lane geometry -------------------------------------------------------

inline constexpr double kDefaultLaneWidth = 3.5;  // m
inline constexpr int kWidthSampleCount = 32;

// mean distance between boundary pairs resampled to kWidthSampleCount points;
// kDefaultLaneWidth when either boundary is missing
double estimate_lane_width(const Lane& lane);

struct LaneProjection {
  LaneId lane;
  double s{};  // arc length of the foot point
  double d{};  // signed lateral offset, positive left of travel
};

// nearest lane by unsigned distance; ties go to the lexicographically
// smallest lane id; empty map is a DomainError
LaneProjection project_to_lane(const MapModel& map, Vec2 p);

// --- loading -------------------------------------------------------------

// reads the lane-map interchange file; throws ParseError on malformed input
// and ValidationError (naming the offending lane) on structural problems
MapModel load_map(const std::string& path);

// same checks, starting from an already-decoded JSON text
MapModel load_map_from_string(const std::string& text, const std::string& source_name);

}  // namespace scengen
