#include "scengen/map_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"
#include "scengen/errors.hpp"

namespace scengen {

namespace {

constexpr double kMinPointSeparation = 1e-9;  // m, below this two vertices count as one

std::string describe(const LaneId& id) { return "lane " + id; }

}  // namespace

const char* to_string(LaneType t) {
  switch (t) {
    case LaneType::straight: return "straight";
    case LaneType::left_turn: return "left_turn";
    case LaneType::right_turn: return "right_turn";
  }
  return "straight";
}

std::optional<LaneType> lane_type_from_string(const std::string& s) {
  if (s == "straight") return LaneType::straight;
  if (s == "left_turn") return LaneType::left_turn;
  if (s == "right_turn") return LaneType::right_turn;
  return std::nullopt;
}

const Lane* MapModel::find(const LaneId& id) const {
  auto it = index_.find(id);
  return it == index_.end() ? nullptr : &lanes[it->second];
}

int MapModel::lane_index(const LaneId& id) const {
  auto it = index_.find(id);
  return it == index_.end() ? -1 : it->second;
}

ArcLengthTable arc_length_param(const std::vector<Vec2>& pts) {
  if (pts.size() < 2) throw ValidationError("polyline needs at least 2 points");
  ArcLengthTable t;
  t.cumulative_s.resize(pts.size());
  t.cumulative_s[0] = 0.0;
  for (size_t i = 1; i < pts.size(); ++i) {
    double step = dist(pts[i - 1], pts[i]);
    if (step <= kMinPointSeparation) {
      std::ostringstream os;
      os << "repeated point at index " << i << " (separation " << step << ")";
      throw ValidationError(os.str());
    }
    t.cumulative_s[i] = t.cumulative_s[i - 1] + step;
  }
  t.total_length = t.cumulative_s.back();
  return t;
}

namespace {

// index of the segment containing s plus the interpolation factor within it
std::pair<size_t, double> locate(const ArcLengthTable& arc, double s) {
  const auto& cum = arc.cumulative_s;
  auto it = std::upper_bound(cum.begin(), cum.end(), s);
  size_t hi = std::min<size_t>(std::distance(cum.begin(), it), cum.size() - 1);
  if (hi == 0) hi = 1;
  size_t lo = hi - 1;
  double seg = cum[hi] - cum[lo];
  return {lo, (s - cum[lo]) / seg};
}

}  // namespace

Vec2 point_at_arclength(const ArcLengthTable& arc, const std::vector<Vec2>& pts,
                        double s) {
  if (s < 0.0 || s > arc.total_length) {
    std::ostringstream os;
    os << "arc length " << s << " outside [0, " << arc.total_length << "]";
    throw DomainError(os.str());
  }
  auto [i, t] = locate(arc, s);
  return lerp(pts[i], pts[i + 1], t);
}

double heading_at_arclength(const ArcLengthTable& arc, const std::vector<Vec2>& pts,
                            double s) {
  if (s < 0.0 || s > arc.total_length) {
    std::ostringstream os;
    os << "arc length " << s << " outside [0, " << arc.total_length << "]";
    throw DomainError(os.str());
  }
  auto [i, t] = locate(arc, s);
  Vec2 dir = pts[i + 1] - pts[i];
  return std::atan2(dir.y, dir.x);
}

namespace {

// resample a polyline at n equally spaced arc positions, endpoints included
std::vector<Vec2> resample(const std::vector<Vec2>& pts, int n) {
  ArcLengthTable arc = arc_length_param(pts);
  std::vector<Vec2> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    double s = arc.total_length * double(i) / double(n - 1);
    out.push_back(point_at_arclength(arc, pts, s));
  }
  return out;
}

}  // namespace

double estimate_lane_width(const Lane& lane) {
  if (lane.left_boundary.size() < 2 || lane.right_boundary.size() < 2)
    return kDefaultLaneWidth;
  auto left = resample(lane.left_boundary, kWidthSampleCount);
  auto right = resample(lane.right_boundary, kWidthSampleCount);
  double sum = 0.0;
  for (int i = 0; i < kWidthSampleCount; ++i) sum += dist(left[i], right[i]);
  return sum / kWidthSampleCount;
}

LaneProjection project_to_lane(const MapModel& map, Vec2 p) {
  if (map.lanes.empty()) throw DomainError("projection onto an empty map");
  LaneProjection best;
  double best_dist = std::numeric_limits<double>::infinity();
  for (const Lane& lane : map.lanes) {
    const auto& pts = lane.centerline;
    for (size_t i = 0; i + 1 < pts.size(); ++i) {
      double t = segment_param(pts[i], pts[i + 1], p);
      Vec2 foot = lerp(pts[i], pts[i + 1], t);
      double d = dist(p, foot);
      // ties resolved toward the lexicographically smallest lane id
      bool better = d < best_dist - 1e-12 ||
                    (d <= best_dist + 1e-12 && lane.id < best.lane);
      if (!better) continue;
      Vec2 dir = pts[i + 1] - pts[i];
      double side = cross(dir, p - foot);
      best_dist = d;
      best.lane = lane.id;
      best.s = lane.arc.cumulative_s[i] + t * (lane.arc.cumulative_s[i + 1] -
                                               lane.arc.cumulative_s[i]);
      best.d = side >= 0.0 ? d : -d;
    }
  }
  return best;
}

namespace {

using nlohmann::json;

Vec2 read_point(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    throw ValidationError(where + ": point must be a [x, y] pair");
  return {j[0].get<double>(), j[1].get<double>()};
}

std::vector<Vec2> read_polyline(const json& j, const std::string& where) {
  if (!j.is_array()) throw ValidationError(where + ": expected an array of points");
  std::vector<Vec2> out;
  out.reserve(j.size());
  for (const auto& p : j) out.push_back(read_point(p, where));
  return out;
}

void check_centerline(const Lane& lane) {
  if (lane.centerline.size() < 2)
    throw ValidationError(describe(lane.id) + ": centerline needs at least 2 points");
  for (size_t i = 1; i < lane.centerline.size(); ++i) {
    if (dist(lane.centerline[i - 1], lane.centerline[i]) <= kMinPointSeparation) {
      std::ostringstream os;
      os << describe(lane.id) << ": centerline repeats a point at index " << i;
      throw ValidationError(os.str());
    }
  }
}

}  // namespace

MapModel finalize_map(MapModel m, const std::string& source) {
  m.index_.clear();
  for (size_t i = 0; i < m.lanes.size(); ++i) {
    Lane& lane = m.lanes[i];
    if (lane.id.empty())
      throw ValidationError(source + ": lane with empty id");
    if (!m.index_.emplace(lane.id, int(i)).second)
      throw ValidationError(describe(lane.id) + ": duplicate id");
  }
  for (Lane& lane : m.lanes) {
    check_centerline(lane);
    lane.arc = arc_length_param(lane.centerline);
    for (const LaneId& succ : lane.successors)
      if (!m.index_.count(succ))
        throw ValidationError(describe(lane.id) + ": successor " + succ +
                              " does not exist");
    for (const LaneId& pred : lane.predecessors)
      if (!m.index_.count(pred))
        throw ValidationError(describe(lane.id) + ": predecessor " + pred +
                              " does not exist");
  }
  // neighbor symmetry, checked only when both lanes exist
  for (const Lane& lane : m.lanes) {
    if (lane.left_neighbor) {
      const Lane* other = m.find(*lane.left_neighbor);
      if (other && (!other->right_neighbor || *other->right_neighbor != lane.id))
        throw ValidationError(describe(lane.id) + ": left_neighbor " + other->id +
                              " does not list it back as right_neighbor");
    }
    if (lane.right_neighbor) {
      const Lane* other = m.find(*lane.right_neighbor);
      if (other && (!other->left_neighbor || *other->left_neighbor != lane.id))
        throw ValidationError(describe(lane.id) + ": right_neighbor " + other->id +
                              " does not list it back as left_neighbor");
    }
  }
  for (size_t i = 0; i < m.drivable_area.size(); ++i) {
    if (m.drivable_area[i].size() < 3) {
      std::ostringstream os;
      os << source << ": drivable_area polygon " << i << " has fewer than 3 points";
      throw ValidationError(os.str());
    }
  }
  return m;
}

namespace {

MapModel parse_map(const json& root, const std::string& source) {
  if (!root.is_object() || !root.contains("lanes") || !root["lanes"].is_array())
    throw ValidationError(source + ": missing \"lanes\" array");
  MapModel m;
  for (const auto& jl : root["lanes"]) {
    Lane lane;
    lane.id = jl.value("id", std::string{});
    std::string where = describe(lane.id.empty() ? "<unnamed>" : lane.id);
    if (!jl.contains("centerline"))
      throw ValidationError(where + ": missing centerline");
    lane.centerline = read_polyline(jl["centerline"], where + " centerline");
    if (jl.contains("left_boundary"))
      lane.left_boundary = read_polyline(jl["left_boundary"], where + " left_boundary");
    if (jl.contains("right_boundary"))
      lane.right_boundary =
          read_polyline(jl["right_boundary"], where + " right_boundary");
    if (jl.contains("lane_type")) {
      auto t = lane_type_from_string(jl["lane_type"].get<std::string>());
      if (!t)
        throw ValidationError(where + ": unknown lane_type \"" +
                              jl["lane_type"].get<std::string>() + "\"");
      lane.lane_type = *t;
    }
    lane.successors = jl.value("successors", std::vector<LaneId>{});
    lane.predecessors = jl.value("predecessors", std::vector<LaneId>{});
    if (jl.contains("left_neighbor") && !jl["left_neighbor"].is_null())
      lane.left_neighbor = jl["left_neighbor"].get<LaneId>();
    if (jl.contains("right_neighbor") && !jl["right_neighbor"].is_null())
      lane.right_neighbor = jl["right_neighbor"].get<LaneId>();
    lane.neighbor_same_direction = jl.value("neighbor_same_direction", true);
    m.lanes.push_back(std::move(lane));
  }
  if (root.contains("drivable_area")) {
    if (!root["drivable_area"].is_array())
      throw ValidationError(source + ": drivable_area must be an array of polygons");
    for (const auto& jp : root["drivable_area"])
      m.drivable_area.push_back(read_polyline(jp, source + " drivable_area"));
  }
  return finalize_map(std::move(m), source);
}

}  // namespace

MapModel load_map(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open map file " + path);
  json root;
  try {
    in >> root;
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  return parse_map(root, path);
}

MapModel load_map_from_string(const std::string& text, const std::string& source_name) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(source_name + ": " + e.what());
  }
  return parse_map(root, source_name);
}

}  // namespace scengen
