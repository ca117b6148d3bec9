#pragma once

#include <string>
#include <utility>
#include <vector>

#include "scengen/frenet.hpp"
#include "scengen/map_model.hpp"

namespace scengen {

inline constexpr double kVehicleLength = 4.5;  // m
inline constexpr double kVehicleWidth = 2.0;   // m
inline constexpr double kIouCollisionThreshold = 0.02;

// --- kinematic derivatives ---------------------------------------------------

struct AccelSample {
  double t{};
  double a_x{}, a_y{};      // m/s^2, world frame
  double jerk_x{}, jerk_y{};  // m/s^3
  double heading{};         // rad, from the velocity direction
  bool jerk_valid = false;  // jerk needs one extra neighbor on each side
};

// Central differences over uniformly spaced samples; a trailing sample with a
// shorter time step (a clamped final point) is dropped first.  Headings come
// from the velocity direction; below 0.1 m/s the previous heading is reused.
std::vector<AccelSample> accel_series(const std::vector<TrajPoint>& traj);

struct RealismMetrics {
  double lo = 0.0;  // mean |longitudinal acceleration|
  double la = 0.0;  // mean |lateral acceleration|
  double je = 0.0;  // mean jerk magnitude
  int accel_samples = 0;
  int jerk_samples = 0;
};

RealismMetrics realism(const std::vector<TrajPoint>& traj);

// --- oriented boxes and collisions --------------------------------------------

struct Obb {
  Vec2 center;
  double heading{};
  double length = kVehicleLength;
  double width = kVehicleWidth;
};

std::vector<Vec2> obb_corners(const Obb& box);          // CCW
double polygon_area(const std::vector<Vec2>& poly);     // signed-area magnitude

// Sutherland-Hodgman; the clip polygon must be convex and CCW
std::vector<Vec2> clip_polygon(const std::vector<Vec2>& subject,
                               const std::vector<Vec2>& clip);

double obb_iou(const Obb& a, const Obb& b);

// even-odd rule; boundary points count as inside
bool point_in_polygon(Vec2 p, const std::vector<Vec2>& poly);

// inside any drivable polygon; maps without polygons accept everything
bool in_drivable_area(const MapModel& map, Vec2 p);

// --- scenario level ------------------------------------------------------------

struct EvalAgent {
  int id{};
  bool generated = true;
  std::string policy = "straight";
  std::vector<TrajPoint> samples;
};

struct MetricParams {
  double iou_threshold = kIouCollisionThreshold;
  double vehicle_length = kVehicleLength;
  double vehicle_width = kVehicleWidth;
  double delta = 0.1;  // resampling step of the collision sweep
};

struct ScenarioMetrics {
  RealismMetrics realism;       // agent-mean over generated agents
  int realism_agents = 0;
  double scr = 0.0;             // colliding agents / total agents
  int colliding_agents = 0;
  int total_agents = 0;
  std::vector<std::pair<int, int>> collision_pairs;
  double orr = 0.0;             // off-road samples / total samples
  long offroad_samples = 0;
  long total_samples = 0;
};

ScenarioMetrics evaluate_scenario(const std::vector<EvalAgent>& agents,
                                  const MapModel& map,
                                  const MetricParams& params = {});

struct DatasetMetrics {
  double lo = 0.0, la = 0.0, je = 0.0;  // means over scenario means
  double scr = 0.0;                     // mean over scenarios
  double orr = 0.0;                     // pooled over every sample
  int scenarios = 0;
  long offroad_samples = 0;
  long total_samples = 0;
};

DatasetMetrics aggregate(const std::vector<ScenarioMetrics>& scenarios);

}  // namespace scengen
