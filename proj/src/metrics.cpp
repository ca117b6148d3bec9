#include "scengen/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace scengen {

std::vector<AccelSample> accel_series(const std::vector<TrajPoint>& traj) {
  std::vector<TrajPoint> pts = traj;
  // the final sample may sit closer than one step (clamped span end)
  while (pts.size() >= 3) {
    double dt_last = pts[pts.size() - 1].t - pts[pts.size() - 2].t;
    double dt_prev = pts[pts.size() - 2].t - pts[pts.size() - 3].t;
    if (std::abs(dt_last - dt_prev) <= 1e-9) break;
    pts.pop_back();
  }
  if (pts.size() < 3) return {};
  double dt = pts[1].t - pts[0].t;
  if (!(dt > 0.0)) return {};

  int n = int(pts.size());
  std::vector<AccelSample> out;
  out.reserve(n - 2);
  auto accel_at = [&](int i) {
    Vec2 a = (pts[i + 1].position - pts[i].position * 2.0 + pts[i - 1].position) *
             (1.0 / (dt * dt));
    return a;
  };
  double last_heading = pts.front().heading;
  for (int i = 1; i + 1 < n; ++i) {
    AccelSample s;
    s.t = pts[i].t;
    Vec2 a = accel_at(i);
    s.a_x = a.x;
    s.a_y = a.y;
    Vec2 vel = (pts[i + 1].position - pts[i - 1].position) * (1.0 / (2.0 * dt));
    if (norm(vel) >= kSlowSpeedGuard) last_heading = std::atan2(vel.y, vel.x);
    s.heading = last_heading;
    if (i >= 2 && i + 2 < n) {
      Vec2 jp = accel_at(i + 1);
      Vec2 jm = accel_at(i - 1);
      s.jerk_x = (jp.x - jm.x) / (2.0 * dt);
      s.jerk_y = (jp.y - jm.y) / (2.0 * dt);
      s.jerk_valid = true;
    }
    out.push_back(s);
  }
  return out;
}

RealismMetrics realism(const std::vector<TrajPoint>& traj) {
  RealismMetrics m;
  for (const AccelSample& s : accel_series(traj)) {
    double c = std::cos(s.heading), sn = std::sin(s.heading);
    m.lo += std::abs(s.a_x * c + s.a_y * sn);
    m.la += std::abs(-s.a_x * sn + s.a_y * c);
    ++m.accel_samples;
    if (s.jerk_valid) {
      m.je += std::hypot(s.jerk_x, s.jerk_y);
      ++m.jerk_samples;
    }
  }
  if (m.accel_samples > 0) {
    m.lo /= m.accel_samples;
    m.la /= m.accel_samples;
  }
  if (m.jerk_samples > 0) m.je /= m.jerk_samples;
  return m;
}

std::vector<Vec2> obb_corners(const Obb& box) {
  double c = std::cos(box.heading), s = std::sin(box.heading);
  double hl = 0.5 * box.length, hw = 0.5 * box.width;
  auto at = [&](double x, double y) {
    return Vec2{box.center.x + x * c - y * s, box.center.y + x * s + y * c};
  };
  return {at(hl, hw), at(-hl, hw), at(-hl, -hw), at(hl, -hw)};
}

double polygon_area(const std::vector<Vec2>& poly) {
  double a = 0.0;
  for (size_t i = 0, n = poly.size(); i < n; ++i) {
    const Vec2& p = poly[i];
    const Vec2& q = poly[(i + 1) % n];
    a += cross(p, q);
  }
  return std::abs(a) * 0.5;
}

std::vector<Vec2> clip_polygon(const std::vector<Vec2>& subject,
                               const std::vector<Vec2>& clip) {
  std::vector<Vec2> out = subject;
  for (size_t i = 0, n = clip.size(); i < n && !out.empty(); ++i) {
    Vec2 e0 = clip[i], e1 = clip[(i + 1) % n];
    std::vector<Vec2> in = std::move(out);
    out.clear();
    auto inside = [&](Vec2 p) { return cross(e1 - e0, p - e0) >= -1e-12; };
    auto intersect = [&](Vec2 a, Vec2 b) {
      double da = cross(e1 - e0, a - e0);
      double db = cross(e1 - e0, b - e0);
      double t = da / (da - db);
      return lerp(a, b, t);
    };
    for (size_t j = 0, m = in.size(); j < m; ++j) {
      Vec2 cur = in[j], prev = in[(j + m - 1) % m];
      bool cin = inside(cur), pin = inside(prev);
      if (cin) {
        if (!pin) out.push_back(intersect(prev, cur));
        out.push_back(cur);
      } else if (pin) {
        out.push_back(intersect(prev, cur));
      }
    }
  }
  return out;
}

double obb_iou(const Obb& a, const Obb& b) {
  // boxes farther apart than two circumradii cannot touch
  double reach = std::hypot(a.length, a.width) * 0.5 +
                 std::hypot(b.length, b.width) * 0.5;
  if (dist(a.center, b.center) > reach) return 0.0;
  auto ca = obb_corners(a);
  auto cb = obb_corners(b);
  double inter = polygon_area(clip_polygon(ca, cb));
  if (inter <= 0.0) return 0.0;
  double uni = polygon_area(ca) + polygon_area(cb) - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

bool point_in_polygon(Vec2 p, const std::vector<Vec2>& poly) {
  size_t n = poly.size();
  if (n < 3) return false;
  for (size_t i = 0; i < n; ++i) {
    Vec2 a = poly[i], b = poly[(i + 1) % n];
    if (dist(p, lerp(a, b, segment_param(a, b, p))) < 1e-9) return true;
  }
  bool in = false;
  for (size_t i = 0, j = n - 1; i < n; j = i++) {
    if ((poly[i].y > p.y) != (poly[j].y > p.y)) {
      double x = poly[j].x +
                 (poly[i].x - poly[j].x) * (p.y - poly[j].y) / (poly[i].y - poly[j].y);
      if (p.x < x) in = !in;
    }
  }
  return in;
}

bool in_drivable_area(const MapModel& map, Vec2 p) {
  if (map.drivable_area.empty()) return true;
  for (const auto& poly : map.drivable_area)
    if (point_in_polygon(p, poly)) return true;
  return false;
}

namespace {

// linear position and nearest-sample heading at time t, if covered
std::optional<Obb> box_at(const EvalAgent& agent, double t, const MetricParams& mp) {
  const auto& s = agent.samples;
  if (s.empty() || t < s.front().t - 1e-9 || t > s.back().t + 1e-9) return std::nullopt;
  auto it = std::lower_bound(s.begin(), s.end(), t,
                             [](const TrajPoint& p, double v) { return p.t < v; });
  size_t i = size_t(it - s.begin());
  auto make = [&](Vec2 pos, double heading) {
    return Obb{pos, heading, mp.vehicle_length, mp.vehicle_width};
  };
  if (i == 0) return make(s[0].position, s[0].heading);
  if (i >= s.size()) return make(s.back().position, s.back().heading);
  double span = s[i].t - s[i - 1].t;
  double u = span > 1e-12 ? (t - s[i - 1].t) / span : 0.0;
  Vec2 pos = lerp(s[i - 1].position, s[i].position, u);
  double heading = (u < 0.5 ? s[i - 1] : s[i]).heading;
  return make(pos, heading);
}

}  // namespace

ScenarioMetrics evaluate_scenario(const std::vector<EvalAgent>& agents,
                                  const MapModel& map, const MetricParams& params) {
  ScenarioMetrics out;
  out.total_agents = int(agents.size());

  // realism over generated agents, each agent weighted equally
  for (const EvalAgent& a : agents) {
    if (!a.generated) continue;
    RealismMetrics r = realism(a.samples);
    if (r.accel_samples == 0) continue;
    out.realism.lo += r.lo;
    out.realism.la += r.la;
    out.realism.je += r.je;
    ++out.realism_agents;
  }
  if (out.realism_agents > 0) {
    out.realism.lo /= out.realism_agents;
    out.realism.la /= out.realism_agents;
    out.realism.je /= out.realism_agents;
  }

  // pairwise collision sweep on a common time grid
  double t_max = 0.0;
  for (const EvalAgent& a : agents)
    if (!a.samples.empty()) t_max = std::max(t_max, a.samples.back().t);
  std::set<int> colliding;
  std::set<std::pair<int, int>> pairs;
  int steps = int(std::floor(t_max / params.delta + 1e-9));
  for (int k = 0; k <= steps; ++k) {
    double t = k * params.delta;
    std::vector<std::pair<int, Obb>> boxes;
    for (const EvalAgent& a : agents)
      if (auto b = box_at(a, t, params)) boxes.push_back({a.id, *b});
    for (size_t i = 0; i < boxes.size(); ++i)
      for (size_t j = i + 1; j < boxes.size(); ++j)
        if (obb_iou(boxes[i].second, boxes[j].second) > params.iou_threshold) {
          colliding.insert(boxes[i].first);
          colliding.insert(boxes[j].first);
          pairs.insert({std::min(boxes[i].first, boxes[j].first),
                        std::max(boxes[i].first, boxes[j].first)});
        }
  }
  out.colliding_agents = int(colliding.size());
  out.collision_pairs.assign(pairs.begin(), pairs.end());
  if (out.total_agents > 0)
    out.scr = double(out.colliding_agents) / out.total_agents;

  // off-road fraction over every sample of every agent
  for (const EvalAgent& a : agents)
    for (const TrajPoint& p : a.samples) {
      ++out.total_samples;
      if (!in_drivable_area(map, p.position)) ++out.offroad_samples;
    }
  if (out.total_samples > 0)
    out.orr = double(out.offroad_samples) / out.total_samples;
  return out;
}

DatasetMetrics aggregate(const std::vector<ScenarioMetrics>& scenarios) {
  DatasetMetrics d;
  d.scenarios = int(scenarios.size());
  if (scenarios.empty()) return d;
  int realism_scenarios = 0, scr_scenarios = 0;
  for (const ScenarioMetrics& s : scenarios) {
    if (s.realism_agents > 0) {
      d.lo += s.realism.lo;
      d.la += s.realism.la;
      d.je += s.realism.je;
      ++realism_scenarios;
    }
    if (s.total_agents > 0) {  // empty scenarios cannot contribute a rate
      d.scr += s.scr;
      ++scr_scenarios;
    }
    d.offroad_samples += s.offroad_samples;
    d.total_samples += s.total_samples;
  }
  if (realism_scenarios > 0) {
    d.lo /= realism_scenarios;
    d.la /= realism_scenarios;
    d.je /= realism_scenarios;
  }
  if (scr_scenarios > 0) d.scr /= scr_scenarios;
  d.orr = d.total_samples > 0 ? double(d.offroad_samples) / d.total_samples : 0.0;
  return d;
}

}  // namespace scengen
