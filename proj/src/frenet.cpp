#include "scengen/frenet.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "scengen/errors.hpp"

namespace scengen {

namespace {

// nearest point on a polyline with a signed lateral offset; no fold detection
FrenetState project_raw(const std::vector<Vec2>& pts, const ArcLengthTable& arc,
                        Vec2 p) {
  FrenetState best;
  double best_dist = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i + 1 < pts.size(); ++i) {
    double t = segment_param(pts[i], pts[i + 1], p);
    Vec2 foot = lerp(pts[i], pts[i + 1], t);
    double d = dist(p, foot);
    if (d >= best_dist) continue;
    best_dist = d;
    double side = cross(pts[i + 1] - pts[i], p - foot);
    best.s = arc.cumulative_s[i] +
             t * (arc.cumulative_s[i + 1] - arc.cumulative_s[i]);
    best.d = side >= 0.0 ? d : -d;
  }
  return best;
}

}  // namespace

FrenetFrame::FrenetFrame(std::vector<Vec2> reference) : pts_(std::move(reference)) {
  arc_ = arc_length_param(pts_);
}

FrenetState FrenetFrame::to_frenet(Vec2 p) const {
  struct Candidate {
    double s;
    double dist;
  };
  std::vector<Candidate> candidates;
  double best_dist = std::numeric_limits<double>::infinity();
  FrenetState best;
  for (size_t i = 0; i + 1 < pts_.size(); ++i) {
    double t = segment_param(pts_[i], pts_[i + 1], p);
    Vec2 foot = lerp(pts_[i], pts_[i + 1], t);
    double d = dist(p, foot);
    double s = arc_.cumulative_s[i] +
               t * (arc_.cumulative_s[i + 1] - arc_.cumulative_s[i]);
    candidates.push_back({s, d});
    if (d < best_dist) {
      best_dist = d;
      double side = cross(pts_[i + 1] - pts_[i], p - foot);
      best = {s, side >= 0.0 ? d : -d};
    }
  }
  // a fold shows up as two equally near feet far apart along the reference
  double s_lo = best.s, s_hi = best.s;
  for (const Candidate& c : candidates) {
    if (c.dist <= best_dist + 1e-9) {
      s_lo = std::min(s_lo, c.s);
      s_hi = std::max(s_hi, c.s);
    }
  }
  if (s_hi - s_lo > 1.0) {
    std::ostringstream os;
    os << "ambiguous projection: equally near feet over s in [" << s_lo << ", "
       << s_hi << "]";
    throw DomainError(os.str());
  }
  return best;
}

Vec2 FrenetFrame::from_frenet(FrenetState f) const {
  double s = f.s;
  Vec2 base;
  double h;
  if (s < 0.0) {
    h = heading_at_arclength(arc_, pts_, 0.0);
    base = pts_.front() + s * Vec2{std::cos(h), std::sin(h)};
  } else if (s > arc_.total_length) {
    h = heading_at_arclength(arc_, pts_, arc_.total_length);
    base = pts_.back() + (s - arc_.total_length) * Vec2{std::cos(h), std::sin(h)};
  } else {
    h = heading_at_arclength(arc_, pts_, s);
    base = point_at_arclength(arc_, pts_, s);
  }
  return base + f.d * Vec2{-std::sin(h), std::cos(h)};
}

double FrenetFrame::heading(double s) const {
  return heading_at_arclength(arc_, pts_, std::clamp(s, 0.0, arc_.total_length));
}

CubicSegment fit_cubic(double p0, double v0, double a0, double p1, double v1,
                       double a1, double t_span) {
  if (!(t_span > 0.0)) {
    std::ostringstream os;
    os << "cubic fit needs a positive time span, got " << t_span;
    throw DomainError(os.str());
  }
  double T = t_span;
  double dp = p1 - p0;
  CubicSegment seg;
  seg.c0 = p0;
  seg.c1 = v0;
  seg.c2 = (3.0 * dp - (2.0 * v0 + v1) * T) / (T * T);
  seg.c3 = (-2.0 * dp + (v0 + v1) * T) / (T * T * T);
  seg.t_span = T;
  seg.a0_residual = std::abs(seg.accel(0.0) - a0);
  seg.a1_residual = std::abs(seg.accel(T) - a1);
  return seg;
}

std::vector<double> curvature(const std::vector<Vec2>& positions, double delta) {
  size_t n = positions.size();
  std::vector<double> k(n, 0.0);
  if (n < 3 || !(delta > 0.0)) return k;
  for (size_t i = 1; i + 1 < n; ++i) {
    double vx = (positions[i + 1].x - positions[i - 1].x) / (2.0 * delta);
    double vy = (positions[i + 1].y - positions[i - 1].y) / (2.0 * delta);
    double speed = std::hypot(vx, vy);
    if (speed < kSlowSpeedGuard) continue;  // curvature is meaningless at rest
    double ax =
        (positions[i + 1].x - 2.0 * positions[i].x + positions[i - 1].x) /
        (delta * delta);
    double ay =
        (positions[i + 1].y - 2.0 * positions[i].y + positions[i - 1].y) /
        (delta * delta);
    k[i] = std::abs(vx * ay - vy * ax) / (speed * speed * speed);
  }
  k[0] = k[1];
  k[n - 1] = k[n - 2];
  return k;
}

FeasibilityReport check_feasibility(const std::vector<Vec2>& positions, double delta,
                                    const FeasibilityLimits& limits) {
  FeasibilityReport report;
  size_t n = positions.size();
  if (n < 3) return report;
  std::vector<double> k = curvature(positions, delta);
  for (size_t i = 1; i + 1 < n; ++i) {
    double vx = (positions[i + 1].x - positions[i - 1].x) / (2.0 * delta);
    double vy = (positions[i + 1].y - positions[i - 1].y) / (2.0 * delta);
    double v2 = vx * vx + vy * vy;
    double a_y = k[i] * v2;
    report.max_kappa = std::max(report.max_kappa, k[i]);
    report.max_a_y = std::max(report.max_a_y, a_y);
    if (k[i] > limits.kappa_max() || a_y > limits.a_y_max)
      report.violations.push_back({int(i), k[i], a_y});
  }
  return report;
}

// --- smoothing ----------------------------------------------------------------

namespace {

struct Run {
  int first = 0, last = 0;  // knot range, inclusive
  const Lane* lane = nullptr;
};

struct Piece {
  const Lane* lane = nullptr;
  double g = 0.0;       // global s = g + local s
  double off = 0.0;     // lateral level relative to the final piece
  double junction = std::numeric_limits<double>::infinity();  // global end
};

struct Ramp {
  double a = 0.0, b = 1.0;  // window in global arc length
  double delta = 0.0;       // level change across the window
};

double smoothstep(double u) { return u * u * (3.0 - 2.0 * u); }

double ramp_value(const Ramp& r, double s) {
  double u = std::clamp((s - r.a) / (r.b - r.a), 0.0, 1.0);
  return r.delta * smoothstep(u);
}

}  // namespace

namespace {

// A same-index lateral hop lands on the adjacent lane with no longitudinal
// advance; keeping both knots would stall s(t) while the lateral ramp runs,
// which bends the sampled path into an unbounded-curvature sideways slide.
// The far-side knot carries no new path station, so it is folded away and
// the join stretches to the next advancing knot instead.
constexpr double kMinJoinAdvance = 0.5;  // m

std::vector<PathKnot> fold_degenerate_joins(const std::vector<PathKnot>& knots,
                                            const MapModel& map) {
  std::vector<PathKnot> out;
  out.reserve(knots.size());
  for (const PathKnot& k : knots) {
    if (!out.empty() && out.back().lateral_join_next && k.lane != out.back().lane) {
      const Lane* lane = map.find(k.lane);
      if (!lane) throw DomainError("unknown lane " + k.lane + " in path");
      FrenetState proj =
          project_raw(lane->centerline, lane->arc, out.back().position);
      if (std::abs(k.s_lane - proj.s) < kMinJoinAdvance) continue;
    }
    out.push_back(k);
  }
  if (!out.empty()) out.back().lateral_join_next = false;  // nothing follows
  return out;
}

}  // namespace

SmoothResult smooth_path(const std::vector<PathKnot>& raw_knots, const MapModel& map,
                         const FeasibilityLimits& limits, double delta) {
  SmoothResult result;
  std::vector<PathKnot> knots = fold_degenerate_joins(raw_knots, map);
  if (knots.empty()) return result;
  if (knots.size() == 1) {
    const Lane* lane = map.find(knots[0].lane);
    double h = lane ? heading_at_arclength(
                          lane->arc, lane->centerline,
                          std::clamp(knots[0].s_lane, 0.0, lane->length()))
                    : 0.0;
    result.points.push_back({knots[0].t, knots[0].position, 0.0, h});
    return result;
  }

  const int m = int(knots.size());

  // maximal runs of knots on the same lane
  std::vector<Run> runs;
  for (int i = 0; i < m; ++i) {
    if (runs.empty() || knots[i].lane != runs.back().lane->id) {
      const Lane* lane = map.find(knots[i].lane);
      if (!lane) throw DomainError("unknown lane " + knots[i].lane + " in path");
      runs.push_back({i, i, lane});
    } else {
      runs.back().last = i;
    }
  }

  const int R = int(runs.size());
  std::vector<Piece> pieces(R);
  std::vector<FrenetFrame> frames;
  frames.reserve(R);
  for (const Run& r : runs) frames.emplace_back(r.lane->centerline);

  // global s alignment and lateral levels across the joins
  std::vector<double> d_rel(std::max(0, R - 1), 0.0);
  pieces[0].lane = runs[0].lane;
  pieces[0].g = 0.0;
  for (int r = 0; r + 1 < R; ++r) {
    int c = runs[r].last;
    bool lateral = knots[c].lateral_join_next;
    double anchor_old, anchor_new;
    Vec2 junction_point;
    if (lateral) {
      anchor_old = knots[c].s_lane;
      junction_point = knots[c].position;
    } else {
      anchor_old = runs[r].lane->length();
      junction_point = runs[r].lane->centerline.back();
    }
    FrenetState proj = project_raw(runs[r + 1].lane->centerline,
                                   runs[r + 1].lane->arc, junction_point);
    anchor_new = lateral ? proj.s : 0.0;
    d_rel[r] = proj.d;
    pieces[r].junction = pieces[r].g + anchor_old;
    pieces[r + 1].lane = runs[r + 1].lane;
    pieces[r + 1].g = pieces[r].g + anchor_old - anchor_new;
  }
  pieces[R - 1].off = 0.0;
  for (int r = R - 2; r >= 0; --r) pieces[r].off = pieces[r + 1].off + d_rel[r];

  // fixed global arc positions per knot
  std::vector<double> gs(m);
  {
    int r = 0;
    for (int i = 0; i < m; ++i) {
      while (r + 1 < R && i >= runs[r + 1].first) ++r;
      gs[i] = pieces[r].g + knots[i].s_lane;
    }
  }

  std::vector<double> durations(m - 1);
  for (int i = 0; i + 1 < m; ++i) {
    durations[i] = knots[i + 1].t - knots[i].t;
    if (!(durations[i] > 0.0))
      throw DomainError("path knots must be strictly time-ordered");
  }

  std::vector<double> T(m), slope(m), dval(m);
  std::vector<CubicSegment> seg_s(m - 1);
  std::vector<Ramp> ramps;
  std::vector<Vec2> samples;
  std::vector<double> sample_t;

  std::vector<double> sec(m - 1);

  auto rebuild_and_sample = [&]() {
    T[0] = knots[0].t;
    for (int i = 0; i + 1 < m; ++i) T[i + 1] = T[i] + durations[i];
    for (int i = 0; i + 1 < m; ++i) sec[i] = (gs[i + 1] - gs[i]) / durations[i];

    // lateral transition windows, one per join.  The blend lives in arc
    // length, not time: when s(t) pauses at a hold the lateral offset pauses
    // with it, so a standing vehicle never slides sideways.  Each window is
    // wide enough for the curvature bound at any speed and for the
    // lateral-acceleration bound at the speed the join is taken with.
    // Windows may overlap; smoothstep ramps sum and each one's curvature
    // share stays within its budget.  Lane-switch joins get half the
    // curvature budget, small frame-alignment joins at lane junctions a
    // tenth, so a stack of a turn arc, an alignment, and a lane change
    // stays under the limit.
    ramps.clear();
    std::vector<int> join_knot;
    std::vector<double> join_mid;
    for (int r = 0; r + 1 < R; ++r) {
      join_knot.push_back(runs[r].last);
      join_mid.push_back((gs[runs[r].last] + gs[runs[r].last + 1]) / 2.0);
    }
    for (size_t q = 0; q < join_knot.size(); ++q) {
      int c = join_knot[q];
      Ramp ramp;
      ramp.delta = pieces[q + 1].off - pieces[q].off;
      double budget = std::abs(ramp.delta) > 1.0 ? 0.5 : 0.1;
      double t_w = std::sqrt(6.0 * std::abs(ramp.delta) /
                             std::max(budget * limits.a_y_max, 1e-9));
      double w_kappa = std::sqrt(6.0 * std::abs(ramp.delta) /
                                 std::max(budget * limits.kappa_max(), 1e-9));
      double w = std::max(w_kappa, sec[c] * t_w);
      ramp.a = join_mid[q] - w / 2.0;
      ramp.b = join_mid[q] + w / 2.0;
      // slide the window to keep the full width near the path ends, so the
      // spawn point stays put and the final knot is reached exactly
      if (ramp.a < gs.front()) {
        ramp.b += gs.front() - ramp.a;
        ramp.a = gs.front();
      }
      if (ramp.b > gs.back()) {
        ramp.a -= ramp.b - gs.back();
        ramp.b = gs.back();
      }
      if (ramp.a < gs.front()) ramp.a = gs.front();  // path shorter than w
      if (!(ramp.b > ramp.a)) {  // degenerate window, keep the raw span
        ramp.a = gs[c];
        ramp.b = std::max(gs[c + 1], gs[c] + 1e-6);
      }
      ramps.push_back(ramp);
    }

    auto d_at = [&](double s) {
      double v = pieces[0].off;
      for (const Ramp& r : ramps) v += ramp_value(r, s);
      return v;
    };
    for (int i = 0; i < m; ++i) dval[i] = d_at(gs[i]);

    // longitudinal knot velocities: limited central differences keep s(t)
    // monotone (no backing up) and stop cleanly at holds
    for (int i = 0; i < m; ++i) {
      if (i == 0)
        slope[i] = sec[0];
      else if (i == m - 1)
        slope[i] = sec[m - 2];
      else
        slope[i] = (gs[i + 1] - gs[i - 1]) / (T[i + 1] - T[i - 1]);
      double lo = (i == 0) ? sec[0] : sec[i - 1];
      double hi = (i == m - 1) ? sec[m - 2] : sec[i];
      double cap = 3.0 * std::min(lo, hi);
      if (cap <= 0.0)
        slope[i] = 0.0;
      else
        slope[i] = std::clamp(slope[i], 0.0, cap);
    }

    for (int i = 0; i + 1 < m; ++i) {
      double acc0 = 0.0, acc1 = 0.0;
      if (i > 0) acc0 = (sec[i] - sec[i - 1]) / ((T[i + 1] - T[i - 1]) / 2.0);
      if (i + 2 < m) acc1 = (sec[i + 1] - sec[i]) / ((T[i + 2] - T[i]) / 2.0);
      seg_s[i] = fit_cubic(gs[i], slope[i], acc0, gs[i + 1], slope[i + 1], acc1,
                           durations[i]);
      result.max_accel_residual = std::max(
          {result.max_accel_residual, seg_s[i].a0_residual, seg_s[i].a1_residual});
    }

    // sample on the delta grid; the final sample clamps to the last knot
    samples.clear();
    sample_t.clear();
    int count = std::max(1, int(std::ceil((T.back() - T.front()) / delta - 1e-9)));
    for (int j = 0; j <= count; ++j) {
      double t = std::min(T.front() + j * delta, T.back());
      int i = int(std::upper_bound(T.begin(), T.end(), t) - T.begin()) - 1;
      i = std::clamp(i, 0, m - 2);
      double tau = t - T[i];
      double s = seg_s[i].eval(tau);
      double dv = d_at(s);
      int p = 0;
      while (p + 1 < R && s > pieces[p].junction) ++p;
      Vec2 pos = frames[p].from_frenet({s - pieces[p].g, dv - pieces[p].off});
      samples.push_back(pos);
      sample_t.push_back(t);
    }
  };

  FeasibilityReport report;
  for (int pass = 0;; ++pass) {
    rebuild_and_sample();
    report = check_feasibility(samples, delta, limits);
    if (report.ok()) break;
    if (pass >= kMaxScaleIterations) {
      result.unsmoothable = true;
      break;
    }
    std::vector<bool> mark(m - 1, false);
    for (const FeasibilityViolation& v : report.violations) {
      double t = sample_t[v.index];
      int i = int(std::upper_bound(T.begin(), T.end(), t) - T.begin()) - 1;
      mark[std::clamp(i, 0, m - 2)] = true;
    }
    bool any = false;
    for (int i = 0; i + 1 < m; ++i) {
      if (!mark[i]) continue;
      double span = std::hypot(gs[i + 1] - gs[i], dval[i + 1] - dval[i]);
      double speed = span / durations[i];
      if (speed * kSpeedScaleFactor < kMinScaledSpeed && span > 0.0)
        continue;  // at the floor, nothing left to give
      durations[i] /= kSpeedScaleFactor;
      ++result.scaled_segments;
      any = true;
    }
    if (!any) {
      result.unsmoothable = true;
      break;
    }
  }
  result.max_kappa = report.max_kappa;
  result.max_a_y = report.max_a_y;

  // derived speed and heading per sample
  result.points.resize(samples.size());
  double prev_heading =
      frames[0].heading(std::clamp(gs[0] - pieces[0].g, 0.0, frames[0].length()));
  for (size_t j = 0; j < samples.size(); ++j) {
    TrajPoint& pt = result.points[j];
    pt.t = sample_t[j];
    pt.position = samples[j];
    if (j == 0) {
      pt.speed = 0.0;
      pt.heading = prev_heading;
      continue;
    }
    Vec2 dp = samples[j] - samples[j - 1];
    double step = sample_t[j] - sample_t[j - 1];
    pt.speed = step > 0.0 ? norm(dp) / step : 0.0;
    if (pt.speed >= kSlowSpeedGuard) prev_heading = std::atan2(dp.y, dp.x);
    pt.heading = prev_heading;
  }
  if (result.points.size() > 1) result.points[0].speed = result.points[1].speed;

  return result;
}

}  // namespace scengen
