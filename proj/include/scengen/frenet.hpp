#pragma once

#include <vector>

#include "scengen/map_model.hpp"

namespace scengen {

struct FrenetState {
  double s{};  // arc length along the reference
  double d{};  // signed lateral offset, positive left
};

// A single reference polyline with conversions in both directions.
class FrenetFrame {
 public:
  explicit FrenetFrame(std::vector<Vec2> reference);

  double length() const { return arc_.total_length; }

  // nearest-point projection; two distant candidates at the same distance
  // (a fold) raise a DomainError naming the s interval
  FrenetState to_frenet(Vec2 p) const;

  // r(s) + d * n(s); s beyond the ends extrapolates along the end tangents
  Vec2 from_frenet(FrenetState f) const;

  double heading(double s) const;  // clamped to the reference domain

 private:
  std::vector<Vec2> pts_;
  ArcLengthTable arc_;
};

// --- cubic time profiles ----------------------------------------------------

// x(t) = c0 + c1 t + c2 t^2 + c3 t^3 on [0, t_span], one Frenet axis
struct CubicSegment {
  double c0{}, c1{}, c2{}, c3{};
  double t_span{};
  // boundary accelerations are not fit constraints; the mismatch is kept
  // for validation
  double a0_residual{}, a1_residual{};

  double eval(double t) const { return c0 + t * (c1 + t * (c2 + t * c3)); }
  double deriv(double t) const { return c1 + t * (2.0 * c2 + 3.0 * t * c3); }
  double accel(double t) const { return 2.0 * c2 + 6.0 * c3 * t; }
};

// position and velocity at both ends are met exactly
CubicSegment fit_cubic(double p0, double v0, double a0, double p1, double v1,
                       double a1, double t_span);

// --- curvature and feasibility -----------------------------------------------

inline constexpr double kSlowSpeedGuard = 0.1;  // m/s, below this curvature is 0

// central finite differences on uniformly sampled positions; endpoints copy
// their neighbors
std::vector<double> curvature(const std::vector<Vec2>& positions, double delta);

struct FeasibilityLimits {
  double r_min = 5.0;    // m
  double a_y_max = 3.0;  // m/s^2
  double kappa_max() const { return 1.0 / r_min; }
};

struct FeasibilityViolation {
  int index{};
  double kappa{};
  double a_y{};
};

struct FeasibilityReport {
  std::vector<FeasibilityViolation> violations;
  double max_kappa{};
  double max_a_y{};
  bool ok() const { return violations.empty(); }
};

FeasibilityReport check_feasibility(const std::vector<Vec2>& positions, double delta,
                                    const FeasibilityLimits& limits);

// --- grid path smoothing -------------------------------------------------------

// One waypoint of the discrete path: a cell arrival (or the spawn point).
struct PathKnot {
  double t{};          // s
  Vec2 position;       // cell center
  LaneId lane;
  double s_lane{};     // arc position within the lane
  bool lateral_join_next = false;  // next knot is reached by crossing lanes
};

struct TrajPoint {
  double t{};
  Vec2 position;
  double speed{};
  double heading{};
};

struct SmoothResult {
  std::vector<TrajPoint> points;
  bool unsmoothable = false;  // a segment stayed infeasible after rescaling
  int scaled_segments = 0;    // how many segment slow-downs were applied
  double max_kappa{};
  double max_a_y{};
  double max_accel_residual{};
};

inline constexpr double kSpeedScaleFactor = 0.9;
inline constexpr int kMaxScaleIterations = 10;
inline constexpr double kMinScaledSpeed = 1.0;  // m/s

// Fits per-segment cubics for s(t) and d(t) over the knot sequence, spreads
// lateral lane transitions over a dynamically sized window, samples every
// `delta`, and slows violating segments (time dilation) until the curvature
// and lateral-acceleration limits hold.
SmoothResult smooth_path(const std::vector<PathKnot>& knots, const MapModel& map,
                         const FeasibilityLimits& limits, double delta);

}  // namespace scengen
