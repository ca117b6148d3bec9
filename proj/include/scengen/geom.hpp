#pragma once

#include <cmath>

namespace scengen {

struct Vec2 {
  double x{};  // m
  double y{};  // m
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double k, Vec2 v) { return {k * v.x, k * v.y}; }
inline Vec2 operator*(Vec2 v, double k) { return {k * v.x, k * v.y}; }

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 v) { return std::hypot(v.x, v.y); }
inline double dist(Vec2 a, Vec2 b) { return norm(b - a); }

inline Vec2 lerp(Vec2 a, Vec2 b, double t) {
  return {a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)};
}

// unit left normal; input must be non-zero
inline Vec2 left_normal(Vec2 dir) {
  double n = norm(dir);
  return {-dir.y / n, dir.x / n};
}

// foot parameter of p on segment [a,b], clamped to [0,1]
inline double segment_param(Vec2 a, Vec2 b, Vec2 p) {
  Vec2 ab = b - a;
  double len2 = dot(ab, ab);
  if (len2 <= 0.0) return 0.0;
  double t = dot(p - a, ab) / len2;
  if (t < 0.0) return 0.0;
  if (t > 1.0) return 1.0;
  return t;
}

}  // namespace scengen
