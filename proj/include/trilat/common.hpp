// Shared basics: error types, 2d vector, angle helpers, deterministic number formatting.
#pragma once

#include <cmath>
#include <cstdio>
#include <numbers>
#include <stdexcept>
#include <string>

namespace trilat {

inline constexpr double kPi = std::numbers::pi;

// Bad inputs: malformed files, inconsistent problem data, out-of-range options.
struct ValidationError : std::runtime_error {
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical breakdown: singular systems, non-converged solves, failed bisections.
struct NumericalError : std::runtime_error {
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

struct Vec2 {
  double x = 0, y = 0;
  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  Vec2 operator/(double s) const { return {x / s, y / s}; }
  Vec2& operator+=(Vec2 o) { x += o.x; y += o.y; return *this; }
  double dot(Vec2 o) const { return x * o.x + y * o.y; }
  double cross(Vec2 o) const { return x * o.y - y * o.x; }
  double norm() const { return std::hypot(x, y); }
  double squaredNorm() const { return x * x + y * y; }
};
inline Vec2 operator*(double s, Vec2 v) { return v * s; }

// Reduce an angle into [0, period).
inline double wrap_angle(double a, double period) {
  double r = std::fmod(a, period);
  if (r < 0) r += period;
  // fmod of a tiny negative can land exactly on period after the add
  if (r >= period) r -= period;
  return r;
}

// Distance between two directions modulo `period` (lines: period = pi), in [0, period/2].
inline double angle_dist(double a, double b, double period) {
  double d = wrap_angle(a - b, period);
  return std::min(d, period - d);
}

// Shortest signed difference a-b modulo period, in [-period/2, period/2).
inline double angle_diff_signed(double a, double b, double period) {
  double d = wrap_angle(a - b, period);
  if (d >= period / 2) d -= period;
  return d;
}

// Round-trippable decimal formatting; keeps text artifacts byte-stable across runs.
inline std::string fmt_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace trilat
