#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace vecfl {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  double dot(const Vec2& o) const { return x * o.x + y * o.y; }
  double norm() const { return std::hypot(x, y); }
  double norm2() const { return x * x + y * y; }
  bool finite() const { return std::isfinite(x) && std::isfinite(y); }
};

inline double distance(const Vec2& a, const Vec2& b) { return (a - b).norm(); }

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  Vec2 xy() const { return {x, y}; }
  bool finite() const {
    return std::isfinite(x) && std::isfinite(y) && std::isfinite(z);
  }
};

// Axis-aligned rectangle, min corner inclusive, max corner inclusive.
struct Rect {
  Vec2 min;
  Vec2 max;

  double width() const { return max.x - min.x; }
  double height() const { return max.y - min.y; }
  double area() const { return width() * height(); }
  Vec2 center() const { return {(min.x + max.x) / 2.0, (min.y + max.y) / 2.0}; }

  bool contains(const Vec2& p, double inset = 0.0) const {
    return p.x >= min.x + inset && p.x <= max.x - inset &&
           p.y >= min.y + inset && p.y <= max.y - inset;
  }

  Vec2 clamp(const Vec2& p, double inset = 0.0) const {
    auto clip = [](double v, double lo, double hi) {
      return v < lo ? lo : (v > hi ? hi : v);
    };
    return {clip(p.x, min.x + inset, max.x - inset),
            clip(p.y, min.y + inset, max.y - inset)};
  }
};

using Polyline = std::vector<Vec2>;

inline double polyline_length(const Polyline& line) {
  double total = 0.0;
  for (std::size_t i = 1; i < line.size(); ++i) {
    total += distance(line[i - 1], line[i]);
  }
  return total;
}

// Point at arc length s from the start, clamped to the endpoints.
inline Vec2 point_at_arclength(const Polyline& line, double s) {
  if (line.empty()) {
    throw std::invalid_argument("point_at_arclength: empty polyline");
  }
  if (s <= 0.0) return line.front();
  for (std::size_t i = 1; i < line.size(); ++i) {
    const double seg = distance(line[i - 1], line[i]);
    if (s <= seg && seg > 0.0) {
      const double t = s / seg;
      return line[i - 1] + (line[i] - line[i - 1]) * t;
    }
    s -= seg;
  }
  return line.back();
}

// Unit tangent of the segment containing arc length s.
inline Vec2 direction_at_arclength(const Polyline& line, double s) {
  if (line.size() < 2) {
    throw std::invalid_argument("direction_at_arclength: degenerate polyline");
  }
  double remaining = s < 0.0 ? 0.0 : s;
  for (std::size_t i = 1; i < line.size(); ++i) {
    const double seg = distance(line[i - 1], line[i]);
    if ((remaining <= seg || i + 1 == line.size()) && seg > 0.0) {
      const Vec2 d = line[i] - line[i - 1];
      return d * (1.0 / seg);
    }
    remaining -= seg;
  }
  return {1.0, 0.0};
}

// Minimum distance from point p to the segment [a, b].
inline double point_segment_distance(const Vec2& p, const Vec2& a,
                                     const Vec2& b) {
  const Vec2 ab = b - a;
  const double len2 = ab.norm2();
  if (len2 <= 0.0) return distance(p, a);
  double t = (p - a).dot(ab) / len2;
  t = t < 0.0 ? 0.0 : (t > 1.0 ? 1.0 : t);
  return distance(p, a + ab * t);
}

// Normalize an angle to (-pi, pi].
inline double wrap_angle(double angle) {
  const double two_pi = 2.0 * M_PI;
  double a = std::fmod(angle, two_pi);
  if (a <= -M_PI) a += two_pi;
  if (a > M_PI) a -= two_pi;
  return a;
}

}  // namespace vecfl
