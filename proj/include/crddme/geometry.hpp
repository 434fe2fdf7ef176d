#ifndef CRDDME_GEOMETRY_HPP
#define CRDDME_GEOMETRY_HPP

#include <cmath>

namespace crddme {

/// Point or vector in the plane, coordinates in micrometres.
struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 &operator+=(Vec2 o) { x += o.x; y += o.y; return *this; }
  Vec2 &operator-=(Vec2 o) { x -= o.x; y -= o.y; return *this; }
  Vec2 &operator*=(double s) { x *= s; y *= s; return *this; }
  friend bool operator==(Vec2, Vec2) = default;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator-(Vec2 a) { return {-a.x, -a.y}; }
inline Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
inline Vec2 operator*(Vec2 a, double s) { return {s * a.x, s * a.y}; }
inline Vec2 operator/(Vec2 a, double s) { return {a.x / s, a.y / s}; }

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm2(Vec2 a) { return dot(a, a); }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }
inline double distance(Vec2 a, Vec2 b) { return norm(a - b); }

/// Signed area of triangle (a, b, c); positive when counter-clockwise.
inline double signed_area(Vec2 a, Vec2 b, Vec2 c) {
  return 0.5 * cross(b - a, c - a);
}

/// Point at barycentric coordinates (l0, l1, 1 - l0 - l1) of triangle (a, b, c).
inline Vec2 barycentric_point(Vec2 a, Vec2 b, Vec2 c, double l0, double l1) {
  return l0 * a + l1 * b + (1.0 - l0 - l1) * c;
}

/// Maps (u, v) in the unit square to a uniformly distributed point of the
/// triangle (a, b, c).
inline Vec2 uniform_in_triangle(Vec2 a, Vec2 b, Vec2 c, double u, double v) {
  const double su = std::sqrt(u);
  return (1.0 - su) * a + (su * (1.0 - v)) * b + (su * v) * c;
}

} // namespace crddme

#endif
