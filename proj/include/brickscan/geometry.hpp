#pragma once

#include <algorithm>
#include <cmath>

namespace brickscan {

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  constexpr double operator[](int axis) const { return axis == 0 ? x : (axis == 1 ? y : z); }
  constexpr double& operator[](int axis) { return axis == 0 ? x : (axis == 1 ? y : z); }

  friend constexpr Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend constexpr Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend constexpr Vec3 operator-(Vec3 a) { return {-a.x, -a.y, -a.z}; }
  friend constexpr Vec3 operator*(Vec3 a, double s) { return {a.x * s, a.y * s, a.z * s}; }
  friend constexpr Vec3 operator*(double s, Vec3 a) { return a * s; }
  friend constexpr bool operator==(Vec3 a, Vec3 b) = default;
};

constexpr double dot(Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

constexpr Vec3 cross(Vec3 a, Vec3 b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

inline double length(Vec3 a) { return std::sqrt(dot(a, a)); }

inline Vec3 normalized(Vec3 a) {
  const double len = length(a);
  return len > 0.0 ? a * (1.0 / len) : Vec3{};
}

struct Aabb {
  Vec3 lo{INFINITY, INFINITY, INFINITY};
  Vec3 hi{-INFINITY, -INFINITY, -INFINITY};

  void expand(Vec3 p) {
    lo = {std::min(lo.x, p.x), std::min(lo.y, p.y), std::min(lo.z, p.z)};
    hi = {std::max(hi.x, p.x), std::max(hi.y, p.y), std::max(hi.z, p.z)};
  }
  void expand(const Aabb& b) {
    expand(b.lo);
    expand(b.hi);
  }
  bool valid() const { return lo.x <= hi.x && lo.y <= hi.y && lo.z <= hi.z; }
  Vec3 extent() const { return hi - lo; }
  Vec3 center() const { return (lo + hi) * 0.5; }
};

/// Axis-aligned rectangle, (x, y) is the minimum corner. Used both for
/// millimetre wall-front rects (y up) and pixel rects (y down).
struct Rect {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  constexpr double area() const { return w * h; }
  constexpr double right() const { return x + w; }
  constexpr double bottom() const { return y + h; }
  constexpr double cx() const { return x + 0.5 * w; }
  constexpr double cy() const { return y + 0.5 * h; }
  constexpr bool contains(double px, double py) const {
    return px >= x && px < x + w && py >= y && py < y + h;
  }
  friend constexpr bool operator==(const Rect&, const Rect&) = default;
};

inline double intersection_area(const Rect& a, const Rect& b) {
  const double w = std::min(a.right(), b.right()) - std::max(a.x, b.x);
  const double h = std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y);
  return (w > 0.0 && h > 0.0) ? w * h : 0.0;
}

inline double iou(const Rect& a, const Rect& b) {
  const double inter = intersection_area(a, b);
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

/// Grows the rect by `fraction` of its size in each dimension, keeping the center.
inline Rect dilate(const Rect& r, double fraction) {
  const double dw = r.w * fraction;
  const double dh = r.h * fraction;
  return {r.x - 0.5 * dw, r.y - 0.5 * dh, r.w + dw, r.h + dh};
}

/// Integer pixel rectangle.
struct RectI {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;
  friend constexpr bool operator==(const RectI&, const RectI&) = default;
};

}  // namespace brickscan
