// Copyright 2026 The Playtest Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef PLAYTEST_GEOMETRY_HPP_
#define PLAYTEST_GEOMETRY_HPP_

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

namespace playtest {

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  constexpr double operator[](int axis) const {
    return axis == 0 ? x : (axis == 1 ? y : z);
  }
  constexpr double& operator[](int axis) {
    return axis == 0 ? x : (axis == 1 ? y : z);
  }

  constexpr Vec3& operator+=(const Vec3& o) {
    x += o.x;
    y += o.y;
    z += o.z;
    return *this;
  }
  constexpr Vec3& operator-=(const Vec3& o) {
    x -= o.x;
    y -= o.y;
    z -= o.z;
    return *this;
  }

  friend constexpr Vec3 operator+(Vec3 a, const Vec3& b) { return a += b; }
  friend constexpr Vec3 operator-(Vec3 a, const Vec3& b) { return a -= b; }
  friend constexpr Vec3 operator*(Vec3 a, double s) {
    return {a.x * s, a.y * s, a.z * s};
  }
  friend constexpr Vec3 operator*(double s, Vec3 a) { return a * s; }
  friend constexpr bool operator==(const Vec3&, const Vec3&) = default;
};

constexpr double dot(const Vec3& a, const Vec3& b) {
  return a.x * b.x + a.y * b.y + a.z * b.z;
}

inline double norm(const Vec3& v) { return std::sqrt(dot(v, v)); }

inline double distance(const Vec3& a, const Vec3& b) { return norm(a - b); }

/// Axis-aligned box given by its min and max corners.
struct Aabb {
  Vec3 min;
  Vec3 max;

  static Aabb centered(const Vec3& center, const Vec3& half_extent) {
    return {center - half_extent, center + half_extent};
  }

  Vec3 center() const { return (min + max) * 0.5; }

  bool valid() const { return min.x < max.x && min.y < max.y && min.z < max.z; }

  bool contains(const Vec3& p) const {
    return p.x >= min.x && p.x <= max.x && p.y >= min.y && p.y <= max.y &&
           p.z >= min.z && p.z <= max.z;
  }

  Aabb translated(const Vec3& d) const { return {min + d, max + d}; }

  Aabb expanded(const Vec3& margin) const { return {min - margin, max + margin}; }

  friend bool operator==(const Aabb&, const Aabb&) = default;
};

/// Overlap along a single axis with an open interval test, shrunk by `eps`.
inline bool overlaps_on_axis(const Aabb& a, const Aabb& b, int axis,
                             double eps = 0.0) {
  return a.min[axis] < b.max[axis] - eps && b.min[axis] < a.max[axis] - eps;
}

inline bool overlaps(const Aabb& a, const Aabb& b, double eps = 0.0) {
  return overlaps_on_axis(a, b, 0, eps) && overlaps_on_axis(a, b, 1, eps) &&
         overlaps_on_axis(a, b, 2, eps);
}

/// Depth of interpenetration between two boxes (0 when disjoint): the
/// smallest per-axis overlap.
inline double penetration_depth(const Aabb& a, const Aabb& b) {
  double depth = std::numeric_limits<double>::infinity();
  for (int axis = 0; axis < 3; ++axis) {
    const double o = std::min(a.max[axis], b.max[axis]) -
                     std::max(a.min[axis], b.min[axis]);
    if (o <= 0.0) return 0.0;
    depth = std::min(depth, o);
  }
  return depth;
}

/// Slab test of the ray `origin + t * dir`, t in [t_min, t_max]. Returns the
/// entry parameter. A ray starting inside the box reports t_min.
inline std::optional<double> ray_aabb(const Vec3& origin, const Vec3& dir,
                                      const Aabb& box, double t_min,
                                      double t_max) {
  double lo = t_min;
  double hi = t_max;
  for (int axis = 0; axis < 3; ++axis) {
    const double o = origin[axis];
    const double d = dir[axis];
    if (d == 0.0) {
      if (o < box.min[axis] || o > box.max[axis]) return std::nullopt;
      continue;
    }
    const double inv = 1.0 / d;
    double t0 = (box.min[axis] - o) * inv;
    double t1 = (box.max[axis] - o) * inv;
    if (t0 > t1) std::swap(t0, t1);
    lo = std::max(lo, t0);
    hi = std::min(hi, t1);
    if (lo > hi) return std::nullopt;
  }
  return lo;
}

/// True when the closed segment [a, b] touches the box.
inline bool segment_intersects(const Vec3& a, const Vec3& b, const Aabb& box) {
  return ray_aabb(a, b - a, box, 0.0, 1.0).has_value();
}

}  // namespace playtest

#endif  // PLAYTEST_GEOMETRY_HPP_
