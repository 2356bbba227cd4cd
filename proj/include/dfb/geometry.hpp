#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

namespace dfb {

template <typename Scalar>
using Vec3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Vec4 = Eigen::Matrix<Scalar, 4, 1>;

using Vec3f = Vec3<float>;
using Vec4f = Vec4<float>;

/// Axis-aligned box. Containment is half-open: lower <= p < upper.
template <typename Scalar>
struct Box3 {
  Vec3<Scalar> lower{Vec3<Scalar>::Zero()};
  Vec3<Scalar> upper{Vec3<Scalar>::Zero()};

  Box3() = default;
  Box3(const Vec3<Scalar>& lo, const Vec3<Scalar>& hi) : lower(lo), upper(hi) {}

  Vec3<Scalar> center() const { return (lower + upper) * Scalar(0.5); }
  Vec3<Scalar> size() const { return upper - lower; }
  bool empty() const { return (upper.array() <= lower.array()).any(); }

  bool contains(const Vec3<Scalar>& p) const {
    return (p.array() >= lower.array()).all() && (p.array() < upper.array()).all();
  }

  Vec3<Scalar> corner(int i) const {
    return {(i & 1) ? upper.x() : lower.x(), (i & 2) ? upper.y() : lower.y(),
            (i & 4) ? upper.z() : lower.z()};
  }

  Box3 expanded(Scalar amount) const {
    return {lower.array() - amount, upper.array() + amount};
  }

  bool operator==(const Box3& o) const { return lower == o.lower && upper == o.upper; }
};

using Box3f = Box3<float>;

template <typename Scalar>
struct Ray {
  Vec3<Scalar> origin;
  Vec3<Scalar> direction;  // unit length

  Vec3<Scalar> at(Scalar t) const { return origin + t * direction; }
};

using Rayf = Ray<float>;

template <typename Scalar>
struct Interval {
  Scalar lower;
  Scalar upper;
};

/// Slab test. Returns the parametric interval [max(enter, 0), exit] of the
/// ray inside the box, or nothing when the ray misses or the box is behind.
template <typename Scalar>
std::optional<Interval<Scalar>> intersect(const Ray<Scalar>& ray, const Box3<Scalar>& box) {
  Scalar t0 = Scalar(0);
  Scalar t1 = std::numeric_limits<Scalar>::infinity();
  for (int a = 0; a < 3; ++a) {
    const Scalar inv = Scalar(1) / ray.direction[a];
    Scalar tn = (box.lower[a] - ray.origin[a]) * inv;
    Scalar tf = (box.upper[a] - ray.origin[a]) * inv;
    if (std::isnan(tn) || std::isnan(tf)) {
      // Ray parallel to and lying on a slab plane.
      if (ray.origin[a] < box.lower[a] || ray.origin[a] >= box.upper[a]) return std::nullopt;
      continue;
    }
    if (tn > tf) std::swap(tn, tf);
    t0 = std::max(t0, tn);
    t1 = std::min(t1, tf);
    if (t1 <= t0) return std::nullopt;
  }
  return Interval<Scalar>{t0, t1};
}

/// Front-to-back premultiplied "over": composites `behind` under `front`.
template <typename Derived, typename Other>
void blendUnder(Eigen::MatrixBase<Derived>& front, const Eigen::MatrixBase<Other>& behind) {
  using Scalar = typename Derived::Scalar;
  const Scalar transmittance = Scalar(1) - front[3];
  front += transmittance * behind;
}

/// Rec. 709 luminance of a premultiplied RGBA value after un-premultiplying.
template <typename Derived>
typename Derived::Scalar luminance(const Eigen::MatrixBase<Derived>& rgba) {
  using Scalar = typename Derived::Scalar;
  const Scalar a = rgba[3];
  if (a <= Scalar(0)) return Scalar(0);
  return (Scalar(0.2126) * rgba[0] + Scalar(0.7152) * rgba[1] + Scalar(0.0722) * rgba[2]) / a;
}

}  // namespace dfb
