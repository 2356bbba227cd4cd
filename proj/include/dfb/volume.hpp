#pragma once

#include "dfb/geometry.hpp"

#include <Eigen/Core>

#include <vector>

namespace dfb {

/// The synthetic scalar field, 0.5 + 0.5 sin(0.17x) sin(0.13y) cos(0.11z).
/// World units are voxels: voxel (i,j,k) has its center at (i,j,k) + 0.5.
double fieldValue(const Vec3<double>& p);
inline float fieldValue(const Vec3f& p) { return static_cast<float>(fieldValue(p.cast<double>().eval())); }

struct ControlPoint {
  float position;        // normalized scalar in [0, 1]
  Eigen::Vector4f rgba;  // straight color; alpha is opacity per unit step
};

/// Piecewise-linear RGBA transfer function over the scalar range [lo, hi].
class TransferFunction {
 public:
  TransferFunction() = default;
  /// Throws ConfigError for unsorted points, opacity outside [0,1] or hi <= lo.
  TransferFunction(float lo, float hi, std::vector<ControlPoint> points);

  static TransferFunction defaultRamp();
  static TransferFunction transparent();

  Eigen::Vector4f operator()(float scalar) const;
  float lo() const { return lo_; }
  float hi() const { return hi_; }
  const std::vector<ControlPoint>& points() const { return points_; }

 private:
  float lo_ = 0.0f;
  float hi_ = 1.0f;
  std::vector<ControlPoint> points_;
};

/// An axis-aligned piece of the volume held by one or more ranks.
///
/// Voxels are sampled from the analytic field on construction, over the
/// logical bounds plus a one-voxel ghost layer, so trilinear interpolation at
/// the boundary matches the neighboring brick exactly.
class Brick {
 public:
  Brick(int id, const Box3f& bounds, const Eigen::Vector3i& volumeDims);

  int id() const { return id_; }
  const Box3f& bounds() const { return bounds_; }
  Box3f ghostBounds() const { return bounds_.expanded(1.0f); }
  const Eigen::Vector3i& storageOrigin() const { return origin_; }
  const Eigen::Vector3i& storageDims() const { return dims_; }

  /// Voxel value at a global index, clamped to the volume.
  float voxel(Eigen::Vector3i index) const;
  /// Trilinear interpolation at a world point within the logical bounds.
  float sample(const Vec3f& p) const;

 private:
  int id_;
  Box3f bounds_;
  Eigen::Vector3i volumeDims_;
  Eigen::Vector3i origin_;
  Eigen::Vector3i dims_;
  std::vector<float> voxels_;
};

struct Fragment {
  Eigen::Vector4f rgba = Eigen::Vector4f::Zero();  // premultiplied
  float depth = std::numeric_limits<float>::infinity();
  bool hit = false;
};

struct SamplingParams {
  float step = 0.5f;      // world units between samples
  float unitStep = 1.0f;  // step the transfer-function opacity refers to
};

/// Emission-absorption integration of one brick along a ray. Samples sit at
/// the ray-global positions t = offset + k * step; a brick takes exactly the
/// samples inside its half-open logical bounds, so splitting a brick and
/// compositing the pieces with "over" reproduces the unsplit integral.
Fragment integrateBrick(const Rayf& ray, const Brick& brick, const TransferFunction& tf,
                        const SamplingParams& sampling, float offset);

}  // namespace dfb
