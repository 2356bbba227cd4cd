#pragma once

#include "dfb/geometry.hpp"

#include <Eigen/Core>
#include <optional>

namespace dfb {

/// Pinhole camera. Pixel (x, y) counts from the top-left corner; pixel
/// centers sit at half-integer coordinates.
class Camera {
 public:
  Camera(const Vec3f& position, const Vec3f& direction, const Vec3f& up, float fovYDegrees, float aspect);

  const Vec3f& position() const { return position_; }
  const Vec3f& forward() const { return forward_; }
  const Vec3f& right() const { return right_; }
  const Vec3f& up() const { return up_; }
  float fovY() const { return fovY_; }
  float aspect() const { return aspect_; }

  /// Primary ray through continuous screen position (sx, sy) of a w x h image.
  Rayf ray(float sx, float sy, int width, int height) const;
  Rayf pixelRay(int x, int y, int width, int height) const {
    return ray(static_cast<float>(x) + 0.5f, static_cast<float>(y) + 0.5f, width, height);
  }
  /// Continuous screen position of a world point; empty if not in front of the camera.
  std::optional<Eigen::Vector2f> project(const Vec3f& p, int width, int height) const;
  /// Camera-space depth along the view direction.
  float viewDepth(const Vec3f& p) const { return (p - position_).dot(forward_); }

 private:
  Vec3f position_;
  Vec3f forward_;
  Vec3f right_;
  Vec3f up_;
  float fovY_;
  float aspect_;
  float tanHalf_;
};

/// Camera on a circle of radius 1.5x the scene diagonal in the horizontal
/// plane through the scene center, at angle 2*pi*frame/frames, looking at the center.
Camera orbitCamera(int frame, int frames, const Box3f& sceneBounds, float aspect = 1.0f, float fovYDegrees = 60.0f);

}  // namespace dfb
