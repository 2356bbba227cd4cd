#include "dfb/camera.hpp"

#include "dfb/errors.hpp"

#include <Eigen/Geometry>
#include <cmath>
#include <numbers>

namespace dfb {

Camera::Camera(const Vec3f& position, const Vec3f& direction, const Vec3f& up, float fovYDegrees, float aspect)
    : position_(position), fovY_(fovYDegrees), aspect_(aspect) {
  forward_ = direction.normalized();
  right_ = forward_.cross(up);
  if (right_.norm() < 1e-6f) throw ConfigError("camera direction and up are parallel");
  right_.normalize();
  up_ = right_.cross(forward_);
  tanHalf_ = std::tan(fovYDegrees * std::numbers::pi_v<float> / 360.0f);
}

Rayf Camera::ray(float sx, float sy, int width, int height) const {
  const float u = (2.0f * sx / static_cast<float>(width) - 1.0f) * tanHalf_ * aspect_;
  const float v = (1.0f - 2.0f * sy / static_cast<float>(height)) * tanHalf_;
  return {position_, (forward_ + u * right_ + v * up_).normalized()};
}

std::optional<Eigen::Vector2f> Camera::project(const Vec3f& p, int width, int height) const {
  const Vec3f d = p - position_;
  const float z = d.dot(forward_);
  if (z <= 1e-6f) return std::nullopt;
  const float u = d.dot(right_) / z / (tanHalf_ * aspect_);
  const float v = d.dot(up_) / z / tanHalf_;
  return Eigen::Vector2f((u + 1.0f) * 0.5f * static_cast<float>(width),
                         (1.0f - v) * 0.5f * static_cast<float>(height));
}

Camera orbitCamera(int frame, int frames, const Box3f& sceneBounds, float aspect, float fovYDegrees) {
  if (frames < 1) throw ConfigError("orbit needs at least one frame");
  const Vec3f center = sceneBounds.center();
  const float radius = 1.5f * sceneBounds.size().norm();
  const double angle = 2.0 * std::numbers::pi * static_cast<double>(frame % frames) / static_cast<double>(frames);
  const Vec3f position = center + radius * Vec3f(static_cast<float>(std::cos(angle)), 0.0f,
                                                 static_cast<float>(std::sin(angle)));
  return Camera(position, center - position, Vec3f::UnitY(), fovYDegrees, aspect);
}

}  // namespace dfb
