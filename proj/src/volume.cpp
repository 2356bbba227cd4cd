#include "dfb/volume.hpp"

#include "dfb/errors.hpp"

#include <algorithm>
#include <cmath>

namespace dfb {

double fieldValue(const Vec3<double>& p) {
  return 0.5 + 0.5 * std::sin(0.17 * p.x()) * std::sin(0.13 * p.y()) * std::cos(0.11 * p.z());
}

TransferFunction::TransferFunction(float lo, float hi, std::vector<ControlPoint> points)
    : lo_(lo), hi_(hi), points_(std::move(points)) {
  if (!(hi_ > lo_)) throw ConfigError("transfer function range must satisfy hi > lo");
  if (points_.empty()) throw ConfigError("transfer function needs at least one control point");
  for (std::size_t i = 0; i < points_.size(); ++i) {
    const auto& p = points_[i];
    if (p.rgba[3] < 0.0f || p.rgba[3] > 1.0f) throw ConfigError("transfer function opacity outside [0,1]");
    if (i > 0 && p.position < points_[i - 1].position)
      throw ConfigError("transfer function control points must be sorted");
  }
}

TransferFunction TransferFunction::defaultRamp() {
  return TransferFunction(0.0f, 1.0f,
                          {{0.00f, {0.0f, 0.0f, 0.0f, 0.0f}},
                           {0.55f, {0.1f, 0.2f, 0.8f, 0.0f}},
                           {0.70f, {0.2f, 0.8f, 0.5f, 0.02f}},
                           {0.85f, {1.0f, 0.6f, 0.1f, 0.08f}},
                           {1.00f, {1.0f, 1.0f, 0.9f, 0.25f}}});
}

TransferFunction TransferFunction::transparent() {
  return TransferFunction(0.0f, 1.0f, {{0.0f, {1.0f, 1.0f, 1.0f, 0.0f}}, {1.0f, {1.0f, 1.0f, 1.0f, 0.0f}}});
}

Eigen::Vector4f TransferFunction::operator()(float scalar) const {
  const float x = std::clamp((scalar - lo_) / (hi_ - lo_), 0.0f, 1.0f);
  if (x <= points_.front().position) return points_.front().rgba;
  if (x >= points_.back().position) return points_.back().rgba;
  const auto upper = std::upper_bound(points_.begin(), points_.end(), x,
                                      [](float v, const ControlPoint& p) { return v < p.position; });
  const auto lower = upper - 1;
  const float span = upper->position - lower->position;
  const float w = span > 0.0f ? (x - lower->position) / span : 0.0f;
  return (1.0f - w) * lower->rgba + w * upper->rgba;
}

Brick::Brick(int id, const Box3f& bounds, const Eigen::Vector3i& volumeDims)
    : id_(id), bounds_(bounds), volumeDims_(volumeDims) {
  if (bounds.empty()) throw ConfigError("brick bounds are empty");
  for (int a = 0; a < 3; ++a) {
    origin_[a] = static_cast<int>(std::floor(bounds.lower[a])) - 1;
    dims_[a] = static_cast<int>(std::ceil(bounds.upper[a])) - origin_[a] + 1;
  }
  voxels_.resize(static_cast<std::size_t>(dims_.prod()));
  std::size_t idx = 0;
  for (int k = 0; k < dims_.z(); ++k)
    for (int j = 0; j < dims_.y(); ++j)
      for (int i = 0; i < dims_.x(); ++i) {
        Eigen::Vector3i g = origin_ + Eigen::Vector3i(i, j, k);
        g = g.cwiseMax(0).cwiseMin(volumeDims_ - Eigen::Vector3i::Ones());
        voxels_[idx++] = static_cast<float>(fieldValue((g.cast<double>().array() + 0.5).matrix().eval()));
      }
}

float Brick::voxel(Eigen::Vector3i index) const {
  index = index.cwiseMax(0).cwiseMin(volumeDims_ - Eigen::Vector3i::Ones());
  const Eigen::Vector3i local = index - origin_;
  return voxels_[static_cast<std::size_t>((local.z() * dims_.y() + local.y()) * dims_.x() + local.x())];
}

float Brick::sample(const Vec3f& p) const {
  const Vec3f u = p.array() - 0.5f;
  const Eigen::Vector3i i0 = u.array().floor().cast<int>();
  const Vec3f f = u - i0.cast<float>();
  const float c000 = voxel(i0);
  const float c100 = voxel(i0 + Eigen::Vector3i(1, 0, 0));
  const float c010 = voxel(i0 + Eigen::Vector3i(0, 1, 0));
  const float c110 = voxel(i0 + Eigen::Vector3i(1, 1, 0));
  const float c001 = voxel(i0 + Eigen::Vector3i(0, 0, 1));
  const float c101 = voxel(i0 + Eigen::Vector3i(1, 0, 1));
  const float c011 = voxel(i0 + Eigen::Vector3i(0, 1, 1));
  const float c111 = voxel(i0 + Eigen::Vector3i(1, 1, 1));
  const float c00 = c000 + f.x() * (c100 - c000);
  const float c10 = c010 + f.x() * (c110 - c010);
  const float c01 = c001 + f.x() * (c101 - c001);
  const float c11 = c011 + f.x() * (c111 - c011);
  const float c0 = c00 + f.y() * (c10 - c00);
  const float c1 = c01 + f.y() * (c11 - c01);
  return c0 + f.z() * (c1 - c0);
}

Fragment integrateBrick(const Rayf& ray, const Brick& brick, const TransferFunction& tf,
                        const SamplingParams& sampling, float offset) {
  Fragment frag;
  const auto span = intersect(ray, brick.bounds());
  if (!span) return frag;
  frag.hit = true;
  frag.depth = span->lower;

  const float step = sampling.step;
  const float exponent = step / sampling.unitStep;
  // One extra sample on each side; containment decides ownership.
  const long long kBegin = std::max(0LL, static_cast<long long>(std::floor((span->lower - offset) / step)) - 1);
  const long long kEnd = static_cast<long long>(std::ceil((span->upper - offset) / step)) + 1;
  Eigen::Vector4f acc = Eigen::Vector4f::Zero();
  for (long long k = kBegin; k <= kEnd; ++k) {
    const float t = offset + static_cast<float>(k) * step;
    const Vec3f p = ray.at(t);
    if (!brick.bounds().contains(p)) continue;
    const Eigen::Vector4f c = tf(brick.sample(p));
    if (c[3] <= 0.0f) continue;
    const float alpha = 1.0f - std::pow(1.0f - c[3], exponent);
    const Eigen::Vector4f premult(c[0] * alpha, c[1] * alpha, c[2] * alpha, alpha);
    blendUnder(acc, premult);
  }
  frag.rgba = acc;
  return frag;
}

}  // namespace dfb
