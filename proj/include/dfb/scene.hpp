#pragma once

#include "dfb/volume.hpp"

#include <optional>
#include <string>
#include <vector>

namespace dfb {

/// Data distribution and shading parameters shared by every rank.
struct SceneConfig {
  Eigen::Vector3i volumeDims{128, 128, 128};
  Eigen::Vector3i brickGrid{1, 1, 1};
  int replication = 1;
  TransferFunction transferFunction = TransferFunction::defaultRamp();
  Eigen::Vector4f background{0.0f, 0.0f, 0.0f, 1.0f};  // straight RGBA
  int samplesPerPixel = 1;
  SamplingParams sampling;
  std::uint64_t seed = 0;
  /// Optional per-brick-id bounds replacing the regular grid split.
  std::vector<Box3f> boundsOverride;

  int brickCount() const;
  Box3f volumeBounds() const;
  std::vector<Box3f> brickBounds() const;
  /// Sorted ranks holding each brick id: brick b lives on ranks (b*R + j) mod P.
  std::vector<std::vector<int>> shareLists(int numRanks) const;
  std::vector<int> bricksOfRank(int rank, int numRanks) const;
  /// Throws ConfigError when some rank would hold no brick or R is out of range.
  void validate(int numRanks) const;
  std::vector<Brick> loadBricks(int rank, int numRanks) const;
  Eigen::Vector4f premultipliedBackground() const;
};

/// Factors n into a brick grid with x >= y >= z, as cubic as possible.
Eigen::Vector3i defaultBrickGrid(int n);

/// JSON scene description; see README "Scene files". Missing keys keep defaults.
SceneConfig parseScene(const std::string& json);
SceneConfig loadSceneFile(const std::string& path);

}  // namespace dfb
