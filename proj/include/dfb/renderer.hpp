#pragma once

#include "dfb/camera.hpp"
#include "dfb/framebuffer.hpp"
#include "dfb/scene.hpp"

#include <chrono>
#include <span>

namespace dfb {

/// Screen-space rectangle [minX, maxX] x [minY, maxY] in continuous pixel coordinates.
struct ScreenRect {
  float minX, minY, maxX, maxY;
  bool overlaps(const Region& r) const {
    return maxX >= static_cast<float>(r.x) && minX <= static_cast<float>(r.x + r.w) &&
           maxY >= static_cast<float>(r.y) && minY <= static_cast<float>(r.y + r.h);
  }
};

/// Conservative projection of a box's corners. A box straddling the camera
/// plane covers the whole screen; a box entirely behind the camera is empty.
std::optional<ScreenRect> projectBox(const Box3f& box, const Camera& camera, int width, int height);

struct TileIntersections {
  std::vector<bool> coarse;  // screen-rectangle test
  std::vector<bool> hit;     // at least one pixel ray hits the box
  int count = 0;
};

/// Two-stage brick/tile test: corner projection, then a ray per pixel.
TileIntersections computeTileIntersections(const Region& region, const Camera& camera,
                                           std::span<const Box3f> allBounds, int width, int height);

/// Rank among `shareList` that renders the brick for the tile (round robin).
int tileBrickOwner(std::span<const int> shareList, std::uint32_t tileID);

/// K(t) per tile: 2 for the top floor(budget*N) tiles by error, 1 otherwise.
std::vector<int> planRedundancy(std::span<const double> tileErrors, double budgetFraction);

/// Ray offset in [0, step) from a counter-based hash.
float jitterOffset(std::uint64_t seed, std::uint64_t renderSeed, std::uint32_t accumulationID,
                   std::uint64_t pixelIndex, int sample, float step);

struct RenderContext {
  const TileGrid* grid = nullptr;
  int rank = 0;
  std::uint32_t frameIndex = 0;
  std::uint32_t accumulationID = 0;
  const Camera* camera = nullptr;
  const SceneConfig* scene = nullptr;
  int threads = 1;
  /// Artificial load imbalance, spread evenly across this rank's tiles.
  std::chrono::milliseconds renderDelay{0};

  static RenderContext forFrame(const DistributedFrameBuffer& dfb, const Camera& camera, const SceneConfig& scene);
};

/// Fragment tile of one brick: per pixel the mean over spp jittered integrations.
Tile renderBrickForTile(const RenderContext& ctx, const TileDescriptor& desc, const Brick& brick,
                        std::uint64_t renderSeed);

/// Background tile: generation 0, depth +inf, `children` declared inputs.
Tile makeBackgroundTile(const RenderContext& ctx, const TileDescriptor& desc, std::uint32_t children);

/// Every tile rendered by ranks (owner + i) mod P, i < K(t), with render seed
/// tileID*K + i when K > 1 and 0 otherwise. `bricks` must be the whole scene.
/// Empty plan means K = 1.
void renderFrameImageParallel(const RenderContext& ctx, TileSink& sink, std::span<const Brick> bricks,
                              std::span<const int> redundancy = {});

/// Sort-last: the owner sends a background tile declaring the brick count
/// hitting the tile; the holder of each hitting brick sends its fragment.
void renderFrameDataParallel(const RenderContext& ctx, TileSink& sink, std::span<const Brick> localBricks,
                             std::span<const Box3f> allBounds);

/// Like data-parallel, but a brick's fragment is rendered only by its tile-brick owner.
void renderFrameMixed(const RenderContext& ctx, TileSink& sink, std::span<const Brick> localBricks,
                      std::span<const Box3f> allBounds, std::span<const std::vector<int>> shareLists);

/// Single-rank sort-last composite of a set of bricks for one tile, without a framebuffer.
Tile renderTileLocal(const RenderContext& ctx, const TileDescriptor& desc, std::span<const Brick> bricks,
                     std::uint64_t renderSeed);

}  // namespace dfb
