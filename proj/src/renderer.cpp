#include "dfb/renderer.hpp"

#include "dfb/errors.hpp"
#include "dfb/task_pool.hpp"
#include "dfb/tile_ops.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <thread>

namespace dfb {

std::optional<ScreenRect> projectBox(const Box3f& box, const Camera& camera, int width, int height) {
  int behind = 0;
  ScreenRect rect{std::numeric_limits<float>::infinity(), std::numeric_limits<float>::infinity(),
                  -std::numeric_limits<float>::infinity(), -std::numeric_limits<float>::infinity()};
  for (int c = 0; c < 8; ++c) {
    const auto p = camera.project(box.corner(c), width, height);
    if (!p) {
      ++behind;
      continue;
    }
    rect.minX = std::min(rect.minX, p->x());
    rect.minY = std::min(rect.minY, p->y());
    rect.maxX = std::max(rect.maxX, p->x());
    rect.maxY = std::max(rect.maxY, p->y());
  }
  if (behind == 8) return std::nullopt;
  if (behind > 0) return ScreenRect{0.0f, 0.0f, static_cast<float>(width), static_cast<float>(height)};
  return rect;
}

TileIntersections computeTileIntersections(const Region& region, const Camera& camera,
                                           std::span<const Box3f> allBounds, int width, int height) {
  TileIntersections out;
  out.coarse.assign(allBounds.size(), false);
  out.hit.assign(allBounds.size(), false);
  for (std::size_t b = 0; b < allBounds.size(); ++b) {
    const auto rect = projectBox(allBounds[b], camera, width, height);
    if (!rect || !rect->overlaps(region)) continue;
    out.coarse[b] = true;
    for (int y = region.y; y < region.y + region.h && !out.hit[b]; ++y)
      for (int x = region.x; x < region.x + region.w; ++x)
        if (intersect(camera.pixelRay(x, y, width, height), allBounds[b])) {
          out.hit[b] = true;
          break;
        }
    if (out.hit[b]) ++out.count;
  }
  return out;
}

int tileBrickOwner(std::span<const int> shareList, std::uint32_t tileID) {
  if (shareList.empty()) throw UsageError("brick share list is empty");
  return shareList[tileID % shareList.size()];
}

std::vector<int> planRedundancy(std::span<const double> tileErrors, double budgetFraction) {
  if (!(budgetFraction >= 0.0 && budgetFraction <= 1.0)) throw UsageError("budget fraction must be in [0, 1]");
  const auto n = tileErrors.size();
  const auto k = static_cast<std::size_t>(std::floor(budgetFraction * static_cast<double>(n) + 1e-9));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return tileErrors[a] > tileErrors[b]; });
  std::vector<int> plan(n, 1);
  for (std::size_t i = 0; i < std::min(k, n); ++i) plan[order[i]] = 2;
  return plan;
}

namespace {

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

}  // namespace

float jitterOffset(std::uint64_t seed, std::uint64_t renderSeed, std::uint32_t accumulationID,
                   std::uint64_t pixelIndex, int sample, float step) {
  std::uint64_t h = mix(seed);
  h = mix(h ^ renderSeed);
  h = mix(h ^ accumulationID);
  h = mix(h ^ pixelIndex);
  h = mix(h ^ static_cast<std::uint64_t>(sample));
  const float u = static_cast<float>(h >> 40) * 0x1.0p-24f;  // [0, 1)
  return u * step;
}

RenderContext RenderContext::forFrame(const DistributedFrameBuffer& dfb, const Camera& camera,
                                      const SceneConfig& scene) {
  RenderContext ctx;
  ctx.grid = &dfb.grid();
  ctx.rank = dfb.rank();
  ctx.frameIndex = dfb.frameIndex();
  ctx.accumulationID = dfb.accumulationID();
  ctx.camera = &camera;
  ctx.scene = &scene;
  return ctx;
}

Tile makeBackgroundTile(const RenderContext& ctx, const TileDescriptor& desc, std::uint32_t children) {
  Tile t;
  t.frameIndex = ctx.frameIndex;
  t.tileID = desc.tileID;
  t.coords = desc.coords;
  t.accumulationID = ctx.accumulationID;
  t.generation = 0;
  t.children = children;
  t.resize(desc.region);
  t.fill(ctx.scene->premultipliedBackground(), std::numeric_limits<float>::infinity());
  return t;
}

Tile renderBrickForTile(const RenderContext& ctx, const TileDescriptor& desc, const Brick& brick,
                        std::uint64_t renderSeed) {
  const auto& cfg = ctx.grid->config();
  const auto& scene = *ctx.scene;
  Tile t;
  t.frameIndex = ctx.frameIndex;
  t.tileID = desc.tileID;
  t.coords = desc.coords;
  t.accumulationID = ctx.accumulationID;
  t.generation = 1;
  t.children = 0;
  t.resize(desc.region);
  const int spp = scene.samplesPerPixel;
  Eigen::Index i = 0;
  for (int y = desc.region.y; y < desc.region.y + desc.region.h; ++y) {
    for (int x = desc.region.x; x < desc.region.x + desc.region.w; ++x, ++i) {
      const Rayf ray = ctx.camera->pixelRay(x, y, cfg.width, cfg.height);
      const auto pixelIndex = static_cast<std::uint64_t>(y) * static_cast<std::uint64_t>(cfg.width) +
                              static_cast<std::uint64_t>(x);
      Eigen::Vector4f sum = Eigen::Vector4f::Zero();
      for (int s = 0; s < spp; ++s) {
        const float offset = jitterOffset(scene.seed, renderSeed, ctx.accumulationID, pixelIndex, s, scene.sampling.step);
        const Fragment f = integrateBrick(ray, brick, scene.transferFunction, scene.sampling, offset);
        if (!f.hit) break;
        sum += f.rgba;
        t.depth[i] = f.depth;
      }
      t.color.col(i) = spp == 1 ? sum : (sum / static_cast<float>(spp)).eval();
    }
  }
  return t;
}

Tile renderTileLocal(const RenderContext& ctx, const TileDescriptor& desc, std::span<const Brick> bricks,
                     std::uint64_t renderSeed) {
  const auto& cfg = ctx.grid->config();
  std::vector<Box3f> bounds;
  for (const auto& b : bricks) bounds.push_back(b.bounds());
  const auto inter = computeTileIntersections(desc.region, *ctx.camera, bounds, cfg.width, cfg.height);
  std::vector<Tile> parts;
  parts.push_back(makeBackgroundTile(ctx, desc, 0));
  for (std::size_t b = 0; b < bricks.size(); ++b)
    if (inter.hit[b]) parts.push_back(renderBrickForTile(ctx, desc, bricks[b], renderSeed));
  Tile out;
  sortAndBlend(parts, out);
  return out;
}

namespace {

void delayTile(const RenderContext& ctx, std::size_t tiles) {
  if (ctx.renderDelay.count() <= 0 || tiles == 0) return;
  std::this_thread::sleep_for(std::chrono::duration_cast<std::chrono::microseconds>(ctx.renderDelay) /
                              static_cast<long long>(tiles));
}

template <typename ShouldRender>
void renderSortLast(const RenderContext& ctx, TileSink& sink, std::span<const Brick> localBricks,
                    std::span<const Box3f> allBounds, ShouldRender shouldRender) {
  const auto& grid = *ctx.grid;
  const auto& cfg = grid.config();
  std::set<std::uint32_t> candidates;
  for (const auto id : grid.ownedBy(ctx.rank)) candidates.insert(id);
  for (const auto& brick : localBricks) {
    const auto rect = projectBox(brick.bounds(), *ctx.camera, cfg.width, cfg.height);
    if (!rect) continue;
    for (const auto& d : grid.descriptors())
      if (rect->overlaps(d.region)) candidates.insert(d.tileID);
  }
  const std::vector<std::uint32_t> tiles(candidates.begin(), candidates.end());
  parallelFor(tiles.size(), ctx.threads, [&](std::size_t i) {
    delayTile(ctx, tiles.size());
    const TileDescriptor& desc = grid[tiles[i]];
    const auto inter = computeTileIntersections(desc.region, *ctx.camera, allBounds, cfg.width, cfg.height);
    if (desc.ownerRank == ctx.rank) sink.setTile(makeBackgroundTile(ctx, desc, static_cast<std::uint32_t>(inter.count)));
    for (const auto& brick : localBricks) {
      const auto id = static_cast<std::size_t>(brick.id());
      if (id >= inter.hit.size()) throw UsageError("brick id outside the bounds table");
      if (inter.hit[id] && shouldRender(brick.id(), desc.tileID))
        sink.setTile(renderBrickForTile(ctx, desc, brick, 0));
    }
  });
}

}  // namespace

void renderFrameImageParallel(const RenderContext& ctx, TileSink& sink, std::span<const Brick> bricks,
                              std::span<const int> redundancy) {
  const auto& grid = *ctx.grid;
  if (!redundancy.empty() && redundancy.size() != grid.size())
    throw UsageError("redundancy plan must have one entry per tile");
  struct Job {
    std::uint32_t tileID;
    std::uint32_t k;
    std::uint32_t copy;
  };
  std::vector<Job> jobs;
  for (const auto& d : grid.descriptors()) {
    const int k = redundancy.empty() ? 1 : redundancy[d.tileID];
    if (k < 1) throw UsageError("redundancy must be >= 1");
    for (int i = 0; i < k; ++i)
      if ((d.ownerRank + i) % grid.numRanks() == ctx.rank)
        jobs.push_back({d.tileID, static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(i)});
  }
  parallelFor(jobs.size(), ctx.threads, [&](std::size_t j) {
    delayTile(ctx, jobs.size());
    const Job& job = jobs[j];
    // Plain renders share seed 0 so jitter depends only on the pixel, not the tiling.
    const std::uint64_t seed = job.k > 1 ? std::uint64_t{job.tileID} * job.k + job.copy : 0;
    Tile t = renderTileLocal(ctx, grid[job.tileID], bricks, seed);
    t.generation = 0;
    t.children = job.k > 1 ? job.k : 0;
    sink.setTile(std::move(t));
  });
}

void renderFrameDataParallel(const RenderContext& ctx, TileSink& sink, std::span<const Brick> localBricks,
                             std::span<const Box3f> allBounds) {
  renderSortLast(ctx, sink, localBricks, allBounds, [](int, std::uint32_t) { return true; });
}

void renderFrameMixed(const RenderContext& ctx, TileSink& sink, std::span<const Brick> localBricks,
                      std::span<const Box3f> allBounds, std::span<const std::vector<int>> shareLists) {
  renderSortLast(ctx, sink, localBricks, allBounds, [&](int brick, std::uint32_t tileID) {
    return tileBrickOwner(shareLists[static_cast<std::size_t>(brick)], tileID) == ctx.rank;
  });
}

}  // namespace dfb
