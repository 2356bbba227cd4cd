#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dfb/errors.hpp"
#include "dfb/harness.hpp"
#include "dfb/inproc_transport.hpp"
#include "dfb/renderer.hpp"
#include "dfb/tile_ops.hpp"

#include <cstring>
#include <future>
#include <map>
#include <numbers>
#include <random>
#include <sstream>

using namespace dfb;

namespace {

constexpr float kInf = std::numeric_limits<float>::infinity();

struct DistRun {
  std::vector<std::byte> bytes;  // RGBAF32 display image
  std::vector<TileTrace> traces;  // all ranks
  float maxDiff(const DistRun& o) const {
    float d = 0.0f;
    const auto* a = reinterpret_cast<const float*>(bytes.data());
    const auto* b = reinterpret_cast<const float*>(o.bytes.data());
    for (std::size_t i = 0; i < bytes.size() / 4; ++i) d = std::max(d, std::abs(a[i] - b[i]));
    return d;
  }
};

DistRun renderDistributed(RendererKind kind, int ranks, const SceneConfig& scene, int width, int height, int tileSize,
                          const Camera& camera, std::vector<int> redundancy = {}) {
  scene.validate(ranks);
  const FrameConfig cfg{width, height, tileSize, ColorFormat::RGBAF32};
  InprocFabric fabric(ranks);
  DistRun out;
  std::mutex mu;
  const auto bounds = scene.brickBounds();
  const auto shares = scene.shareLists(ranks);
  std::vector<std::future<void>> done;
  for (int r = 0; r < ranks; ++r)
    done.push_back(std::async(std::launch::async, [&, r] {
      Messenger m(fabric.endpoint(r));
      DistributedFrameBuffer dfb(m, cfg);
      const auto bricks = scene.loadBricks(r, ranks);
      m.barrier();
      if (kind == RendererKind::Image)
        dfb.beginFrame([](const TileDescriptor&) { return std::make_unique<ImageParallelOp>(); });
      else
        dfb.beginFrame([](const TileDescriptor&) { return std::make_unique<AlphaBlendOp>(); });
      auto ctx = RenderContext::forFrame(dfb, camera, scene);
      switch (kind) {
        case RendererKind::Image: renderFrameImageParallel(ctx, dfb, bricks, redundancy); break;
        case RendererKind::Data: renderFrameDataParallel(ctx, dfb, bricks, bounds); break;
        case RendererKind::Mixed: renderFrameMixed(ctx, dfb, bricks, bounds, shares); break;
      }
      const Image* img = dfb.endFrame();
      {
        std::lock_guard lock(mu);
        if (img) out.bytes = img->bytes;
        for (const auto& t : dfb.lastFrameStats().traces) out.traces.push_back(t);
      }
      m.barrier();
    }));
  for (auto& f : done) f.get();
  return out;
}

SceneConfig smallScene(Eigen::Vector3i grid = {1, 1, 1}, int replication = 1) {
  SceneConfig s;
  s.volumeDims = {32, 32, 32};
  s.brickGrid = grid;
  s.replication = replication;
  s.seed = 17;
  return s;
}

Camera smallCamera(int frame = 1) {
  return orbitCamera(frame, 8, smallScene().volumeBounds());
}

// Collects every tile a renderer emits, without a framebuffer.
struct RecordingSink : TileSink {
  std::mutex mu;
  std::vector<Tile> tiles;
  void setTile(Tile t) override {
    std::lock_guard lock(mu);
    tiles.push_back(std::move(t));
  }
};

}  // namespace

TEST_CASE("field at the origin and its range") {
  CHECK(fieldValue(Vec3<double>(0, 0, 0)) == 0.5);
  std::mt19937 rng(1);
  std::uniform_real_distribution<double> u(-1000.0, 1000.0);
  for (int i = 0; i < 1000000; ++i) {
    const double f = fieldValue(Vec3<double>(u(rng), u(rng), u(rng)));
    if (f < 0.0 || f > 1.0) FAIL("field out of range at sample " << i);
  }
}

TEST_CASE("trilinear sampling at voxel centers reproduces the field") {
  const Eigen::Vector3i dims(40, 30, 20);
  Brick brick(0, Box3f(Vec3f(8, 4, 2), Vec3f(24, 20, 15)), dims);
  float worst = 0.0f;
  for (int z = 2; z < 15; ++z)
    for (int y = 4; y < 20; ++y)
      for (int x = 8; x < 24; ++x) {
        const Vec3f c(static_cast<float>(x) + 0.5f, static_cast<float>(y) + 0.5f, static_cast<float>(z) + 0.5f);
        worst = std::max(worst, std::abs(brick.sample(c) - fieldValue(c)));
      }
  CHECK(worst <= 1e-6f);
}

TEST_CASE("ghost layer matches the neighbour brick") {
  const Eigen::Vector3i dims(32, 32, 32);
  Brick left(0, Box3f(Vec3f(0, 0, 0), Vec3f(16, 32, 32)), dims);
  Brick right(1, Box3f(Vec3f(16, 0, 0), Vec3f(32, 32, 32)), dims);
  CHECK(left.ghostBounds().contains(Vec3f(16.5f, 1, 1)));
  for (int z = 0; z < 32; ++z)
    for (int y = 0; y < 32; ++y) {
      CHECK(left.voxel({16, y, z}) == right.voxel({16, y, z}));
      CHECK(right.voxel({15, y, z}) == left.voxel({15, y, z}));
    }
  // Samples on both sides of the shared face agree.
  for (float x : {15.6f, 16.0f, 16.4f}) CHECK(left.sample(Vec3f(x, 7.3f, 9.1f)) == right.sample(Vec3f(x, 7.3f, 9.1f)));
}

TEST_CASE("transfer function validation and interpolation") {
  CHECK_THROWS_AS(TransferFunction(0, 1, {{0.5f, {1, 1, 1, 1}}, {0.2f, {1, 1, 1, 1}}}), ConfigError);
  CHECK_THROWS_AS(TransferFunction(0, 1, {{0.0f, {1, 1, 1, 1.5f}}}), ConfigError);
  CHECK_THROWS_AS(TransferFunction(1, 1, {{0.0f, {1, 1, 1, 1}}}), ConfigError);
  TransferFunction tf(0, 2, {{0.0f, {0, 0, 0, 0}}, {1.0f, {1, 0.5f, 0, 1}}});
  CHECK(tf(1.0f)[0] == doctest::Approx(0.5f));
  CHECK(tf(1.0f)[3] == doctest::Approx(0.5f));
  CHECK(tf(-5.0f)[3] == 0.0f);
  CHECK(tf(9.0f)[3] == 1.0f);
}

TEST_CASE("transparent transfer function and missing rays") {
  Brick brick(0, Box3f(Vec3f(0, 0, 0), Vec3f(16, 16, 16)), Eigen::Vector3i(16, 16, 16));
  const Rayf through{Vec3f(-10, 8, 8), Vec3f(1, 0, 0)};
  const auto clear = integrateBrick(through, brick, TransferFunction::transparent(), {}, 0.0f);
  CHECK(clear.hit);
  CHECK(clear.rgba == Eigen::Vector4f::Zero());
  const Rayf miss{Vec3f(-10, 30, 8), Vec3f(1, 0, 0)};
  CHECK_FALSE(integrateBrick(miss, brick, TransferFunction::defaultRamp(), {}, 0.0f).hit);
  const auto hit = integrateBrick(through, brick, TransferFunction::defaultRamp(), {}, 0.0f);
  CHECK(hit.depth == doctest::Approx(10.0f));
  CHECK(hit.rgba[3] > 0.0f);
  CHECK(hit.rgba.head<3>().maxCoeff() <= hit.rgba[3] + 1e-6f);
}

TEST_CASE("splitting a brick along the ray composes exactly") {
  const Eigen::Vector3i dims(32, 32, 32);
  Brick whole(0, Box3f(Vec3f(0, 0, 0), Vec3f(32, 32, 32)), dims);
  Brick front(1, Box3f(Vec3f(0, 0, 0), Vec3f(13, 32, 32)), dims);
  Brick back(2, Box3f(Vec3f(13, 0, 0), Vec3f(32, 32, 32)), dims);
  const auto tf = TransferFunction::defaultRamp();
  for (float offset : {0.0f, 0.1f, 0.37f}) {
    const Rayf ray{Vec3f(-5.3f, 11.2f, 20.7f), Vec3f(1.0f, 0.05f, -0.02f).normalized()};
    const auto w = integrateBrick(ray, whole, tf, {}, offset);
    auto f = integrateBrick(ray, front, tf, {}, offset).rgba;
    blendUnder(f, integrateBrick(ray, back, tf, {}, offset).rgba);
    CHECK((f - w.rgba).cwiseAbs().maxCoeff() <= 1e-5f);
  }
}

TEST_CASE("camera rejects a degenerate basis") {
  CHECK_THROWS_AS(Camera(Vec3f::Zero(), Vec3f(0, 1, 0), Vec3f(0, 2, 0), 60, 1), ConfigError);
}

TEST_CASE("brick behind the camera is never flagged") {
  const Camera cam(Vec3f::Zero(), Vec3f(0, 0, -1), Vec3f(0, 1, 0), 60, 1);
  const std::vector<Box3f> boxes{Box3f(Vec3f(-1, -1, 5), Vec3f(1, 1, 7))};
  for (const auto& d : makeTileGrid({64, 64, 16}, 1)) {
    const auto r = computeTileIntersections(d.region, cam, boxes, 64, 64);
    CHECK_FALSE(r.coarse[0]);
    CHECK_FALSE(r.hit[0]);
    CHECK(r.count == 0);
  }
}

TEST_CASE("brick covering the viewport hits every tile") {
  const Camera cam(Vec3f::Zero(), Vec3f(0, 0, -1), Vec3f(0, 1, 0), 60, 1);
  const std::vector<Box3f> boxes{Box3f(Vec3f(-100, -100, -20), Vec3f(100, 100, -10)),
                                 Box3f(Vec3f(-5, -5, -5), Vec3f(5, 5, 5))};  // camera inside
  for (const auto& d : makeTileGrid({64, 64, 16}, 1)) {
    const auto r = computeTileIntersections(d.region, cam, boxes, 64, 64);
    CHECK(r.hit[0]);
    CHECK(r.hit[1]);
    CHECK(r.count == 2);
  }
}

TEST_CASE("box between pixel centers passes the coarse test only") {
  const Camera cam(Vec3f::Zero(), Vec3f(0, 0, -1), Vec3f(0, 1, 0), 60, 1);
  auto at = [&](float sx, float sy, float depth) {
    const Rayf r = cam.ray(sx, sy, 64, 64);
    return Vec3f(r.at(depth / r.direction.dot(cam.forward())));
  };
  const Vec3f a = at(10.1f, 10.1f, 10.0f), b = at(10.4f, 10.4f, 10.0f);
  Box3f box(a.cwiseMin(b) - Vec3f(0, 0, 0.001f), a.cwiseMax(b) + Vec3f(0, 0, 0.001f));
  const std::vector<Box3f> boxes{box};
  const auto r = computeTileIntersections({0, 0, 16, 16}, cam, boxes, 64, 64);
  CHECK(r.coarse[0]);
  CHECK_FALSE(r.hit[0]);
  CHECK(r.count == 0);
  // Per-pixel oracle agrees.
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) CHECK_FALSE(intersect(cam.pixelRay(x, y, 64, 64), box).has_value());
}

TEST_CASE("tile-brick ownership") {
  const std::vector<int> one{3};
  for (std::uint32_t t = 0; t < 10; ++t) CHECK(tileBrickOwner(one, t) == 3);
  const std::vector<int> two{1, 4};
  CHECK(tileBrickOwner(two, 0) == 1);
  CHECK(tileBrickOwner(two, 1) == 4);
  CHECK(tileBrickOwner(two, 2) == 1);
  CHECK(tileBrickOwner(two, 3) == 4);
  CHECK_THROWS_AS(tileBrickOwner(std::vector<int>{}, 0), UsageError);

  SceneConfig s = smallScene({2, 2, 2}, 3);
  const auto shares = s.shareLists(8);
  for (std::size_t b = 0; b < shares.size(); ++b)
    for (std::uint32_t t = 0; t < 64; ++t) {
      int owners = 0;
      for (int r = 0; r < 8; ++r) {
        const bool holds = std::find(shares[b].begin(), shares[b].end(), r) != shares[b].end();
        if (holds && tileBrickOwner(shares[b], t) == r) ++owners;
      }
      CHECK(owners == 1);
    }
}

TEST_CASE("redundancy planning") {
  const std::vector<double> e{0.9, 0.1, 0.5, 0.2};
  CHECK(planRedundancy(e, 0.25) == std::vector<int>{2, 1, 1, 1});
  CHECK(planRedundancy(e, 0.0) == std::vector<int>{1, 1, 1, 1});
  CHECK(planRedundancy(e, 1.0) == std::vector<int>{2, 2, 2, 2});
  CHECK(planRedundancy(std::vector<double>{0.3, 0.3, 0.3, 0.3}, 0.5) == std::vector<int>{2, 2, 1, 1});
  CHECK_THROWS_AS(planRedundancy(e, 1.5), UsageError);
  CHECK_THROWS_AS(planRedundancy(e, -0.1), UsageError);
}

TEST_CASE("orbit camera") {
  const Box3f bounds(Vec3f(0, 0, 0), Vec3f(128, 64, 96));
  const Camera a = orbitCamera(0, 12, bounds), b = orbitCamera(12, 12, bounds);
  CHECK((a.position() - b.position()).norm() <= 1e-4f);
  const Camera half = orbitCamera(6, 12, bounds);
  const Vec3f c = bounds.center();
  CHECK(((a.position() - c) + (half.position() - c)).norm() <= 1e-3f);
  CHECK(a.position().y() == doctest::Approx(c.y()));
  CHECK((a.position() - c).norm() == doctest::Approx(1.5f * bounds.size().norm()));
  for (int f = 0; f < 360; ++f) {
    const Camera cam = orbitCamera(f, 360, bounds);
    CHECK((cam.forward() - (c - cam.position()).normalized()).norm() <= 1e-5f);
    for (int k = 0; k < 8; ++k) {
      const auto p = cam.project(bounds.corner(k), 100, 100);
      REQUIRE(p);
      CHECK(p->x() >= 0.0f);
      CHECK(p->x() <= 100.0f);
      CHECK(p->y() >= 0.0f);
      CHECK(p->y() <= 100.0f);
    }
  }
}

TEST_CASE("jitter is deterministic and within one step") {
  for (std::uint64_t px = 0; px < 2000; ++px) {
    const float j = jitterOffset(5, 3, 1, px, 0, 0.5f);
    CHECK(j >= 0.0f);
    CHECK(j < 0.5f);
    CHECK(j == jitterOffset(5, 3, 1, px, 0, 0.5f));
  }
  CHECK(jitterOffset(5, 3, 1, 7, 0, 0.5f) != jitterOffset(5, 3, 2, 7, 0, 0.5f));
}

TEST_CASE("scene distribution") {
  CHECK(defaultBrickGrid(8) == Eigen::Vector3i(2, 2, 2));
  CHECK(defaultBrickGrid(1) == Eigen::Vector3i(1, 1, 1));
  CHECK(defaultBrickGrid(12).prod() == 12);
  SceneConfig s = smallScene({2, 2, 2}, 2);
  const auto shares = s.shareLists(8);
  std::vector<int> held(8, 0);
  for (const auto& list : shares) {
    CHECK(list.size() == 2);
    CHECK(std::is_sorted(list.begin(), list.end()));
    for (int r : list) ++held[static_cast<std::size_t>(r)];
  }
  for (int h : held) CHECK(h > 0);
  CHECK_NOTHROW(s.validate(8));
  s.replication = 1;
  CHECK_THROWS_AS(s.validate(16), ConfigError);
  s.replication = 9;
  CHECK_THROWS_AS(s.validate(8), ConfigError);
  // Identical id means identical bounds and voxels on every rank.
  s.replication = 2;
  const auto b0 = s.loadBricks(0, 8), b1 = s.loadBricks(1, 8);
  REQUIRE(b0.size() == b1.size());
  for (std::size_t i = 0; i < b0.size(); ++i) {
    CHECK(b0[i].id() == b1[i].id());
    CHECK(b0[i].sample(b0[i].bounds().center()) == b1[i].sample(b1[i].bounds().center()));
  }
}

TEST_CASE("scene json") {
  const auto s = parseScene(R"({
    "volume_dims": [64, 32, 16], "brick_grid": [2, 2, 1], "replication": 2,
    "background": [0.1, 0.2, 0.3, 1.0], "spp": 4, "step": 0.25, "unit_step": 1.0, "seed": 99,
    "transfer_function": {"range": [0.2, 0.8], "points": [[0.0, 0, 0, 1, 0.0], [1.0, 1, 1, 0, 0.5]]}
  })");
  CHECK(s.volumeDims == Eigen::Vector3i(64, 32, 16));
  CHECK(s.brickGrid == Eigen::Vector3i(2, 2, 1));
  CHECK(s.replication == 2);
  CHECK(s.samplesPerPixel == 4);
  CHECK(s.sampling.step == 0.25f);
  CHECK(s.seed == 99);
  CHECK(s.transferFunction.lo() == doctest::Approx(0.2f));
  CHECK(s.transferFunction(0.8f)[3] == doctest::Approx(0.5f));
  CHECK(s.premultipliedBackground()[2] == doctest::Approx(0.3f));
  const auto custom = parseScene(R"({"bricks": [{"id": 1, "lower": [8,0,0], "upper": [16,16,16]},
                                                {"id": 0, "lower": [0,0,0], "upper": [8,16,16]}]})");
  CHECK(custom.brickCount() == 2);
  CHECK(custom.brickBounds()[1].lower.x() == 8.0f);
  CHECK_THROWS_AS(parseScene("{not json"), ConfigError);
  CHECK_THROWS_AS(parseScene(R"({"volume_dims": [1, 2]})"), ConfigError);
}

TEST_CASE("declared children match submitted fragments") {
  for (RendererKind kind : {RendererKind::Data, RendererKind::Mixed}) {
    const int ranks = 4;
    SceneConfig s = smallScene({2, 2, 2}, kind == RendererKind::Mixed ? 3 : 1);
    if (kind == RendererKind::Data) s.brickGrid = {2, 2, 1};
    const TileGrid grid({96, 96, 16}, ranks);
    const Camera cam = smallCamera(3);
    RecordingSink sink;
    const auto bounds = s.brickBounds();
    const auto shares = s.shareLists(ranks);
    for (int r = 0; r < ranks; ++r) {
      RenderContext ctx;
      ctx.grid = &grid;
      ctx.rank = r;
      ctx.frameIndex = 1;
      ctx.camera = &cam;
      ctx.scene = &s;
      const auto bricks = s.loadBricks(r, ranks);
      if (kind == RendererKind::Data) renderFrameDataParallel(ctx, sink, bricks, bounds);
      else renderFrameMixed(ctx, sink, bricks, bounds, shares);
    }
    std::map<std::uint32_t, int> roots, declared, fragments;
    for (const auto& t : sink.tiles) {
      if (t.generation == 0) {
        ++roots[t.tileID];
        declared[t.tileID] += static_cast<int>(t.children);
        CHECK(std::isinf(t.depth[0]));
      } else {
        CHECK(t.generation == 1);
        CHECK(t.children == 0);
        ++fragments[t.tileID];
      }
    }
    CHECK(roots.size() == grid.size());
    for (const auto& [id, n] : roots) {
      CHECK(n == 1);
      CHECK(declared[id] == fragments[id]);
    }
  }
}

TEST_CASE("fragment depth is the box entry") {
  SceneConfig s = smallScene({2, 1, 1});
  s.transferFunction = TransferFunction(0, 1, {{0.0f, {1, 1, 1, 1}}, {1.0f, {1, 1, 1, 1}}});
  const auto bricks = s.loadBricks(0, 1);
  const Camera cam = smallCamera(1);
  for (int y = 0; y < 64; y += 3)
    for (int x = 0; x < 64; x += 3) {
      const Rayf ray = cam.pixelRay(x, y, 64, 64);
      for (const auto& b : bricks) {
        const auto span = intersect(ray, b.bounds());
        const auto f = integrateBrick(ray, b, s.transferFunction, s.sampling, 0.2f);
        CHECK(f.hit == span.has_value());
        if (f.hit) CHECK(f.depth == span->lower);
      }
    }
}

TEST_CASE("renderers agree across distributions") {
  const Camera cam = smallCamera(1);
  const auto single = renderDistributed(RendererKind::Data, 1, smallScene(), 96, 96, 32, cam);
  const auto image4 = renderDistributed(RendererKind::Image, 4, smallScene({1, 1, 1}, 4), 96, 96, 32, cam);
  CHECK(image4.bytes == single.bytes);
  const auto data8 = renderDistributed(RendererKind::Data, 8, smallScene({2, 2, 2}), 96, 96, 32, cam);
  MESSAGE("single vs data-parallel max diff " << single.maxDiff(data8));
  CHECK(single.maxDiff(data8) <= 1e-4f);
  const auto mixed1 = renderDistributed(RendererKind::Mixed, 8, smallScene({2, 2, 2}), 96, 96, 32, cam);
  CHECK(mixed1.bytes == data8.bytes);
  const auto mixed2 = renderDistributed(RendererKind::Mixed, 8, smallScene({2, 2, 2}, 2), 96, 96, 32, cam);
  CHECK(mixed2.bytes == data8.bytes);
  // Every brick on every rank: one rank per brick renders each fragment.
  const auto mixedAll = renderDistributed(RendererKind::Mixed, 4, smallScene({2, 2, 2}, 4), 96, 96, 32, cam);
  const auto imageBricks = renderDistributed(RendererKind::Image, 4, smallScene({2, 2, 2}, 4), 96, 96, 32, cam);
  CHECK(mixedAll.bytes == imageBricks.bytes);
  // Tile size does not change the image.
  const auto small = renderDistributed(RendererKind::Data, 8, smallScene({2, 2, 2}), 96, 96, 16, cam);
  CHECK(small.maxDiff(single) <= 1e-4f);
}

TEST_CASE("redundant tiles average their seeded renders") {
  const Camera cam = smallCamera(2);
  const SceneConfig s = smallScene({1, 1, 1}, 2);
  const FrameConfig cfg{64, 64, 32, ColorFormat::RGBAF32};
  const TileGrid grid(cfg, 2);
  const std::vector<int> plan(grid.size(), 2);
  const auto run = renderDistributed(RendererKind::Image, 2, s, 64, 64, 32, cam, plan);
  const auto bricks = s.loadBricks(0, 2);
  RenderContext ctx;
  ctx.grid = &grid;
  ctx.frameIndex = 1;
  ctx.camera = &cam;
  ctx.scene = &s;
  Image expect;
  expect.allocate(64, 64, ColorFormat::RGBAF32);
  for (const auto& d : grid.descriptors()) {
    const Tile a = renderTileLocal(ctx, d, bricks, std::uint64_t{d.tileID} * 2);
    const Tile b = renderTileLocal(ctx, d, bricks, std::uint64_t{d.tileID} * 2 + 1);
    expect.blit(d.region, encodeDisplayPixels((a.color + b.color) / 2.0f, ColorFormat::RGBAF32));
  }
  DistRun ref{expect.bytes, {}};
  CHECK(run.maxDiff(ref) <= 1e-6f);
  CHECK(run.maxDiff(renderDistributed(RendererKind::Image, 2, s, 64, 64, 32, cam)) > 0.0f);
}

TEST_CASE("some tile finalizes before another receives its first input") {
  const Camera cam = smallCamera(1);
  const auto run = renderDistributed(RendererKind::Data, 4, smallScene({2, 2, 1}), 128, 128, 16, cam);
  REQUIRE(run.traces.size() == 64);
  auto earliestFinal = run.traces.front().finalized;
  auto latestFirst = run.traces.front().firstInput;
  for (const auto& t : run.traces) {
    earliestFinal = std::min(earliestFinal, t.finalized);
    latestFirst = std::max(latestFirst, t.firstInput);
  }
  CHECK(earliestFinal < latestFirst);
}

TEST_CASE("jittered accumulation: error of the mean falls with passes") {
  SceneConfig scene = smallScene();
  const FrameConfig cfg{96, 96, 32, ColorFormat::RGBAF32, true};
  InprocFabric fabric(1);
  Messenger m(fabric.endpoint(0));
  DistributedFrameBuffer dfb(m, cfg);
  const auto bricks = scene.loadBricks(0, 1);
  const Camera cam = smallCamera(1);
  std::vector<double> total;  // summed tileError per pass count
  for (std::uint32_t p = 0; p < 16; ++p) {
    dfb.beginFrame([](const TileDescriptor&) { return std::make_unique<ImageParallelOp>(); }, {}, p);
    auto ctx = RenderContext::forFrame(dfb, cam, scene);
    renderFrameImageParallel(ctx, dfb, bricks);
    dfb.endFrame();
    if (p == 0) continue;
    double e = 0.0;
    for (auto id : dfb.ownedTiles()) e += dfb.tileError(id).value();
    total.push_back(e);
  }
  REQUIRE(total.front() > 0.0);
  std::ostringstream trace;
  for (std::size_t i = 0; i < total.size(); ++i) trace << ' ' << total[i] / static_cast<double>(i + 2);
  MESSAGE("tileError/n over passes:" << trace.str());
  // Variance of the mean is tileError/n; it drops with every pass, up to noise.
  for (std::size_t i = 1; i < total.size(); ++i)
    CHECK(total[i] / static_cast<double>(i + 2) <= 1.1 * total[i - 1] / static_cast<double>(i + 1));
  CHECK(total.back() / 16.0 < 0.25 * total.front() / 2.0);
  // The per-pixel sample variance itself converges rather than shrinking.
  CHECK(total.back() > 0.5 * total.front());
}
