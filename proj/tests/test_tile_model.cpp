#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dfb/errors.hpp"
#include "dfb/tile.hpp"
#include "dfb/wire.hpp"

#include <cstring>
#include <random>
#include <set>

using namespace dfb;

namespace {

std::vector<std::uint8_t> asU8(const std::vector<std::byte>& b) {
  std::vector<std::uint8_t> out(b.size());
  std::memcpy(out.data(), b.data(), b.size());
  return out;
}

}  // namespace

TEST_CASE("one tile per rank") {
  const auto grid = makeTileGrid({128, 128, 64}, 4);
  REQUIRE(grid.size() == 4);
  for (int i = 0; i < 4; ++i) {
    CHECK(grid[static_cast<std::size_t>(i)].ownerRank == i);
    CHECK(grid[static_cast<std::size_t>(i)].tileID == static_cast<std::uint32_t>(i));
  }
}

TEST_CASE("edge tiles are clipped") {
  TileGrid grid({100, 70, 64}, 2);
  REQUIRE(grid.size() == 4);
  const auto& d = grid.at({1, 1});
  CHECK(d.tileID == 3);
  CHECK(d.region == Region{64, 64, 36, 6});
  CHECK_THROWS_AS(grid.at({2, 0}), UsageError);
  CHECK_THROWS_AS(grid.at({0, -1}), UsageError);
}

TEST_CASE("round robin over 256 tiles and 3 ranks") {
  TileGrid grid({1024, 1024, 64}, 3);
  REQUIRE(grid.size() == 256);
  CHECK(grid.ownedBy(0).size() == 86);
  CHECK(grid.ownedBy(1).size() == 85);
  CHECK(grid.ownedBy(2).size() == 85);
}

TEST_CASE("ownership partitions the grid and areas cover the frame") {
  std::mt19937 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    FrameConfig cfg{1 + static_cast<int>(rng() % 300), 1 + static_cast<int>(rng() % 300), 1 + static_cast<int>(rng() % 80)};
    const int ranks = 1 + static_cast<int>(rng() % 9);
    TileGrid grid(cfg, ranks);
    CHECK(grid.size() == static_cast<std::size_t>(cfg.tileCount()));
    std::set<std::uint32_t> seen;
    std::size_t lo = grid.size(), hi = 0;
    for (int r = 0; r < ranks; ++r) {
      const auto owned = grid.ownedBy(r);
      lo = std::min(lo, owned.size());
      hi = std::max(hi, owned.size());
      for (auto id : owned) CHECK(seen.insert(id).second);
    }
    CHECK(seen.size() == grid.size());
    CHECK(hi - lo <= 1);
    long long area = 0;
    for (const auto& d : grid.descriptors()) {
      CHECK(d.tileID == static_cast<std::uint32_t>(d.coords.row * cfg.tilesX() + d.coords.col));
      CHECK(d.region.x == d.coords.col * cfg.tileSize);
      CHECK(d.region.x + d.region.w <= cfg.width);
      CHECK(d.region.y + d.region.h <= cfg.height);
      area += d.region.area();
    }
    CHECK(area == static_cast<long long>(cfg.width) * cfg.height);
  }
}

TEST_CASE("invalid frame configs are rejected") {
  CHECK_THROWS_AS(makeTileGrid({0, 10, 64}, 1), ConfigError);
  CHECK_THROWS_AS(makeTileGrid({10, 10, 0}, 1), ConfigError);
  CHECK_THROWS_AS(makeTileGrid({10, 10, 64}, 0), ConfigError);
}

TEST_CASE("RGBA8 encode rounds") {
  Eigen::Matrix4Xf c(4, 1);
  c.col(0) << 1.0f, 0.5f, 0.0f, 1.0f;
  CHECK(asU8(encodeDisplayPixels(c, ColorFormat::RGBA8)) == std::vector<std::uint8_t>{255, 128, 0, 255});
  c.col(0) << -1.0f, 2.0f, 0.25f, 0.999f;
  CHECK(asU8(encodeDisplayPixels(c, ColorFormat::RGBA8)) == std::vector<std::uint8_t>{0, 255, 64, 255});
}

TEST_CASE("NONE encodes to nothing") {
  Eigen::Matrix4Xf c = Eigen::Matrix4Xf::Constant(4, 64 * 64, 0.3f);
  CHECK(encodeDisplayPixels(c, ColorFormat::NONE).empty());
  CHECK(bytesPerPixel(ColorFormat::NONE) == 0);
}

TEST_CASE("RGBAF32 encode is bit exact") {
  Eigen::Matrix4Xf c(4, 1);
  c.col(0) << 0.2f, 0.4f, 0.6f, 1.0f;
  const auto bytes = encodeDisplayPixels(c, ColorFormat::RGBAF32);
  REQUIRE(bytes.size() == 16);
  const float expect[4] = {0.2f, 0.4f, 0.6f, 1.0f};
  CHECK(std::memcmp(bytes.data(), expect, 16) == 0);
  CHECK(decodeDisplayPixels(bytes, ColorFormat::RGBAF32) == c);
}

TEST_CASE("RGBA8 roundtrip error is at most half a step") {
  std::mt19937 rng(11);
  std::uniform_real_distribution<float> u(-0.2f, 1.2f);
  Eigen::Matrix4Xf c(4, 1000);
  for (Eigen::Index i = 0; i < c.size(); ++i) c.data()[i] = u(rng);
  const auto back = decodeDisplayPixels(encodeDisplayPixels(c, ColorFormat::RGBA8), ColorFormat::RGBA8);
  const Eigen::Matrix4Xf clamped = c.cwiseMax(0.0f).cwiseMin(1.0f);
  CHECK((back - clamped).cwiseAbs().maxCoeff() <= 1.0f / 510.0f + 1e-6f);
}

TEST_CASE("image blit and pixel lookup") {
  Image img;
  img.allocate(100, 70, ColorFormat::RGBA8);
  CHECK(img.bytes.size() == 100u * 70u * 4u);
  Eigen::Matrix4Xf c(4, 36 * 6);
  c.colwise() = Eigen::Vector4f(1.0f, 0.0f, 0.0f, 1.0f);
  img.blit({64, 64, 36, 6}, encodeDisplayPixels(c, ColorFormat::RGBA8));
  CHECK(img.pixel(99, 69) == Eigen::Vector4f(1, 0, 0, 1));
  CHECK(img.pixel(63, 69) == Eigen::Vector4f(0, 0, 0, 0));
  Image none;
  none.allocate(100, 70, ColorFormat::NONE);
  CHECK_FALSE(none.allocated());
}

TEST_CASE("tile message roundtrip") {
  Tile t;
  t.frameIndex = 9;
  t.tileID = 3;
  t.coords = {1, 1};
  t.generation = 2;
  t.children = 5;
  t.accumulationID = 7;
  t.resize({64, 64, 36, 6});
  std::mt19937 rng(5);
  for (Eigen::Index i = 0; i < t.color.size(); ++i) t.color.data()[i] = static_cast<float>(rng() % 1000) / 999.0f;
  for (Eigen::Index i = 0; i < t.depth.size(); ++i) t.depth[i] = static_cast<float>(i);
  t.depth[0] = std::numeric_limits<float>::infinity();
  const auto bytes = serializeTile(t);
  const Tile u = deserializeTile(bytes, 2);
  CHECK(u.frameIndex == 9);
  CHECK(u.tileID == 3);
  CHECK(u.coords == TileCoords{1, 1});
  CHECK(u.region == t.region);
  CHECK(u.generation == 2);
  CHECK(u.children == 5);
  CHECK(u.accumulationID == 7);
  CHECK(u.color == t.color);
  CHECK(u.depth == t.depth);

  auto truncated = bytes;
  truncated.pop_back();
  CHECK_THROWS_AS(deserializeTile(truncated, 2), IntegrityError);
  auto extra = bytes;
  extra.push_back(std::byte{0});
  CHECK_THROWS_AS(deserializeTile(extra, 2), IntegrityError);
}

TEST_CASE("wire frame header") {
  const std::vector<std::byte> payload{std::byte{1}, std::byte{2}, std::byte{3}};
  const auto frame = encodeFrame(0x0102030405060708ull, 1, payload);
  REQUIRE(frame.size() == kFrameHeaderSize + 3);
  CHECK(std::memcmp(frame.data(), "DFB1", 4) == 0);
  CHECK(frame[4] == std::byte{0x08});  // little endian destObject
  const auto h = decodeFrameHeader(std::span(frame).first(kFrameHeaderSize));
  CHECK(h.destObject == 0x0102030405060708ull);
  CHECK(h.flags == 1);
  CHECK(h.payloadLength == 3);
  auto bad = frame;
  bad[0] = std::byte{'X'};
  CHECK_THROWS_AS(decodeFrameHeader(std::span(bad).first(kFrameHeaderSize)), IntegrityError);
}
