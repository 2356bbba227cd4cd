#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace dfb {

enum class ColorFormat : std::uint8_t { RGBA8, RGBAF32, NONE };

std::string_view toString(ColorFormat format);
ColorFormat parseColorFormat(std::string_view name);

/// Bytes per pixel of the display encoding (0 for NONE).
std::size_t bytesPerPixel(ColorFormat format);

inline constexpr int kDefaultTileSize = 64;

struct FrameConfig {
  int width = 0;
  int height = 0;
  int tileSize = kDefaultTileSize;
  ColorFormat colorFormat = ColorFormat::RGBA8;
  bool accumulationEnabled = false;

  /// Throws ConfigError on non-positive dimensions.
  void validate() const;
  int tilesX() const { return (width + tileSize - 1) / tileSize; }
  int tilesY() const { return (height + tileSize - 1) / tileSize; }
  int tileCount() const { return tilesX() * tilesY(); }
};

/// Pixel rectangle [x, x+w) x [y, y+h).
struct Region {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;

  int area() const { return w * h; }
  bool operator==(const Region&) const = default;
};

struct TileCoords {
  int col = 0;
  int row = 0;
  bool operator==(const TileCoords&) const = default;
};

/// A tile fragment. Pixel storage covers only the screen region, one
/// column per pixel in row-major pixel order within the region.
struct Tile {
  std::uint32_t frameIndex = 0;
  std::uint32_t tileID = 0;
  TileCoords coords;
  Region region;
  std::uint32_t generation = 0;
  std::uint32_t children = 0;
  std::uint32_t accumulationID = 0;
  Eigen::Matrix4Xf color;  // premultiplied RGBA
  Eigen::VectorXf depth;   // ray parameter, +inf = background

  int pixelCount() const { return region.area(); }
  /// Sizes buffers for `region` and clears to transparent at infinite depth.
  void resize(const Region& r);
  void fill(const Eigen::Vector4f& rgba, float z);
};

struct TileDescriptor {
  TileCoords coords;
  std::uint32_t tileID = 0;
  int ownerRank = 0;
  Region region;
};

/// The tile grid of a frame plus round-robin ownership.
class TileGrid {
 public:
  TileGrid(const FrameConfig& config, int numRanks);

  const FrameConfig& config() const { return config_; }
  int numRanks() const { return numRanks_; }
  std::size_t size() const { return descriptors_.size(); }
  const TileDescriptor& operator[](std::size_t tileID) const { return descriptors_[tileID]; }
  const std::vector<TileDescriptor>& descriptors() const { return descriptors_; }

  /// Throws UsageError on out-of-grid coordinates.
  const TileDescriptor& at(TileCoords coords) const;
  std::vector<std::uint32_t> ownedBy(int rank) const;

 private:
  FrameConfig config_;
  int numRanks_;
  std::vector<TileDescriptor> descriptors_;
};

std::vector<TileDescriptor> makeTileGrid(const FrameConfig& config, int numRanks);

/// Converts a finished premultiplied tile to the display format.
std::vector<std::byte> encodeDisplayPixels(const Eigen::Matrix4Xf& color, ColorFormat format);

/// Inverse of encodeDisplayPixels for RGBA8 and RGBAF32 (RGBA8 decodes as byte/255).
Eigen::Matrix4Xf decodeDisplayPixels(std::span<const std::byte> bytes, ColorFormat format);

/// Full-frame image in a display format. Empty bytes for NONE.
struct Image {
  int width = 0;
  int height = 0;
  ColorFormat format = ColorFormat::NONE;
  std::vector<std::byte> bytes;

  bool allocated() const { return !bytes.empty(); }
  void allocate(int w, int h, ColorFormat f);
  /// Writes an encoded tile block covering `region` into the image.
  void blit(const Region& region, std::span<const std::byte> encoded);
  /// Pixel (x, y) decoded to float RGBA.
  Eigen::Vector4f pixel(int x, int y) const;
};

}  // namespace dfb
