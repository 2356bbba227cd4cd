#include "dfb/tile.hpp"

#include "dfb/errors.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <limits>
#include <string>

namespace dfb {

static_assert(std::endian::native == std::endian::little, "wire encoding assumes a little-endian host");

std::string_view toString(ColorFormat format) {
  switch (format) {
    case ColorFormat::RGBA8: return "rgba8";
    case ColorFormat::RGBAF32: return "rgbaf32";
    case ColorFormat::NONE: return "none";
  }
  return "?";
}

ColorFormat parseColorFormat(std::string_view name) {
  if (name == "rgba8") return ColorFormat::RGBA8;
  if (name == "rgbaf32") return ColorFormat::RGBAF32;
  if (name == "none") return ColorFormat::NONE;
  throw ConfigError("unknown color format '" + std::string(name) + "'");
}

std::size_t bytesPerPixel(ColorFormat format) {
  switch (format) {
    case ColorFormat::RGBA8: return 4;
    case ColorFormat::RGBAF32: return 16;
    case ColorFormat::NONE: return 0;
  }
  return 0;
}

void FrameConfig::validate() const {
  if (width < 1 || height < 1 || tileSize < 1)
    throw ConfigError("frame dimensions and tile size must be positive");
  if (width > 65535 || height > 65535)
    throw ConfigError("frame dimensions exceed the 16-bit wire region fields");
}

void Tile::resize(const Region& r) {
  region = r;
  color.setZero(4, r.area());
  depth.setConstant(r.area(), std::numeric_limits<float>::infinity());
}

void Tile::fill(const Eigen::Vector4f& rgba, float z) {
  color.colwise() = rgba;
  depth.setConstant(z);
}

std::vector<TileDescriptor> makeTileGrid(const FrameConfig& config, int numRanks) {
  config.validate();
  if (numRanks < 1) throw ConfigError("numRanks must be >= 1");
  std::vector<TileDescriptor> out;
  out.reserve(static_cast<std::size_t>(config.tileCount()));
  for (int row = 0; row < config.tilesY(); ++row) {
    for (int col = 0; col < config.tilesX(); ++col) {
      TileDescriptor d;
      d.coords = {col, row};
      d.tileID = static_cast<std::uint32_t>(row * config.tilesX() + col);
      d.ownerRank = static_cast<int>(d.tileID % static_cast<std::uint32_t>(numRanks));
      const int x = col * config.tileSize;
      const int y = row * config.tileSize;
      d.region = {x, y, std::min(config.tileSize, config.width - x),
                  std::min(config.tileSize, config.height - y)};
      out.push_back(d);
    }
  }
  return out;
}

TileGrid::TileGrid(const FrameConfig& config, int numRanks)
    : config_(config), numRanks_(numRanks), descriptors_(makeTileGrid(config, numRanks)) {}

const TileDescriptor& TileGrid::at(TileCoords coords) const {
  if (coords.col < 0 || coords.row < 0 || coords.col >= config_.tilesX() ||
      coords.row >= config_.tilesY())
    throw UsageError("tile coordinates outside the grid");
  return descriptors_[static_cast<std::size_t>(coords.row * config_.tilesX() + coords.col)];
}

std::vector<std::uint32_t> TileGrid::ownedBy(int rank) const {
  std::vector<std::uint32_t> out;
  for (const auto& d : descriptors_)
    if (d.ownerRank == rank) out.push_back(d.tileID);
  return out;
}

std::vector<std::byte> encodeDisplayPixels(const Eigen::Matrix4Xf& color, ColorFormat format) {
  const auto n = static_cast<std::size_t>(color.cols());
  std::vector<std::byte> out(n * bytesPerPixel(format));
  switch (format) {
    case ColorFormat::RGBA8:
      for (std::size_t i = 0; i < n * 4; ++i) {
        const float c = std::clamp(color.data()[i], 0.0f, 1.0f);
        out[i] = static_cast<std::byte>(std::lround(c * 255.0f));
      }
      break;
    case ColorFormat::RGBAF32:
      std::memcpy(out.data(), color.data(), out.size());
      break;
    case ColorFormat::NONE:
      break;
  }
  return out;
}

Eigen::Matrix4Xf decodeDisplayPixels(std::span<const std::byte> bytes, ColorFormat format) {
  const std::size_t bpp = bytesPerPixel(format);
  if (bpp == 0) return {};
  if (bytes.size() % bpp != 0) throw IntegrityError("display block is not a whole number of pixels");
  Eigen::Matrix4Xf out(4, static_cast<Eigen::Index>(bytes.size() / bpp));
  if (format == ColorFormat::RGBAF32) {
    std::memcpy(out.data(), bytes.data(), bytes.size());
  } else {
    for (std::size_t i = 0; i < bytes.size(); ++i)
      out.data()[i] = static_cast<float>(std::to_integer<unsigned>(bytes[i])) / 255.0f;
  }
  return out;
}

void Image::allocate(int w, int h, ColorFormat f) {
  width = w;
  height = h;
  format = f;
  bytes.assign(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * bytesPerPixel(f),
               std::byte{0});
}

void Image::blit(const Region& region, std::span<const std::byte> encoded) {
  const std::size_t bpp = bytesPerPixel(format);
  const std::size_t rowBytes = static_cast<std::size_t>(region.w) * bpp;
  if (encoded.size() != rowBytes * static_cast<std::size_t>(region.h))
    throw IntegrityError("encoded tile size does not match its region");
  for (int r = 0; r < region.h; ++r) {
    const std::size_t dst =
        (static_cast<std::size_t>(region.y + r) * static_cast<std::size_t>(width) +
         static_cast<std::size_t>(region.x)) * bpp;
    std::memcpy(bytes.data() + dst, encoded.data() + static_cast<std::size_t>(r) * rowBytes,
                rowBytes);
  }
}

Eigen::Vector4f Image::pixel(int x, int y) const {
  const std::size_t bpp = bytesPerPixel(format);
  const std::size_t off =
      (static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)) *
      bpp;
  return decodeDisplayPixels(std::span(bytes).subspan(off, bpp), format).col(0);
}

}  // namespace dfb
