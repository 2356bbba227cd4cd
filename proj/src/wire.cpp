#include "dfb/wire.hpp"

#include "dfb/errors.hpp"

namespace dfb {

std::span<const std::byte> ByteReader::take(std::size_t n) {
  if (n > remaining()) throw IntegrityError("message truncated");
  auto out = in_.subspan(pos_, n);
  pos_ += n;
  return out;
}

std::vector<std::byte> encodeFrame(std::uint64_t destObject, std::uint32_t flags,
                                   std::span<const std::byte> payload) {
  std::vector<std::byte> out;
  out.reserve(kFrameHeaderSize + payload.size());
  ByteWriter w(out);
  w.put(std::as_bytes(std::span(kFrameMagic)));
  w.put(destObject);
  w.put(flags);
  w.put(static_cast<std::uint32_t>(payload.size()));
  w.put(payload);
  return out;
}

FrameHeader decodeFrameHeader(std::span<const std::byte> header) {
  ByteReader r(header);
  const auto magic = r.take(4);
  if (std::memcmp(magic.data(), kFrameMagic, 4) != 0) throw IntegrityError("bad frame magic");
  FrameHeader h;
  h.destObject = r.get<std::uint64_t>();
  h.flags = r.get<std::uint32_t>();
  h.payloadLength = r.get<std::uint32_t>();
  return h;
}

std::vector<std::byte> serializeTile(const Tile& tile) {
  const auto area = static_cast<std::size_t>(tile.region.area());
  std::vector<std::byte> out;
  out.reserve(36 + area * 20);
  ByteWriter w(out);
  w.put(tile.frameIndex);
  w.put(tile.tileID);
  w.put(tile.generation);
  w.put(tile.children);
  w.put(tile.accumulationID);
  w.put(static_cast<std::uint16_t>(tile.region.x));
  w.put(static_cast<std::uint16_t>(tile.region.y));
  w.put(static_cast<std::uint16_t>(tile.region.w));
  w.put(static_cast<std::uint16_t>(tile.region.h));
  w.putArray(tile.color.data(), area * 4);
  w.putArray(tile.depth.data(), area);
  return out;
}

Tile deserializeTile(std::span<const std::byte> bytes, int tilesPerRow) {
  ByteReader r(bytes);
  Tile t;
  t.frameIndex = r.get<std::uint32_t>();
  t.tileID = r.get<std::uint32_t>();
  t.generation = r.get<std::uint32_t>();
  t.children = r.get<std::uint32_t>();
  t.accumulationID = r.get<std::uint32_t>();
  Region region;
  region.x = r.get<std::uint16_t>();
  region.y = r.get<std::uint16_t>();
  region.w = r.get<std::uint16_t>();
  region.h = r.get<std::uint16_t>();
  t.resize(region);
  const auto area = static_cast<std::size_t>(region.area());
  r.getArray(t.color.data(), area * 4);
  r.getArray(t.depth.data(), area);
  if (r.remaining() != 0) throw IntegrityError("trailing bytes after tile");
  t.coords = {static_cast<int>(t.tileID % static_cast<std::uint32_t>(tilesPerRow)),
              static_cast<int>(t.tileID / static_cast<std::uint32_t>(tilesPerRow))};
  return t;
}

}  // namespace dfb
