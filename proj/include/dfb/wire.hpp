#pragma once

#include "dfb/tile.hpp"

#include <cstddef>
#include <cstdint>
#include <cstring>
#include <span>
#include <type_traits>
#include <vector>

namespace dfb {

/// Appends little-endian scalars to a byte buffer.
class ByteWriter {
 public:
  explicit ByteWriter(std::vector<std::byte>& out) : out_(out) {}

  template <typename T>
    requires std::is_arithmetic_v<T>
  void put(T value) {
    const auto at = out_.size();
    out_.resize(at + sizeof(T));
    std::memcpy(out_.data() + at, &value, sizeof(T));
  }

  void put(std::span<const std::byte> bytes) { out_.insert(out_.end(), bytes.begin(), bytes.end()); }

  template <typename T>
  void putArray(const T* data, std::size_t count) {
    put(std::as_bytes(std::span(data, count)));
  }

 private:
  std::vector<std::byte>& out_;
};

/// Reads little-endian scalars; throws IntegrityError past the end.
class ByteReader {
 public:
  explicit ByteReader(std::span<const std::byte> in) : in_(in) {}

  template <typename T>
    requires std::is_arithmetic_v<T>
  T get() {
    T value;
    std::memcpy(&value, take(sizeof(T)).data(), sizeof(T));
    return value;
  }

  std::span<const std::byte> take(std::size_t n);

  template <typename T>
  void getArray(T* data, std::size_t count) {
    const auto bytes = take(count * sizeof(T));
    std::memcpy(data, bytes.data(), bytes.size());
  }

  std::size_t remaining() const { return in_.size() - pos_; }

 private:
  std::span<const std::byte> in_;
  std::size_t pos_ = 0;
};

/// TCP wire frame: "DFB1" | destObject u64 | flags u32 | payloadLen u32 | payload.
inline constexpr std::size_t kFrameHeaderSize = 20;
inline constexpr char kFrameMagic[4] = {'D', 'F', 'B', '1'};

struct FrameHeader {
  std::uint64_t destObject = 0;
  std::uint32_t flags = 0;
  std::uint32_t payloadLength = 0;
};

std::vector<std::byte> encodeFrame(std::uint64_t destObject, std::uint32_t flags,
                                   std::span<const std::byte> payload);
/// Parses the 20-byte header; throws IntegrityError on a bad magic.
FrameHeader decodeFrameHeader(std::span<const std::byte> header);

/// Tile message layout; see README "Wire formats".
std::vector<std::byte> serializeTile(const Tile& tile);
/// Throws IntegrityError on truncated or inconsistent data.
Tile deserializeTile(std::span<const std::byte> bytes, int tilesPerRow);

}  // namespace dfb
