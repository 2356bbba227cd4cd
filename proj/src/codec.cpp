#include "dfb/codec.hpp"

#include "dfb/errors.hpp"

#include <zlib.h>

#include <cstdint>
#include <cstring>
#include <limits>

namespace dfb {

namespace {
constexpr std::size_t kHeader = 4;
}

std::vector<std::byte> compress(std::span<const std::byte> payload) {
  if (payload.size() > std::numeric_limits<std::uint32_t>::max())
    throw UsageError("payload too large to compress");
  const auto rawLen = static_cast<std::uint32_t>(payload.size());
  uLongf bound = compressBound(static_cast<uLong>(payload.size()));
  std::vector<std::byte> out(kHeader + bound);
  std::memcpy(out.data(), &rawLen, kHeader);
  const int rc = compress2(reinterpret_cast<Bytef*>(out.data() + kHeader), &bound,
                           reinterpret_cast<const Bytef*>(payload.data()),
                           static_cast<uLong>(payload.size()), 1);
  if (rc != Z_OK) throw IntegrityError("deflate failed");
  out.resize(kHeader + bound);
  return out;
}

std::vector<std::byte> decompress(std::span<const std::byte> packed) {
  if (packed.size() < kHeader) throw IntegrityError("compressed payload truncated");
  std::uint32_t rawLen = 0;
  std::memcpy(&rawLen, packed.data(), kHeader);
  std::vector<std::byte> out(rawLen);
  uLongf outLen = rawLen;
  // zlib rejects a null destination even for zero-length output.
  Bytef scratch = 0;
  Bytef* dst = rawLen ? reinterpret_cast<Bytef*>(out.data()) : &scratch;
  const int rc = uncompress(dst, &outLen, reinterpret_cast<const Bytef*>(packed.data() + kHeader),
                            static_cast<uLong>(packed.size() - kHeader));
  if (rc != Z_OK || outLen != rawLen) throw IntegrityError("corrupt compressed payload");
  return out;
}

}  // namespace dfb
