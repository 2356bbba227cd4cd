#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace dfb {

/// Name recorded in run manifests.
inline constexpr std::string_view kCodecName = "zlib-deflate-1";

/// Lossless compression. Output = u32 LE original length | deflate stream.
std::vector<std::byte> compress(std::span<const std::byte> payload);

/// Throws IntegrityError on truncated or corrupt input.
std::vector<std::byte> decompress(std::span<const std::byte> packed);

}  // namespace dfb
