#pragma once

#include <stdexcept>
#include <string>

namespace dfb {

/// Invalid frame, scene or run configuration.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// API misuse: duplicate registration, double completion, out-of-range rank.
struct UsageError : std::logic_error {
  using std::logic_error::logic_error;
};

/// A peer violated the tile or frame protocol (stale frame, unexpected child).
struct ProtocolError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Corrupt compressed data or a malformed wire frame.
struct IntegrityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A collective or a frame did not complete before its deadline.
struct TimeoutError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Connection setup or socket I/O failure.
struct TransportError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace dfb
