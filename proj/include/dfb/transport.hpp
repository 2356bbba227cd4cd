#pragma once

#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <mutex>
#include <optional>
#include <span>
#include <vector>

namespace dfb {

using ObjectId = std::uint64_t;

inline constexpr std::uint32_t kFlagCompressed = 1u << 0;

/// Object ids reserved for transport collectives.
inline constexpr ObjectId kGatherObject = ~ObjectId{0};
inline constexpr ObjectId kReleaseObject = ~ObjectId{0} - 1;

inline bool isReservedObject(ObjectId id) { return id >= kReleaseObject; }

struct Envelope {
  int srcRank = -1;  // filled in on receipt
  int destRank = 0;
  ObjectId destObject = 0;
  std::uint32_t flags = 0;
  std::vector<std::byte> payload;
};

/// Result of a gather at the root: rank-ordered concatenation plus offsets.
struct GatherResult {
  std::vector<std::byte> bytes;
  std::vector<std::size_t> offsets;

  std::span<const std::byte> block(std::size_t rank) const {
    const std::size_t end = rank + 1 < offsets.size() ? offsets[rank + 1] : bytes.size();
    return std::span(bytes).subspan(offsets[rank], end - offsets[rank]);
  }
};

/// Point-to-point transport between ranks.
///
/// send() and poll() never block on the network. Messages between a given
/// pair of ranks arrive in send order. gather() and barrier() are collective:
/// every rank calls them the same number of times in the same order. They
/// are built on send() using reserved object ids, so backends only have to
/// route reserved-id arrivals to deliverCollective().
class Transport {
 public:
  using Clock = std::chrono::steady_clock;

  virtual ~Transport() = default;

  virtual int rank() const = 0;
  virtual int size() const = 0;
  /// Thread-safe. Throws UsageError for an out-of-range destination.
  virtual void send(Envelope envelope) = 0;
  /// Next arrived data envelope, if any.
  virtual std::optional<Envelope> poll() = 0;
  /// Called (from an arbitrary thread) whenever a data envelope may be ready.
  virtual void setArrivalNotifier(std::function<void()> notify) = 0;

  /// At the root returns every rank's bytes in rank order; elsewhere nothing.
  /// Throws TimeoutError if a rank does not contribute before `deadline`.
  std::optional<GatherResult> gather(int root, std::span<const std::byte> local,
                                     std::chrono::milliseconds deadline);
  /// Gather of zero bytes to rank 0 followed by a release broadcast.
  void barrier(std::chrono::milliseconds deadline);

 protected:
  /// Backends hand reserved-id envelopes here; srcRank must be set.
  void deliverCollective(Envelope envelope);

 private:
  Envelope awaitCollective(int src, ObjectId expected, Clock::time_point deadline);

  std::mutex collectiveMutex_;
  std::condition_variable collectiveCv_;
  std::vector<std::deque<Envelope>> collective_;
};

}  // namespace dfb
