#pragma once

#include "dfb/transport.hpp"

#include <atomic>
#include <exception>
#include <memory>
#include <string_view>
#include <thread>
#include <unordered_map>

namespace dfb {

enum class CompressionPolicy { Off, On, Auto };

CompressionPolicy parseCompressionPolicy(std::string_view name);
std::string_view toString(CompressionPolicy policy);

/// Auto turns compression on from 16 ranks up.
inline bool compressionEnabled(CompressionPolicy policy, int numRanks) {
  return policy == CompressionPolicy::On || (policy == CompressionPolicy::Auto && numRanks >= 16);
}

struct MessengerStats {
  std::uint64_t bytesSent = 0;
  std::uint64_t bytesReceived = 0;
  std::uint64_t messagesSent = 0;
  std::uint64_t messagesReceived = 0;
  std::uint64_t unknownReceiver = 0;
};

/// Asynchronous point-to-point messaging between distributed objects.
///
/// A distributed object has one instance per rank, all registered under the
/// same ObjectId. post() hands a payload to the outbox and returns; a
/// transport thread drains the outbox and polls for arrivals, and an inbox
/// thread decompresses arrivals and invokes the receiver's handler. Handlers
/// run on the inbox thread only, in arrival order.
class Messenger {
 public:
  using Handler = std::function<void(int srcRank, std::vector<std::byte> payload)>;

  struct Options {
    CompressionPolicy compression = CompressionPolicy::Auto;
    /// Unknown receivers become a fault surfaced at the next sync point.
    bool strict = false;
    std::chrono::milliseconds collectiveTimeout = std::chrono::seconds(60);
  };

  explicit Messenger(std::shared_ptr<Transport> transport) : Messenger(std::move(transport), Options{}) {}
  Messenger(std::shared_ptr<Transport> transport, Options options);
  ~Messenger();

  Messenger(const Messenger&) = delete;
  Messenger& operator=(const Messenger&) = delete;

  int rank() const { return transport_->rank(); }
  int size() const { return transport_->size(); }
  bool compressing() const { return compress_; }

  /// Throws UsageError if `id` is already registered on this rank.
  void registerObject(ObjectId id, Handler handler);
  void unregisterObject(ObjectId id);

  /// Thread-safe, non-blocking. Posting to self skips the transport.
  void post(int destRank, ObjectId destObject, std::vector<std::byte> payload);

  /// Blocks until everything posted so far has been handed to the transport.
  void flush();
  /// Rethrows a pending transport or handler fault, if any.
  void checkFaults();

  std::optional<GatherResult> gather(int root, std::span<const std::byte> local);
  void barrier();

  MessengerStats stats() const;

 private:
  void transportLoop(std::stop_token stop);
  void inboxLoop(std::stop_token stop);
  void recordFault(std::exception_ptr fault);
  void dispatch(Envelope envelope);

  std::shared_ptr<Transport> transport_;
  Options options_;
  bool compress_;

  std::mutex handlersMutex_;
  std::unordered_map<ObjectId, std::shared_ptr<Handler>> handlers_;
  std::mutex dispatchMutex_;

  std::mutex outboxMutex_;
  std::condition_variable outboxCv_;
  std::deque<Envelope> outbox_;
  std::size_t inFlight_ = 0;  // popped from the outbox, not yet sent
  bool wake_ = false;

  std::mutex inboxMutex_;
  std::condition_variable inboxCv_;
  std::deque<Envelope> inbox_;

  std::mutex faultMutex_;
  std::exception_ptr fault_;

  std::atomic<std::uint64_t> bytesSent_{0};
  std::atomic<std::uint64_t> bytesReceived_{0};
  std::atomic<std::uint64_t> messagesSent_{0};
  std::atomic<std::uint64_t> messagesReceived_{0};
  std::atomic<std::uint64_t> unknownReceiver_{0};

  std::jthread inboxThread_;
  std::jthread transportThread_;
};

}  // namespace dfb
