#pragma once

#include "dfb/transport.hpp"

#include <memory>
#include <random>

namespace dfb {

/// Fault injection for the in-process fabric.
struct InprocOptions {
  /// Each message is held back for a uniform random delay in [0, maxDelay],
  /// never overtaking an earlier message on the same channel.
  std::chrono::microseconds maxDelay{0};
  std::uint64_t seed = 1;
};

class InprocTransport;

/// A set of ranks living in one process, connected by queues.
/// The fabric must outlive every use of its endpoints.
class InprocFabric {
 public:
  explicit InprocFabric(int numRanks, InprocOptions options = {});
  ~InprocFabric();

  InprocFabric(const InprocFabric&) = delete;
  InprocFabric& operator=(const InprocFabric&) = delete;

  int size() const { return static_cast<int>(endpoints_.size()); }
  std::shared_ptr<InprocTransport> endpoint(int rank) const { return endpoints_.at(static_cast<std::size_t>(rank)); }

 private:
  friend class InprocTransport;
  Transport::Clock::time_point scheduleDelivery(int src, int dst);

  InprocOptions options_;
  std::mutex rngMutex_;
  std::mt19937_64 rng_;
  std::vector<Transport::Clock::time_point> lastDelivery_;  // [src * size + dst]
  std::vector<std::shared_ptr<InprocTransport>> endpoints_;
};

class InprocTransport final : public Transport {
 public:
  InprocTransport(InprocFabric& fabric, int rank) : fabric_(fabric), rank_(rank) {}

  int rank() const override { return rank_; }
  int size() const override { return fabric_.size(); }
  void send(Envelope envelope) override;
  std::optional<Envelope> poll() override;
  void setArrivalNotifier(std::function<void()> notify) override;

 private:
  struct Pending {
    Envelope envelope;
    Clock::time_point deliverAt;
  };

  void enqueue(Envelope envelope, Clock::time_point deliverAt);

  InprocFabric& fabric_;
  int rank_;
  std::mutex mutex_;
  std::deque<Pending> queue_;
  std::function<void()> notify_;
};

}  // namespace dfb
