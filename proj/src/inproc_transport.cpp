#include "dfb/inproc_transport.hpp"

#include "dfb/errors.hpp"

#include <algorithm>

namespace dfb {

InprocFabric::InprocFabric(int numRanks, InprocOptions options)
    : options_(options), rng_(options.seed) {
  if (numRanks < 1) throw ConfigError("fabric needs at least one rank");
  lastDelivery_.assign(static_cast<std::size_t>(numRanks) * static_cast<std::size_t>(numRanks),
                       Transport::Clock::time_point{});
  endpoints_.reserve(static_cast<std::size_t>(numRanks));
  for (int r = 0; r < numRanks; ++r) endpoints_.push_back(std::make_shared<InprocTransport>(*this, r));
}

InprocFabric::~InprocFabric() = default;

Transport::Clock::time_point InprocFabric::scheduleDelivery(int src, int dst) {
  const auto now = Transport::Clock::now();
  if (options_.maxDelay.count() == 0) return now;
  std::lock_guard lock(rngMutex_);
  std::uniform_int_distribution<long long> dist(0, options_.maxDelay.count());
  auto at = now + std::chrono::microseconds(dist(rng_));
  auto& last = lastDelivery_[static_cast<std::size_t>(src * size() + dst)];
  at = std::max(at, last);
  last = at;
  return at;
}

void InprocTransport::send(Envelope envelope) {
  if (envelope.destRank < 0 || envelope.destRank >= size())
    throw UsageError("destination rank out of range");
  envelope.srcRank = rank_;
  auto& dest = *fabric_.endpoints_[static_cast<std::size_t>(envelope.destRank)];
  if (isReservedObject(envelope.destObject)) {
    dest.deliverCollective(std::move(envelope));
    return;
  }
  const auto at = fabric_.scheduleDelivery(rank_, envelope.destRank);
  dest.enqueue(std::move(envelope), at);
}

void InprocTransport::enqueue(Envelope envelope, Clock::time_point deliverAt) {
  std::function<void()> notify;
  {
    std::lock_guard lock(mutex_);
    queue_.push_back({std::move(envelope), deliverAt});
    notify = notify_;
  }
  if (notify) notify();
}

std::optional<Envelope> InprocTransport::poll() {
  std::lock_guard lock(mutex_);
  const auto now = Clock::now();
  // Channel delivery times are monotone, so the first ready entry never
  // overtakes an earlier message from the same sender.
  auto it = std::find_if(queue_.begin(), queue_.end(), [&](const Pending& p) { return p.deliverAt <= now; });
  if (it == queue_.end()) return std::nullopt;
  Envelope env = std::move(it->envelope);
  queue_.erase(it);
  return env;
}

void InprocTransport::setArrivalNotifier(std::function<void()> notify) {
  std::lock_guard lock(mutex_);
  notify_ = std::move(notify);
}

}  // namespace dfb
