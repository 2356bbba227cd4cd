#include "dfb/transport.hpp"

#include "dfb/errors.hpp"

#include <string>

namespace dfb {

void Transport::deliverCollective(Envelope envelope) {
  {
    std::lock_guard lock(collectiveMutex_);
    if (collective_.size() < static_cast<std::size_t>(size())) collective_.resize(static_cast<std::size_t>(size()));
    collective_[static_cast<std::size_t>(envelope.srcRank)].push_back(std::move(envelope));
  }
  collectiveCv_.notify_all();
}

Envelope Transport::awaitCollective(int src, ObjectId expected, Clock::time_point deadline) {
  std::unique_lock lock(collectiveMutex_);
  if (collective_.size() < static_cast<std::size_t>(size())) collective_.resize(static_cast<std::size_t>(size()));
  auto& queue = collective_[static_cast<std::size_t>(src)];
  if (!collectiveCv_.wait_until(lock, deadline, [&] { return !queue.empty(); }))
    throw TimeoutError("rank " + std::to_string(rank()) + ": collective timed out waiting for rank " +
                       std::to_string(src));
  Envelope env = std::move(queue.front());
  queue.pop_front();
  if (env.destObject != expected)
    throw ProtocolError("collective mismatch: ranks called gather/barrier in different orders");
  return env;
}

std::optional<GatherResult> Transport::gather(int root, std::span<const std::byte> local,
                                              std::chrono::milliseconds deadline) {
  if (root < 0 || root >= size()) throw UsageError("gather root out of range");
  if (rank() != root) {
    Envelope env;
    env.destRank = root;
    env.destObject = kGatherObject;
    env.payload.assign(local.begin(), local.end());
    send(std::move(env));
    return std::nullopt;
  }
  const auto until = Clock::now() + deadline;
  GatherResult result;
  result.offsets.reserve(static_cast<std::size_t>(size()));
  for (int r = 0; r < size(); ++r) {
    result.offsets.push_back(result.bytes.size());
    if (r == root) {
      result.bytes.insert(result.bytes.end(), local.begin(), local.end());
    } else {
      Envelope env = awaitCollective(r, kGatherObject, until);
      result.bytes.insert(result.bytes.end(), env.payload.begin(), env.payload.end());
    }
  }
  return result;
}

void Transport::barrier(std::chrono::milliseconds deadline) {
  gather(0, {}, deadline);
  if (rank() == 0) {
    for (int r = 1; r < size(); ++r) {
      Envelope env;
      env.destRank = r;
      env.destObject = kReleaseObject;
      send(std::move(env));
    }
  } else {
    awaitCollective(0, kReleaseObject, Clock::now() + deadline);
  }
}

}  // namespace dfb
