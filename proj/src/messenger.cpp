#include "dfb/messenger.hpp"

#include "dfb/codec.hpp"
#include "dfb/errors.hpp"

#include <string>

namespace dfb {

CompressionPolicy parseCompressionPolicy(std::string_view name) {
  if (name == "on") return CompressionPolicy::On;
  if (name == "off") return CompressionPolicy::Off;
  if (name == "auto") return CompressionPolicy::Auto;
  throw ConfigError("unknown compression policy '" + std::string(name) + "'");
}

std::string_view toString(CompressionPolicy policy) {
  switch (policy) {
    case CompressionPolicy::On: return "on";
    case CompressionPolicy::Off: return "off";
    case CompressionPolicy::Auto: return "auto";
  }
  return "?";
}

Messenger::Messenger(std::shared_ptr<Transport> transport, Options options)
    : transport_(std::move(transport)),
      options_(options),
      compress_(compressionEnabled(options.compression, transport_->size())) {
  transport_->setArrivalNotifier([this] {
    {
      std::lock_guard lock(outboxMutex_);
      wake_ = true;
    }
    outboxCv_.notify_one();
  });
  inboxThread_ = std::jthread([this](std::stop_token st) { inboxLoop(st); });
  transportThread_ = std::jthread([this](std::stop_token st) { transportLoop(st); });
}

Messenger::~Messenger() {
  try {
    flush();
  } catch (...) {
  }
  transport_->setArrivalNotifier({});
  transportThread_.request_stop();
  outboxCv_.notify_all();
  transportThread_.join();
  inboxThread_.request_stop();
  inboxCv_.notify_all();
  inboxThread_.join();
}

void Messenger::registerObject(ObjectId id, Handler handler) {
  if (isReservedObject(id)) throw UsageError("object id is reserved for collectives");
  std::lock_guard lock(handlersMutex_);
  if (!handlers_.emplace(id, std::make_shared<Handler>(std::move(handler))).second)
    throw UsageError("object " + std::to_string(id) + " already registered");
}

void Messenger::unregisterObject(ObjectId id) {
  {
    std::lock_guard lock(handlersMutex_);
    handlers_.erase(id);
  }
  // Wait out a handler that may be running for `id` right now.
  std::lock_guard running(dispatchMutex_);
}

void Messenger::post(int destRank, ObjectId destObject, std::vector<std::byte> payload) {
  if (destRank < 0 || destRank >= size()) throw UsageError("destination rank out of range");
  if (isReservedObject(destObject)) throw UsageError("object id is reserved for collectives");
  Envelope env;
  env.srcRank = rank();
  env.destRank = destRank;
  env.destObject = destObject;
  if (destRank == rank()) {
    env.payload = std::move(payload);
    {
      std::lock_guard lock(inboxMutex_);
      inbox_.push_back(std::move(env));
    }
    inboxCv_.notify_one();
    return;
  }
  if (compress_) {
    env.payload = compress(payload);
    env.flags |= kFlagCompressed;
  } else {
    env.payload = std::move(payload);
  }
  {
    std::lock_guard lock(outboxMutex_);
    outbox_.push_back(std::move(env));
    wake_ = true;
  }
  outboxCv_.notify_one();
}

void Messenger::transportLoop(std::stop_token stop) {
  while (true) {
    std::deque<Envelope> batch;
    {
      std::unique_lock lock(outboxMutex_);
      if (outbox_.empty() && !wake_) {
        if (stop.stop_requested()) return;
        // The timeout covers delayed in-process deliveries, which do not notify when they ripen.
        outboxCv_.wait_for(lock, std::chrono::milliseconds(1));
      }
      wake_ = false;
      batch.swap(outbox_);
      inFlight_ = batch.size();
    }
    for (auto& env : batch) {
      const auto wireBytes = env.payload.size();
      try {
        transport_->send(std::move(env));
        bytesSent_ += wireBytes;
        ++messagesSent_;
      } catch (...) {
        recordFault(std::current_exception());
      }
    }
    if (!batch.empty()) {
      {
        std::lock_guard lock(outboxMutex_);
        inFlight_ = 0;
      }
      outboxCv_.notify_all();
    }
    std::deque<Envelope> arrived;
    while (auto env = transport_->poll()) arrived.push_back(std::move(*env));
    if (!arrived.empty()) {
      {
        std::lock_guard lock(inboxMutex_);
        for (auto& env : arrived) inbox_.push_back(std::move(env));
      }
      inboxCv_.notify_one();
    }
  }
}

void Messenger::inboxLoop(std::stop_token stop) {
  while (true) {
    Envelope env;
    {
      std::unique_lock lock(inboxMutex_);
      inboxCv_.wait(lock, [&] { return !inbox_.empty() || stop.stop_requested(); });
      if (inbox_.empty()) return;
      env = std::move(inbox_.front());
      inbox_.pop_front();
    }
    dispatch(std::move(env));
  }
}

void Messenger::dispatch(Envelope env) {
  try {
    if (env.srcRank != rank()) {
      bytesReceived_ += env.payload.size();
      ++messagesReceived_;
    }
    if (env.flags & kFlagCompressed) env.payload = decompress(env.payload);
    std::shared_ptr<Handler> handler;
    {
      std::lock_guard lock(handlersMutex_);
      if (auto it = handlers_.find(env.destObject); it != handlers_.end()) handler = it->second;
    }
    if (!handler) {
      ++unknownReceiver_;
      if (options_.strict)
        throw ProtocolError("message for unknown receiver " + std::to_string(env.destObject) + " from rank " +
                            std::to_string(env.srcRank));
      return;
    }
    std::lock_guard running(dispatchMutex_);
    (*handler)(env.srcRank, std::move(env.payload));
  } catch (...) {
    recordFault(std::current_exception());
  }
}

void Messenger::recordFault(std::exception_ptr fault) {
  std::lock_guard lock(faultMutex_);
  if (!fault_) fault_ = std::move(fault);
}

void Messenger::checkFaults() {
  std::exception_ptr fault;
  {
    std::lock_guard lock(faultMutex_);
    fault = fault_;
  }
  if (fault) std::rethrow_exception(fault);
}

void Messenger::flush() {
  std::unique_lock lock(outboxMutex_);
  outboxCv_.wait(lock, [&] { return outbox_.empty() && inFlight_ == 0; });
}

std::optional<GatherResult> Messenger::gather(int root, std::span<const std::byte> local) {
  flush();
  checkFaults();
  if (rank() != root) bytesSent_ += local.size();
  auto result = transport_->gather(root, local, options_.collectiveTimeout);
  if (result) bytesReceived_ += result->bytes.size() - local.size();
  return result;
}

void Messenger::barrier() {
  flush();
  checkFaults();
  transport_->barrier(options_.collectiveTimeout);
}

MessengerStats Messenger::stats() const {
  return {bytesSent_.load(), bytesReceived_.load(), messagesSent_.load(), messagesReceived_.load(),
          unknownReceiver_.load()};
}

}  // namespace dfb
