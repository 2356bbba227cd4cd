#pragma once

#include "dfb/transport.hpp"

#include <atomic>
#include <istream>
#include <memory>
#include <string>
#include <thread>

namespace dfb {

struct PeerAddress {
  int rank = 0;
  std::string host;
  std::uint16_t port = 0;
};

/// Parses `rank host:port` lines; blank lines and `#` comments are skipped.
/// Ranks must be exactly 0..N-1.
std::vector<PeerAddress> parseManifest(std::istream& in);
std::vector<PeerAddress> loadManifest(const std::string& path);

/// Full mesh of TCP connections carrying length-prefixed "DFB1" frames.
/// Rank i listens on its manifest port, connects to every lower rank and
/// accepts every higher rank; one reader thread per peer.
class TcpTransport final : public Transport {
 public:
  TcpTransport(int rank, std::vector<PeerAddress> peers,
               std::chrono::milliseconds connectTimeout = std::chrono::seconds(30));
  ~TcpTransport() override;

  TcpTransport(const TcpTransport&) = delete;
  TcpTransport& operator=(const TcpTransport&) = delete;

  int rank() const override { return rank_; }
  int size() const override { return static_cast<int>(peers_.size()); }
  void send(Envelope envelope) override;
  std::optional<Envelope> poll() override;
  void setArrivalNotifier(std::function<void()> notify) override;

 private:
  struct Connection {
    int fd = -1;
    std::mutex writeMutex;
    std::atomic<bool> closed{false};
  };

  void connectMesh(std::chrono::milliseconds timeout);
  void readLoop(int peer);
  void pushData(Envelope envelope);

  int rank_;
  std::vector<PeerAddress> peers_;
  std::vector<std::unique_ptr<Connection>> connections_;
  std::atomic<bool> stopping_{false};
  std::vector<std::jthread> readers_;

  std::mutex dataMutex_;
  std::deque<Envelope> data_;
  std::function<void()> notify_;
};

}  // namespace dfb
