#include "dfb/tcp_transport.hpp"

#include "dfb/errors.hpp"
#include "dfb/wire.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>

namespace dfb {

std::vector<PeerAddress> parseManifest(std::istream& in) {
  std::vector<PeerAddress> peers;
  std::string line;
  while (std::getline(in, line)) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string endpoint;
    PeerAddress p;
    if (!(ls >> p.rank)) continue;
    if (!(ls >> endpoint)) throw ConfigError("manifest line missing host:port: " + line);
    const auto colon = endpoint.rfind(':');
    if (colon == std::string::npos) throw ConfigError("manifest endpoint missing port: " + endpoint);
    p.host = endpoint.substr(0, colon);
    const int port = std::stoi(endpoint.substr(colon + 1));
    if (port <= 0 || port > 65535) throw ConfigError("manifest port out of range: " + endpoint);
    p.port = static_cast<std::uint16_t>(port);
    peers.push_back(p);
  }
  std::sort(peers.begin(), peers.end(), [](const auto& a, const auto& b) { return a.rank < b.rank; });
  for (std::size_t i = 0; i < peers.size(); ++i)
    if (peers[i].rank != static_cast<int>(i)) throw ConfigError("manifest ranks must be 0..N-1 without gaps");
  if (peers.empty()) throw ConfigError("manifest lists no ranks");
  return peers;
}

std::vector<PeerAddress> loadManifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open rank manifest " + path);
  return parseManifest(in);
}

namespace {

void writeAll(int fd, const std::byte* data, std::size_t len) {
  while (len > 0) {
    const ssize_t n = ::send(fd, data, len, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw TransportError(std::string("socket write failed: ") + std::strerror(errno));
    }
    data += n;
    len -= static_cast<std::size_t>(n);
  }
}

/// False on orderly shutdown before any byte was read.
bool readAll(int fd, std::byte* data, std::size_t len) {
  std::size_t got = 0;
  while (got < len) {
    const ssize_t n = ::recv(fd, data + got, len - got, 0);
    if (n == 0) {
      if (got == 0) return false;
      throw TransportError("connection closed mid-frame");
    }
    if (n < 0) {
      if (errno == EINTR) continue;
      throw TransportError(std::string("socket read failed: ") + std::strerror(errno));
    }
    got += static_cast<std::size_t>(n);
  }
  return true;
}

sockaddr_in resolve(const PeerAddress& p) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (getaddrinfo(p.host.c_str(), nullptr, &hints, &res) != 0 || !res)
    throw TransportError("cannot resolve host " + p.host);
  sockaddr_in addr{};
  std::memcpy(&addr, res->ai_addr, sizeof(addr));
  freeaddrinfo(res);
  addr.sin_port = htons(p.port);
  return addr;
}

void tuneSocket(int fd) {
  int one = 1;
  setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

}  // namespace

TcpTransport::TcpTransport(int rank, std::vector<PeerAddress> peers, std::chrono::milliseconds connectTimeout)
    : rank_(rank), peers_(std::move(peers)) {
  if (rank_ < 0 || rank_ >= size()) throw ConfigError("rank not present in manifest");
  connections_.reserve(peers_.size());
  for (std::size_t i = 0; i < peers_.size(); ++i) connections_.push_back(std::make_unique<Connection>());
  connectMesh(connectTimeout);
  for (int p = 0; p < size(); ++p)
    if (p != rank_) readers_.emplace_back([this, p] { readLoop(p); });
}

TcpTransport::~TcpTransport() {
  stopping_ = true;
  for (auto& c : connections_)
    if (c->fd >= 0) ::shutdown(c->fd, SHUT_RDWR);
  readers_.clear();  // joins
  for (auto& c : connections_)
    if (c->fd >= 0) ::close(c->fd);
}

void TcpTransport::connectMesh(std::chrono::milliseconds timeout) {
  const auto deadline = Clock::now() + timeout;
  const int listener = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listener < 0) throw TransportError("cannot create listening socket");
  int one = 1;
  setsockopt(listener, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in self{};
  self.sin_family = AF_INET;
  self.sin_addr.s_addr = htonl(INADDR_ANY);
  self.sin_port = htons(peers_[static_cast<std::size_t>(rank_)].port);
  if (::bind(listener, reinterpret_cast<sockaddr*>(&self), sizeof(self)) != 0 || ::listen(listener, 128) != 0) {
    ::close(listener);
    throw TransportError("cannot listen on port " + std::to_string(peers_[static_cast<std::size_t>(rank_)].port));
  }

  try {
    for (int p = 0; p < rank_; ++p) {
      const sockaddr_in addr = resolve(peers_[static_cast<std::size_t>(p)]);
      int fd = -1;
      while (true) {
        fd = ::socket(AF_INET, SOCK_STREAM, 0);
        if (::connect(fd, reinterpret_cast<const sockaddr*>(&addr), sizeof(addr)) == 0) break;
        ::close(fd);
        if (Clock::now() > deadline) throw TransportError("cannot connect to rank " + std::to_string(p));
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
      }
      tuneSocket(fd);
      const auto hello = static_cast<std::uint32_t>(rank_);
      writeAll(fd, reinterpret_cast<const std::byte*>(&hello), sizeof(hello));
      connections_[static_cast<std::size_t>(p)]->fd = fd;
    }
    for (int accepted = 0; accepted < size() - rank_ - 1; ++accepted) {
      pollfd pfd{listener, POLLIN, 0};
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now()).count();
      if (left <= 0 || ::poll(&pfd, 1, static_cast<int>(left)) <= 0)
        throw TransportError("timed out waiting for higher ranks to connect");
      const int fd = ::accept(listener, nullptr, nullptr);
      if (fd < 0) throw TransportError("accept failed");
      tuneSocket(fd);
      std::uint32_t hello = 0;
      if (!readAll(fd, reinterpret_cast<std::byte*>(&hello), sizeof(hello)) || hello <= static_cast<std::uint32_t>(rank_) ||
          hello >= static_cast<std::uint32_t>(size()) || connections_[hello]->fd >= 0) {
        ::close(fd);
        throw TransportError("bad handshake from connecting peer");
      }
      connections_[hello]->fd = fd;
    }
  } catch (...) {
    ::close(listener);
    for (auto& c : connections_)
      if (c->fd >= 0) ::close(c->fd), c->fd = -1;
    throw;
  }
  ::close(listener);
}

void TcpTransport::send(Envelope envelope) {
  if (envelope.destRank < 0 || envelope.destRank >= size()) throw UsageError("destination rank out of range");
  envelope.srcRank = rank_;
  if (envelope.destRank == rank_) {
    if (isReservedObject(envelope.destObject))
      deliverCollective(std::move(envelope));
    else
      pushData(std::move(envelope));
    return;
  }
  auto& conn = *connections_[static_cast<std::size_t>(envelope.destRank)];
  if (conn.closed) throw TransportError("peer " + std::to_string(envelope.destRank) + " closed its connection");
  const auto frame = encodeFrame(envelope.destObject, envelope.flags, envelope.payload);
  std::lock_guard lock(conn.writeMutex);
  writeAll(conn.fd, frame.data(), frame.size());
}

void TcpTransport::readLoop(int peer) {
  auto& conn = *connections_[static_cast<std::size_t>(peer)];
  std::vector<std::byte> header(kFrameHeaderSize);
  try {
    while (!stopping_) {
      if (!readAll(conn.fd, header.data(), header.size())) break;
      const FrameHeader h = decodeFrameHeader(header);
      Envelope env;
      env.srcRank = peer;
      env.destRank = rank_;
      env.destObject = h.destObject;
      env.flags = h.flags;
      env.payload.resize(h.payloadLength);
      if (h.payloadLength > 0 && !readAll(conn.fd, env.payload.data(), env.payload.size()))
        throw TransportError("connection closed mid-frame");
      if (isReservedObject(env.destObject))
        deliverCollective(std::move(env));
      else
        pushData(std::move(env));
    }
  } catch (const std::exception&) {
    // A failed peer surfaces as a collective timeout or a send error.
  }
  conn.closed = true;
}

void TcpTransport::pushData(Envelope envelope) {
  std::function<void()> notify;
  {
    std::lock_guard lock(dataMutex_);
    data_.push_back(std::move(envelope));
    notify = notify_;
  }
  if (notify) notify();
}

std::optional<Envelope> TcpTransport::poll() {
  std::lock_guard lock(dataMutex_);
  if (data_.empty()) return std::nullopt;
  Envelope env = std::move(data_.front());
  data_.pop_front();
  return env;
}

void TcpTransport::setArrivalNotifier(std::function<void()> notify) {
  std::lock_guard lock(dataMutex_);
  notify_ = std::move(notify);
}

}  // namespace dfb
