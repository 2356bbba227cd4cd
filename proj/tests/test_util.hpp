#pragma once

#include "dfb/tcp_transport.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace dfb::testing {

// Ports the kernel hands out for ephemeral binds. Held open together so
// they are distinct, then released for the caller to reuse.
inline std::vector<std::uint16_t> freePorts(int n) {
  std::vector<int> fds;
  std::vector<std::uint16_t> ports;
  for (int i = 0; i < n; ++i) {
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = 0;
    if (fd < 0 || ::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0)
      throw std::runtime_error("cannot reserve a port");
    socklen_t len = sizeof(addr);
    ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
    ports.push_back(ntohs(addr.sin_port));
    fds.push_back(fd);
  }
  for (int fd : fds) ::close(fd);
  return ports;
}

inline std::vector<PeerAddress> localPeers(int n) {
  std::vector<PeerAddress> peers;
  const auto ports = freePorts(n);
  for (int r = 0; r < n; ++r) peers.push_back({r, "127.0.0.1", ports[static_cast<std::size_t>(r)]});
  return peers;
}

inline void writeManifest(const std::string& path, const std::vector<PeerAddress>& peers) {
  std::ofstream out(path);
  for (const auto& p : peers) out << p.rank << ' ' << p.host << ':' << p.port << '\n';
}

}  // namespace dfb::testing
