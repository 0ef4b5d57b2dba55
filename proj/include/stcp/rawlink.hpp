// SPDX-License-Identifier: Apache-2.0
//
// Raw-socket segment transport: the same wire codec carried over an
// AF_INET/SOCK_RAW socket, so the server can face a real operating-system
// TCP stack.  Wall-clock timeouts; every permission or address problem is
// surfaced as a startup error with a remediation hint.
//
// Note for interop experiments: the host kernel also sees segments
// addressed to this port and, having no socket of its own there, answers
// them with resets.  Quiet that with a firewall rule dropping outbound RST
// on the chosen port before pointing a real client here.

#pragma once

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstdint>
#include <cstring>
#include <optional>
#include <string>
#include <variant>

#include "stcp/channel.hpp"
#include "stcp/clock.hpp"
#include "stcp/error.hpp"
#include "stcp/wire.hpp"

namespace stcp {

class RawIpTransport final : public SegmentTransport {
 public:
  RawIpTransport(Ipv4Addr local_ip, uint16_t local_port)
      : local_ip_(local_ip), local_port_(local_port) {
    fd_ = ::socket(AF_INET, SOCK_RAW, IPPROTO_TCP);
    if (fd_ < 0) {
      const int err = errno;
      throw config_error(
          std::string("raw socket unavailable: ") + std::strerror(err) +
          "; raw mode needs CAP_NET_RAW (run as root or grant the "
          "capability), or use the simulated backend instead");
    }
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = 0;  // raw sockets carry whole TCP segments, no port here
    std::memcpy(&addr.sin_addr, local_ip.octets.data(), 4);
    if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0) {
      const int err = errno;
      ::close(fd_);
      fd_ = -1;
      throw config_error(std::string("cannot bind raw socket to ") +
                         local_ip.to_string() + ": " + std::strerror(err) +
                         "; pass a local interface address");
    }
  }

  ~RawIpTransport() override { close(); }

  RawIpTransport(const RawIpTransport&) = delete;
  RawIpTransport& operator=(const RawIpTransport&) = delete;

  void send(const wire::Segment& seg, const Ipv4Addr& dst_ip) override {
    const Bytes bytes = wire::encode(seg, local_ip_, dst_ip);
    sockaddr_in dst{};
    dst.sin_family = AF_INET;
    dst.sin_port = 0;
    std::memcpy(&dst.sin_addr, dst_ip.octets.data(), 4);
    const ssize_t n =
        ::sendto(fd_, bytes.data(), bytes.size(), 0,
                 reinterpret_cast<sockaddr*>(&dst), sizeof(dst));
    if (n < 0) {
      throw channel_error(std::string("raw send failed: ") +
                          std::strerror(errno));
    }
  }

  // Receives the next segment addressed to this host and port.  Foreign
  // traffic on the raw socket (other ports, other protocols' echoes,
  // segments that do not decode) is skipped, not an error.
  std::optional<Inbound> recv(Instant deadline) override {
    for (;;) {
      const Instant t = now();
      if (deadline != kNever && t >= deadline) return std::nullopt;
      const int wait_ms =
          deadline == kNever
              ? -1
              : static_cast<int>(std::min<Instant>(deadline - t, 60000));
      pollfd pfd{fd_, POLLIN, 0};
      const int ready = ::poll(&pfd, 1, wait_ms);
      if (ready < 0) {
        if (errno == EINTR) continue;
        throw channel_error(std::string("raw poll failed: ") +
                            std::strerror(errno));
      }
      if (ready == 0) continue;  // re-check the deadline

      uint8_t buf[65536];
      const ssize_t n = ::recvfrom(fd_, buf, sizeof(buf), 0, nullptr, nullptr);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw channel_error(std::string("raw recv failed: ") +
                            std::strerror(errno));
      }
      // Raw IPv4 sockets deliver the IP header; peel it off.
      if (n < 20) continue;
      const std::size_t ihl = static_cast<std::size_t>(buf[0] & 0x0f) * 4;
      if (ihl < 20 || static_cast<std::size_t>(n) < ihl) continue;
      Ipv4Addr src, dst;
      std::memcpy(src.octets.data(), buf + 12, 4);
      std::memcpy(dst.octets.data(), buf + 16, 4);
      if (!(dst == local_ip_)) continue;

      Bytes tcp(buf + ihl, buf + n);
      auto decoded = wire::decode(tcp, src, dst);
      if (std::holds_alternative<wire::DecodeError>(decoded)) continue;
      auto& seg = std::get<wire::Segment>(decoded);
      if (seg.dst_port != local_port_) continue;
      return Inbound{SockAddr{src, seg.src_port},
                     SockAddr{dst, seg.dst_port}, std::move(seg)};
    }
  }

  Instant now() override { return clock_.now(); }

  void close() override {
    if (fd_ >= 0) {
      ::close(fd_);
      fd_ = -1;
    }
  }

 private:
  int fd_ = -1;
  Ipv4Addr local_ip_;
  uint16_t local_port_;
  WallClock clock_;
};

}  // namespace stcp
