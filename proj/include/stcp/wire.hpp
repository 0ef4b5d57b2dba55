// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>

#include "stcp/base.hpp"

// TCP segment wire format over IPv4: RFC 9293 header layout, big-endian,
// with the pseudo-header checksum. Options are accepted on decode and
// dropped; encode never emits them.

namespace stcp::wire {

struct Ipv4Addr {
  std::array<uint8_t, 4> octets{};

  friend bool operator==(const Ipv4Addr&, const Ipv4Addr&) = default;

  static std::optional<Ipv4Addr> parse(std::string_view text) {
    Ipv4Addr out;
    int part = 0, value = -1;
    for (char c : text) {
      if (c >= '0' && c <= '9') {
        value = (value < 0 ? 0 : value * 10) + (c - '0');
        if (value > 255) return std::nullopt;
      } else if (c == '.') {
        if (value < 0 || part >= 3) return std::nullopt;
        out.octets[part++] = static_cast<uint8_t>(value);
        value = -1;
      } else {
        return std::nullopt;
      }
    }
    if (part != 3 || value < 0) return std::nullopt;
    out.octets[3] = static_cast<uint8_t>(value);
    return out;
  }

  std::string to_string() const {
    return std::to_string(octets[0]) + "." + std::to_string(octets[1]) + "." +
           std::to_string(octets[2]) + "." + std::to_string(octets[3]);
  }
};

struct SockAddr {
  Ipv4Addr ip;
  uint16_t port = 0;

  friend bool operator==(const SockAddr&, const SockAddr&) = default;

  std::string to_string() const {
    return ip.to_string() + ":" + std::to_string(port);
  }
};

struct Flags {
  bool syn = false;
  bool ack = false;
  bool fin = false;
  bool rst = false;
  bool psh = false;
  bool urg = false;

  friend bool operator==(const Flags&, const Flags&) = default;

  uint8_t to_byte() const {
    return static_cast<uint8_t>((fin ? 0x01 : 0) | (syn ? 0x02 : 0) |
                                (rst ? 0x04 : 0) | (psh ? 0x08 : 0) |
                                (ack ? 0x10 : 0) | (urg ? 0x20 : 0));
  }

  static Flags from_byte(uint8_t b) {
    Flags f;
    f.fin = b & 0x01;
    f.syn = b & 0x02;
    f.rst = b & 0x04;
    f.psh = b & 0x08;
    f.ack = b & 0x10;
    f.urg = b & 0x20;
    return f;
  }

  // Canonical order SYN,ACK,FIN,RST,PSH,URG; "-" when empty.
  std::string to_string() const {
    std::string out;
    auto add = [&](bool on, const char* name) {
      if (!on) return;
      if (!out.empty()) out.push_back(',');
      out += name;
    };
    add(syn, "SYN");
    add(ack, "ACK");
    add(fin, "FIN");
    add(rst, "RST");
    add(psh, "PSH");
    add(urg, "URG");
    return out.empty() ? "-" : out;
  }
};

struct Segment {
  uint16_t src_port = 0;
  uint16_t dst_port = 0;
  uint32_t seq = 0;
  uint32_t ack = 0;
  uint8_t data_offset = 5;  // 32-bit words; always 5 on encode
  Flags flags;
  uint16_t window = 0;
  uint16_t checksum = 0;  // filled by encode, verified by decode
  uint16_t urgent = 0;
  Bytes payload;

  friend bool operator==(const Segment&, const Segment&) = default;

  // Sequence-space length: payload octets plus one for SYN and one for FIN.
  uint32_t seq_len() const {
    return static_cast<uint32_t>(payload.size()) + (flags.syn ? 1 : 0) +
           (flags.fin ? 1 : 0);
  }

  std::string summary() const {
    return "flags=" + flags.to_string() + " seq=" + std::to_string(seq) +
           " ack=" + std::to_string(ack) + " len=" +
           std::to_string(payload.size()) + " win=" + std::to_string(window);
  }
};

struct PseudoHeader {
  Ipv4Addr src;
  Ipv4Addr dst;
  // protocol is fixed at 6
  uint16_t tcp_length = 0;
};

constexpr size_t kHeaderBytes = 20;
constexpr size_t kMaxSegmentBytes = 65535;

enum class DecodeError {
  short_buffer,
  bad_data_offset,
  checksum_mismatch,
};

inline const char* to_string(DecodeError e) {
  switch (e) {
    case DecodeError::short_buffer: return "short buffer";
    case DecodeError::bad_data_offset: return "bad data offset";
    case DecodeError::checksum_mismatch: return "checksum mismatch";
  }
  return "?";
}

namespace detail {

inline void put16(Bytes& b, uint16_t v) {
  b.push_back(static_cast<uint8_t>(v >> 8));
  b.push_back(static_cast<uint8_t>(v & 0xff));
}

inline void put32(Bytes& b, uint32_t v) {
  b.push_back(static_cast<uint8_t>(v >> 24));
  b.push_back(static_cast<uint8_t>((v >> 16) & 0xff));
  b.push_back(static_cast<uint8_t>((v >> 8) & 0xff));
  b.push_back(static_cast<uint8_t>(v & 0xff));
}

inline uint16_t get16(const Bytes& b, size_t off) {
  return static_cast<uint16_t>((b[off] << 8) | b[off + 1]);
}

inline uint32_t get32(const Bytes& b, size_t off) {
  return (static_cast<uint32_t>(b[off]) << 24) |
         (static_cast<uint32_t>(b[off + 1]) << 16) |
         (static_cast<uint32_t>(b[off + 2]) << 8) |
         static_cast<uint32_t>(b[off + 3]);
}

inline Bytes pseudo_bytes(const PseudoHeader& p) {
  Bytes b;
  b.reserve(12);
  b.insert(b.end(), p.src.octets.begin(), p.src.octets.end());
  b.insert(b.end(), p.dst.octets.begin(), p.dst.octets.end());
  b.push_back(0);
  b.push_back(6);
  put16(b, p.tcp_length);
  return b;
}

}  // namespace detail

// One's-complement sum over 16-bit big-endian words; odd lengths are
// zero-padded. Carries folded back in.
inline uint16_t ones_sum(const Bytes& data, uint32_t start = 0) {
  uint32_t total = start;
  size_t i = 0;
  for (; i + 1 < data.size(); i += 2) {
    total += static_cast<uint32_t>((data[i] << 8) | data[i + 1]);
  }
  if (i < data.size()) total += static_cast<uint32_t>(data[i] << 8);
  while (total >> 16) total = (total & 0xffff) + (total >> 16);
  return static_cast<uint16_t>(total);
}

inline uint16_t checksum(const PseudoHeader& pseudo, const Bytes& tcp_bytes) {
  uint16_t sum = ones_sum(detail::pseudo_bytes(pseudo));
  sum = ones_sum(tcp_bytes, sum);
  return static_cast<uint16_t>(~sum);
}

// Sum of pseudo-header plus segment bytes with the transmitted checksum in
// place; folds to 0xffff for an intact segment.
inline uint16_t fold_with_checksum(const PseudoHeader& pseudo,
                                   const Bytes& tcp_bytes) {
  uint16_t sum = ones_sum(detail::pseudo_bytes(pseudo));
  return ones_sum(tcp_bytes, sum);
}

// Encodes with a freshly computed checksum; never emits options.
// Throws std::length_error when header + payload exceeds the 16-bit
// tcp_length field.
inline Bytes encode(const Segment& seg, const Ipv4Addr& src_ip,
                    const Ipv4Addr& dst_ip) {
  const size_t total = kHeaderBytes + seg.payload.size();
  if (total > kMaxSegmentBytes) {
    throw std::length_error("tcp segment payload too long: " +
                            std::to_string(seg.payload.size()));
  }
  Bytes out;
  out.reserve(total);
  detail::put16(out, seg.src_port);
  detail::put16(out, seg.dst_port);
  detail::put32(out, seg.seq);
  detail::put32(out, seg.ack);
  out.push_back(5 << 4);
  out.push_back(seg.flags.to_byte());
  detail::put16(out, seg.window);
  detail::put16(out, 0);  // checksum placeholder
  detail::put16(out, seg.urgent);
  out.insert(out.end(), seg.payload.begin(), seg.payload.end());

  PseudoHeader pseudo{src_ip, dst_ip, static_cast<uint16_t>(total)};
  const uint16_t csum = checksum(pseudo, out);
  out[16] = static_cast<uint8_t>(csum >> 8);
  out[17] = static_cast<uint8_t>(csum & 0xff);
  return out;
}

// Decodes and verifies the checksum. Options (data_offset > 5) are
// skipped and dropped; the returned segment is normalized to offset 5.
inline std::variant<Segment, DecodeError> decode(const Bytes& bytes,
                                                 const Ipv4Addr& src_ip,
                                                 const Ipv4Addr& dst_ip) {
  if (bytes.size() < kHeaderBytes) return DecodeError::short_buffer;
  const uint8_t offset_words = bytes[12] >> 4;
  if (offset_words < 5) return DecodeError::bad_data_offset;
  const size_t header_len = static_cast<size_t>(offset_words) * 4;
  if (bytes.size() < header_len) return DecodeError::bad_data_offset;

  PseudoHeader pseudo{src_ip, dst_ip, static_cast<uint16_t>(bytes.size())};
  if (fold_with_checksum(pseudo, bytes) != 0xffff) {
    return DecodeError::checksum_mismatch;
  }

  Segment seg;
  seg.src_port = detail::get16(bytes, 0);
  seg.dst_port = detail::get16(bytes, 2);
  seg.seq = detail::get32(bytes, 4);
  seg.ack = detail::get32(bytes, 8);
  seg.data_offset = 5;
  seg.flags = Flags::from_byte(bytes[13]);
  seg.window = detail::get16(bytes, 14);
  seg.checksum = detail::get16(bytes, 16);
  seg.urgent = detail::get16(bytes, 18);
  seg.payload.assign(bytes.begin() + header_len, bytes.end());
  return seg;
}

}  // namespace stcp::wire
