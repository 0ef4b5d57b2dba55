#!/usr/bin/env python3
"""Builds reference TCP segment byte vectors independently of the C++ codec.

Regenerates tests/wire_vectors.hpp. The header layout and checksum follow
RFC 9293 directly: 20-byte header (plus options), big-endian fields, and a
16-bit one's-complement checksum over pseudo-header + header + padded
payload.
"""

import struct

def carry_fold(total):
    while total >> 16:
        total = (total & 0xFFFF) + (total >> 16)
    return total

def checksum(data):
    if len(data) % 2:
        data += b"\x00"
    total = 0
    for i in range(0, len(data), 2):
        total += (data[i] << 8) | data[i + 1]
    return (~carry_fold(total)) & 0xFFFF

def segment(src_ip, dst_ip, sport, dport, seq, ack, flags, window,
            payload=b"", options=b"", urgent=0):
    assert len(options) % 4 == 0
    data_offset = 5 + len(options) // 4
    hdr = struct.pack(">HHIIBBHHH", sport, dport, seq, ack,
                      data_offset << 4, flags, window, 0, urgent)
    body = hdr + options + payload
    pseudo = struct.pack(">4s4sBBH", bytes(src_ip), bytes(dst_ip), 0, 6,
                         len(body))
    csum = checksum(pseudo + body)
    hdr = struct.pack(">HHIIBBHHH", sport, dport, seq, ack,
                      data_offset << 4, flags, window, csum, urgent)
    return hdr + options + payload

FIN, SYN, RST, PSH, ACK, URG = 0x01, 0x02, 0x04, 0x08, 0x10, 0x20

CLIENT = [10, 0, 0, 2]
SERVER = [10, 0, 0, 1]

VECTORS = [
    # (name, src_ip, dst_ip, bytes)
    ("syn", CLIENT, SERVER,
     segment(CLIENT, SERVER, 4321, 80, 100, 0, SYN, 64240)),
    ("syn_mss_option", CLIENT, SERVER,
     segment(CLIENT, SERVER, 4321, 80, 100, 0, SYN, 64240,
             options=bytes([2, 4, 0x05, 0xB4]))),
    ("synack", SERVER, CLIENT,
     segment(SERVER, CLIENT, 80, 4321, 300, 101, SYN | ACK, 65535)),
    ("handshake_ack", CLIENT, SERVER,
     segment(CLIENT, SERVER, 4321, 80, 101, 301, ACK, 64240)),
    ("data_hello", CLIENT, SERVER,
     segment(CLIENT, SERVER, 4321, 80, 101, 301, PSH | ACK, 64240,
             payload=b"hello")),
    ("finack", CLIENT, SERVER,
     segment(CLIENT, SERVER, 4321, 80, 106, 301, FIN | ACK, 64240)),
]

def main():
    lines = []
    lines.append("// SPDX-License-Identifier: Apache-2.0")
    lines.append("// Generated by oracle/make_wire_vectors.py; do not edit by hand.")
    lines.append("#pragma once")
    lines.append("")
    lines.append("#include <cstdint>")
    lines.append("#include <vector>")
    lines.append("")
    lines.append("namespace wire_vectors {")
    lines.append("")
    for name, src, dst, raw in VECTORS:
        octets = ", ".join(f"0x{b:02x}" for b in raw)
        lines.append(f"inline const std::vector<uint8_t> {name} = {{{octets}}};")
        lines.append("")
    lines.append("}  // namespace wire_vectors")
    with open("../wire_vectors.hpp", "w") as f:
        f.write("\n".join(lines) + "\n")
    for name, src, dst, raw in VECTORS:
        print(f"{name}: {len(raw)} bytes, checksum=0x{raw[16]:02x}{raw[17]:02x}")

if __name__ == "__main__":
    main()
