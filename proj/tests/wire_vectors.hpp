// SPDX-License-Identifier: Apache-2.0
// Generated by oracle/make_wire_vectors.py; do not edit by hand.
#pragma once

#include <cstdint>
#include <vector>

namespace wire_vectors {

inline const std::vector<uint8_t> syn = {0x10, 0xe1, 0x00, 0x50, 0x00, 0x00, 0x00, 0x64, 0x00, 0x00, 0x00, 0x00, 0x50, 0x02, 0xfa, 0xf0, 0x8f, 0x5a, 0x00, 0x00};

inline const std::vector<uint8_t> syn_mss_option = {0x10, 0xe1, 0x00, 0x50, 0x00, 0x00, 0x00, 0x64, 0x00, 0x00, 0x00, 0x00, 0x60, 0x02, 0xfa, 0xf0, 0x77, 0x9e, 0x00, 0x00, 0x02, 0x04, 0x05, 0xb4};

inline const std::vector<uint8_t> synack = {0x00, 0x50, 0x10, 0xe1, 0x00, 0x00, 0x01, 0x2c, 0x00, 0x00, 0x00, 0x65, 0x50, 0x12, 0xff, 0xff, 0x89, 0x0e, 0x00, 0x00};

inline const std::vector<uint8_t> handshake_ack = {0x10, 0xe1, 0x00, 0x50, 0x00, 0x00, 0x00, 0x65, 0x00, 0x00, 0x01, 0x2d, 0x50, 0x10, 0xfa, 0xf0, 0x8e, 0x1e, 0x00, 0x00};

inline const std::vector<uint8_t> data_hello = {0x10, 0xe1, 0x00, 0x50, 0x00, 0x00, 0x00, 0x65, 0x00, 0x00, 0x01, 0x2d, 0x50, 0x18, 0xfa, 0xf0, 0x4a, 0x3f, 0x00, 0x00, 0x68, 0x65, 0x6c, 0x6c, 0x6f};

inline const std::vector<uint8_t> finack = {0x10, 0xe1, 0x00, 0x50, 0x00, 0x00, 0x00, 0x6a, 0x00, 0x00, 0x01, 0x2d, 0x50, 0x11, 0xfa, 0xf0, 0x8e, 0x18, 0x00, 0x00};

}  // namespace wire_vectors
