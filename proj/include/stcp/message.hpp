// SPDX-License-Identifier: Apache-2.0
//
// Roles, message classes, and the Message value that travels over channels.
//
// Roles and message classes are interned names: equality and ordering are
// integer comparisons, and the human-readable name survives for diagnostics
// and for the session-type text notation.  The table is append-only and
// guarded by a mutex, so interning is safe from any thread.

#pragma once

#include <cstdint>
#include <deque>
#include <mutex>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>

#include "stcp/base.hpp"
#include "stcp/error.hpp"
#include "stcp/wire.hpp"

namespace stcp {

namespace detail {

// Append-only name <-> id table.  std::deque keeps element addresses stable
// across growth, so name_of() can hand out references safely.
class NameTable {
 public:
  std::uint32_t intern(std::string_view name) {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = ids_.find(std::string(name));
    if (it != ids_.end()) return it->second;
    auto id = static_cast<std::uint32_t>(names_.size());
    names_.emplace_back(name);
    ids_.emplace(names_.back(), id);
    return id;
  }

  const std::string& name_of(std::uint32_t id) const {
    std::lock_guard<std::mutex> lock(mu_);
    if (id >= names_.size()) throw std::out_of_range("NameTable: bad id");
    return names_[id];
  }

 private:
  mutable std::mutex mu_;
  std::deque<std::string> names_;
  std::unordered_map<std::string, std::uint32_t> ids_;
};

inline NameTable& role_table() {
  static NameTable table;
  return table;
}

inline NameTable& msg_class_table() {
  static NameTable table;
  return table;
}

}  // namespace detail

// A participant in a session.  A channel always connects exactly two roles.
class Role {
 public:
  static Role named(std::string_view name) {
    return Role(detail::role_table().intern(name));
  }

  const std::string& name() const { return detail::role_table().name_of(id_); }

  friend bool operator==(Role a, Role b) { return a.id_ == b.id_; }
  friend bool operator!=(Role a, Role b) { return a.id_ != b.id_; }
  friend bool operator<(Role a, Role b) { return a.id_ < b.id_; }

 private:
  explicit Role(std::uint32_t id) : id_(id) {}
  std::uint32_t id_;
};

// The class (label) of a message: what an offer matches on and what a select
// announces.  Payload content is carried separately in Message.
class MsgClass {
 public:
  static MsgClass named(std::string_view name) {
    return MsgClass(detail::msg_class_table().intern(name));
  }

  const std::string& name() const {
    return detail::msg_class_table().name_of(id_);
  }

  friend bool operator==(MsgClass a, MsgClass b) { return a.id_ == b.id_; }
  friend bool operator!=(MsgClass a, MsgClass b) { return a.id_ != b.id_; }
  friend bool operator<(MsgClass a, MsgClass b) { return a.id_ < b.id_; }

 private:
  explicit MsgClass(std::uint32_t id) : id_(id) {}
  std::uint32_t id_;
};

// The three fixed roles of the TCP server encoding.  Demos may intern more.
namespace roles {
inline Role server_user() { return Role::named("ServerUser"); }
inline Role server_system() { return Role::named("ServerSystem"); }
inline Role client_system() { return Role::named("ClientSystem"); }
}  // namespace roles

namespace classes {
// User-facing classes.
inline MsgClass open() { return MsgClass::named("Open"); }
inline MsgClass tcb_created() { return MsgClass::named("TcbCreated"); }
inline MsgClass connected() { return MsgClass::named("Connected"); }
inline MsgClass data() { return MsgClass::named("Data"); }
inline MsgClass close() { return MsgClass::named("Close"); }
// Network-facing classes.
inline MsgClass syn() { return MsgClass::named("Syn"); }
inline MsgClass syn_ack() { return MsgClass::named("SynAck"); }
inline MsgClass ack() { return MsgClass::named("Ack"); }
inline MsgClass fin_ack() { return MsgClass::named("FinAck"); }
inline MsgClass rst() { return MsgClass::named("Rst"); }
// Virtual class: synthesized locally when a retransmission deadline expires.
// It never crosses a transport.
inline MsgClass timeout() { return MsgClass::named("Timeout"); }
// Demo classes.
inline MsgClass ping() { return MsgClass::named("Ping"); }
inline MsgClass pong() { return MsgClass::named("Pong"); }
}  // namespace classes

// Classifies an inbound segment by its flags.  Precedence: RST before SYN
// before FIN, anything else is an acknowledgment-class segment (with or
// without payload).  This is the partial decoding half of the message
// contract; the encoding half is checked when a segment is sent under a
// declared class.
inline MsgClass classify_segment(const wire::Segment& seg) {
  if (seg.flags.rst) return classes::rst();
  if (seg.flags.syn) return seg.flags.ack ? classes::syn_ack() : classes::syn();
  if (seg.flags.fin) return classes::fin_ack();
  return classes::ack();
}

// A classified value exchanged over a channel.  User-side messages carry
// either nothing or a byte string; network-side messages carry a parsed
// segment.  The transport encoding (for segments, the wire codec) is applied
// by the channel that moves the message.
struct Message {
  MsgClass cls;
  std::variant<std::monostate, Bytes, wire::Segment> payload;

  static Message unit(MsgClass c) { return Message{c, std::monostate{}}; }
  static Message bytes(MsgClass c, Bytes b) { return Message{c, std::move(b)}; }
  static Message segment(MsgClass c, wire::Segment s) {
    return Message{c, std::move(s)};
  }

  bool is_unit() const {
    return std::holds_alternative<std::monostate>(payload);
  }

  const Bytes& as_bytes() const {
    if (const auto* b = std::get_if<Bytes>(&payload)) return *b;
    throw channel_error("message of class " + cls.name() +
                        " does not carry a byte payload");
  }

  const wire::Segment& as_segment() const {
    if (const auto* s = std::get_if<wire::Segment>(&payload)) return *s;
    throw channel_error("message of class " + cls.name() +
                        " does not carry a segment payload");
  }
};

}  // namespace stcp
