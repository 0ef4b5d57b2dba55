// SPDX-License-Identifier: Apache-2.0
//
// Typed channel endpoints between two roles.
//
// A channel endpoint executes offer/select operations: each consumes a
// session token whose node names the endpoint's peer role, moves one message
// across the underlying transport, and returns the continuation token.  Two
// transports exist: an in-process bounded queue pair (user <-> system) and a
// segment pipe over a datagram link plus the wire codec (system <-> network).
//
// Multi-way branching uses the two-arm spine produced by N-ary expansion: an
// offer that resolves to the virtual right side buffers the received message
// in the endpoint, and the next offer on the nested node consumes the buffer
// instead of reading the transport.  A retransmission timeout is delivered
// the same way: when an offer_timed budget expires, a Timeout-class message
// is synthesized locally and routed through the pickers like any other
// message.  It never crosses a transport.

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "stcp/clock.hpp"
#include "stcp/error.hpp"
#include "stcp/exec.hpp"
#include "stcp/link.hpp"
#include "stcp/message.hpp"
#include "stcp/queue.hpp"
#include "stcp/session.hpp"
#include "stcp/wire.hpp"

namespace stcp {

using wire::Ipv4Addr;
using wire::SockAddr;

enum class Side { left, right };

// Decides which branch of a two-arm offer a received message resolves; pure
// and total over decodable messages.  Context (a TCB, an expected sequence
// number) is captured in the closure.
using Picker = std::function<Side(const Message&)>;

// Picks by message class: `left_cls` goes left, everything else goes right.
inline Picker class_picker(MsgClass left_cls) {
  return [left_cls](const Message& m) {
    return m.cls == left_cls ? Side::left : Side::right;
  };
}

// Result of a two-arm offer: which side was taken, the message that decided
// it, and the continuation token.  For a virtual right side the token
// witnesses the nested branching node and the message stays buffered in the
// endpoint for the next offer.
struct Branch {
  Side side;
  Message message;
  SessionToken token;

  bool left() const { return side == Side::left; }
};

// Retransmission budget for offer_timed: absent means block indefinitely,
// and the Timeout branch can never be taken.
struct TimeoutBudget {
  std::optional<std::int64_t> ms;

  static TimeoutBudget none() { return TimeoutBudget{std::nullopt}; }
  static TimeoutBudget of(std::int64_t milliseconds) {
    return TimeoutBudget{milliseconds};
  }
  bool present() const { return ms.has_value(); }
};

// Record of the (direction, class) word a channel endpoint produced; a
// ShapeWalker replays it against the root shape to check session fidelity.
struct TraceLog {
  std::vector<TraceEvent> events;
};

namespace detail {

inline void check_token_peer(const Shape& s, Role self, Role peer,
                             const char* op) {
  if (s.peer() != peer) {
    throw channel_error(std::string(op) + " on the " + self.name() + "<->" +
                        peer.name() + " endpoint, but the token names peer " +
                        s.peer().name() + ": " + summary(s));
  }
}

inline const Shape& expect_kind(const SessionToken& token, bool ok,
                                const char* op) {
  const Shape& s = token.shape();
  if (!ok) throw shape_error(std::string(op) + " on " + summary(s));
  return s;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// User <-> system endpoint: bounded in-process queues.
// ---------------------------------------------------------------------------

inline constexpr std::size_t kUserQueueCapacity = 16;

class UserChannel {
 public:
  UserChannel(Role self, Role peer, std::shared_ptr<MsgQueue<Message>> out,
              std::shared_ptr<MsgQueue<Message>> in)
      : self_(self), peer_(peer), out_(std::move(out)), in_(std::move(in)) {}

  Role self_role() const { return self_; }
  Role peer_role() const { return peer_; }
  Instant now() { return out_->executor().now(); }

  void set_trace(std::shared_ptr<TraceLog> log) { trace_ = std::move(log); }

  SessionToken select_one(SessionToken token, Message msg) {
    const Shape& s = detail::expect_kind(
        token, token.shape().kind() == ShapeKind::select_one, "select_one");
    detail::check_token_peer(s, self_, peer_, "select_one");
    return send_arm(std::move(token), s.left(), std::move(msg));
  }

  SessionToken select_left(SessionToken token, Message msg) {
    const Shape& s = detail::expect_kind(
        token, token.shape().kind() == ShapeKind::select_two, "select_left");
    detail::check_token_peer(s, self_, peer_, "select_left");
    return send_arm(std::move(token), s.left(), std::move(msg));
  }

  SessionToken select_right(SessionToken token, Message msg) {
    const Shape& s = detail::expect_kind(
        token, token.shape().kind() == ShapeKind::select_two, "select_right");
    detail::check_token_peer(s, self_, peer_, "select_right");
    if (s.is_virtual_two()) {
      throw shape_error(
          "select_right on a virtual branching node; descend case by case: " +
          summary(s));
    }
    return send_arm(std::move(token), s.right(), std::move(msg));
  }

  std::pair<Message, SessionToken> offer_one(SessionToken token) {
    const Shape& s = detail::expect_kind(
        token, token.shape().kind() == ShapeKind::offer_one, "offer_one");
    detail::check_token_peer(s, self_, peer_, "offer_one");
    Message m = fetch();
    if (m.cls != s.left().cls) {
      throw protocol_error("received " + m.cls.name() +
                           " but the session expects " + summary(s));
    }
    auto [sp, env] = token.take();
    return {std::move(m), detail::resume(sp->left().next, std::move(env))};
  }

  Branch offer_two(SessionToken token, const Picker& picker) {
    const Shape& s = detail::expect_kind(token, token.shape().is_two() &&
                                                    token.shape().is_offer(),
                                         "offer_two");
    detail::check_token_peer(s, self_, peer_, "offer_two");
    Message m = fetch();
    return finish_offer(std::move(token), std::move(m), picker(m));
  }

  void close(SessionToken&& token);  // defined with the free close() below

  // Releases the endpoint without a token; the free close() uses this to let
  // one End witness release several endpoints.
  void release() {
    if (!out_->closed()) out_->close();
  }

 private:
  Message fetch() {
    if (pending_) {
      Message m = std::move(*pending_);
      pending_.reset();
      return m;
    }
    auto m = in_->recv(kNever);
    if (!m) throw channel_error("user channel receive returned empty");
    record(TraceEvent::Dir::received, m->cls);
    return std::move(*m);
  }

  SessionToken send_arm(SessionToken token, const Arm& arm, Message msg) {
    if (msg.cls != arm.cls) {
      throw shape_error("selecting " + msg.cls.name() +
                        " does not match the arm " + arm.cls.name() + " of " +
                        summary(token.shape()));
    }
    out_->send(msg);
    record(TraceEvent::Dir::sent, msg.cls);
    auto [sp, env] = token.take();
    return detail::resume(arm.next, std::move(env));
  }

  Branch finish_offer(SessionToken token, Message m, Side side) {
    const Shape& s = token.shape();
    if (side == Side::left) {
      if (m.cls != s.left().cls) {
        throw protocol_error("picker chose the left branch for " +
                             m.cls.name() + " but the arm is " +
                             s.left().cls.name() + " in " + summary(s));
      }
      auto [sp, env] = token.take();
      return Branch{Side::left, std::move(m),
                    detail::resume(sp->left().next, std::move(env))};
    }
    if (s.is_virtual_two()) {
      pending_ = m;
      auto [sp, env] = token.take();
      return Branch{Side::right, std::move(m),
                    detail::resume(sp->virtual_rest(), std::move(env))};
    }
    if (m.cls != s.right().cls) {
      throw protocol_error("picker chose the right branch for " +
                           m.cls.name() + " but the arm is " +
                           s.right().cls.name() + " in " + summary(s));
    }
    auto [sp, env] = token.take();
    return Branch{Side::right, std::move(m),
                  detail::resume(sp->right().next, std::move(env))};
  }

  void record(TraceEvent::Dir dir, MsgClass cls) {
    if (trace_) trace_->events.push_back(TraceEvent{dir, peer_, cls});
  }

  Role self_;
  Role peer_;
  std::shared_ptr<MsgQueue<Message>> out_;
  std::shared_ptr<MsgQueue<Message>> in_;
  std::optional<Message> pending_;
  std::shared_ptr<TraceLog> trace_;
};

// Connected pair of user channels over bounded queues (capacity 16 each way).
inline std::pair<UserChannel, UserChannel> user_channel_pair(Executor& ex,
                                                             Role a, Role b) {
  auto a_to_b = std::make_shared<MsgQueue<Message>>(
      ex, a.name() + "->" + b.name(), kUserQueueCapacity);
  auto b_to_a = std::make_shared<MsgQueue<Message>>(
      ex, b.name() + "->" + a.name(), kUserQueueCapacity);
  return {UserChannel(a, b, a_to_b, b_to_a), UserChannel(b, a, b_to_a, a_to_b)};
}

// ---------------------------------------------------------------------------
// System <-> network endpoint: segments over a datagram transport.
// ---------------------------------------------------------------------------

// One received datagram, decoded and attributed.
struct Inbound {
  SockAddr from;
  SockAddr to;
  wire::Segment seg;
};

// Abstract datagram transport for segments.  Implementations encode with the
// wire codec and attribute addresses: the in-memory simulated link here, the
// raw socket backend elsewhere.
class SegmentTransport {
 public:
  virtual ~SegmentTransport() = default;
  virtual void send(const wire::Segment& seg, const Ipv4Addr& dst_ip) = 0;
  // Blocks until a segment arrives or `deadline` passes (nullopt).  Throws
  // protocol_error when bytes arrive that do not decode.
  virtual std::optional<Inbound> recv(Instant deadline) = 0;
  virtual Instant now() = 0;
  virtual void close() {}
};

// Segment transport over the in-memory fault-injecting link.  The link is
// point to point, so both hosts' addresses are fixed at construction.
class SimSegmentTransport final : public SegmentTransport {
 public:
  SimSegmentTransport(LinkEndpoint link, Ipv4Addr local_ip, Ipv4Addr peer_ip)
      : link_(std::move(link)), local_ip_(local_ip), peer_ip_(peer_ip) {}

  void send(const wire::Segment& seg, const Ipv4Addr& dst_ip) override {
    link_.send(wire::encode(seg, local_ip_, dst_ip));
  }

  std::optional<Inbound> recv(Instant deadline) override {
    auto bytes = link_.recv(deadline);
    if (!bytes) return std::nullopt;
    auto decoded = wire::decode(*bytes, peer_ip_, local_ip_);
    if (const auto* err = std::get_if<wire::DecodeError>(&decoded)) {
      throw protocol_error(std::string("inbound datagram does not decode: ") +
                           wire::to_string(*err));
    }
    auto& seg = std::get<wire::Segment>(decoded);
    return Inbound{SockAddr{peer_ip_, seg.src_port},
                   SockAddr{local_ip_, seg.dst_port}, std::move(seg)};
  }

  Instant now() override { return link_.now(); }

 private:
  LinkEndpoint link_;
  Ipv4Addr local_ip_;
  Ipv4Addr peer_ip_;
};

class NetChannel {
 public:
  NetChannel(Role self, Role peer, std::unique_ptr<SegmentTransport> transport)
      : self_(self), peer_(peer), transport_(std::move(transport)) {}

  Role self_role() const { return self_; }
  Role peer_role() const { return peer_; }
  Instant now() { return transport_->now(); }

  void set_trace(std::shared_ptr<TraceLog> log) { trace_ = std::move(log); }

  // Where selects are delivered; set from the accepted connection's peer
  // address (the source of the SYN under passive open).
  void set_remote(const SockAddr& remote) { remote_ = remote; }
  const std::optional<SockAddr>& remote() const { return remote_; }

  SessionToken select_one(SessionToken token, Message msg) {
    const Shape& s = detail::expect_kind(
        token, token.shape().kind() == ShapeKind::select_one, "select_one");
    detail::check_token_peer(s, self_, peer_, "select_one");
    return send_arm(std::move(token), s.left(), std::move(msg));
  }

  SessionToken select_left(SessionToken token, Message msg) {
    const Shape& s = detail::expect_kind(
        token, token.shape().kind() == ShapeKind::select_two, "select_left");
    detail::check_token_peer(s, self_, peer_, "select_left");
    return send_arm(std::move(token), s.left(), std::move(msg));
  }

  SessionToken select_right(SessionToken token, Message msg) {
    const Shape& s = detail::expect_kind(
        token, token.shape().kind() == ShapeKind::select_two, "select_right");
    detail::check_token_peer(s, self_, peer_, "select_right");
    if (s.is_virtual_two()) {
      throw shape_error(
          "select_right on a virtual branching node; descend case by case: " +
          summary(s));
    }
    return send_arm(std::move(token), s.right(), std::move(msg));
  }

  std::pair<Message, SessionToken> offer_one(SessionToken token) {
    const Shape& s = detail::expect_kind(
        token, token.shape().kind() == ShapeKind::offer_one, "offer_one");
    detail::check_token_peer(s, self_, peer_, "offer_one");
    Message m = *fetch(kNever, {}, nullptr);
    check_offer_one_class(m, s);
    auto [sp, env] = token.take();
    return {std::move(m), detail::resume(sp->left().next, std::move(env))};
  }

  // Listen-state receive: segments not addressed to `local` are discarded;
  // the first matching one is returned with its source address.
  std::tuple<SockAddr, Message, SessionToken> offer_one_with_addr(
      SessionToken token, const SockAddr& local) {
    const Shape& s = detail::expect_kind(
        token, token.shape().kind() == ShapeKind::offer_one,
        "offer_one_with_addr");
    detail::check_token_peer(s, self_, peer_, "offer_one_with_addr");
    auto keep = [&local](const Inbound& in) { return in.to == local; };
    SockAddr from{};
    Message m = *fetch(kNever, keep, &from);
    check_offer_one_class(m, s);
    auto [sp, env] = token.take();
    return {from, std::move(m),
            detail::resume(sp->left().next, std::move(env))};
  }

  Branch offer_two(SessionToken token, const Picker& picker) {
    const Shape& s = detail::expect_kind(token, token.shape().is_two() &&
                                                    token.shape().is_offer(),
                                         "offer_two");
    detail::check_token_peer(s, self_, peer_, "offer_two");
    Message m = *fetch(kNever, {}, nullptr);
    return finish_offer(std::move(token), std::move(m), picker(m));
  }

  // Connected receive: segments from any other 4-tuple are discarded before
  // the picker runs.
  Branch offer_two_filtered(SessionToken token, const Picker& picker,
                            const SockAddr& local, const SockAddr& remote) {
    const Shape& s = detail::expect_kind(
        token, token.shape().is_two() && token.shape().is_offer(),
        "offer_two_filtered");
    detail::check_token_peer(s, self_, peer_, "offer_two_filtered");
    auto keep = [&](const Inbound& in) {
      return in.to == local && in.from == remote;
    };
    Message m = *fetch(kNever, keep, nullptr);
    return finish_offer(std::move(token), std::move(m), picker(m));
  }

  // As offer_two_filtered, but if the budget expires first a Timeout-class
  // message is synthesized locally (nothing is read from the transport) and
  // routed through the picker like any received message.  An absent budget
  // blocks indefinitely: the Timeout branch cannot be taken.
  Branch offer_timed(SessionToken token, const Picker& picker,
                     const TimeoutBudget& budget, const SockAddr& local,
                     const SockAddr& remote) {
    const Shape& s = detail::expect_kind(token, token.shape().is_two() &&
                                                    token.shape().is_offer(),
                                         "offer_timed");
    detail::check_token_peer(s, self_, peer_, "offer_timed");
    Instant deadline = budget.present() ? now() + *budget.ms : kNever;
    auto keep = [&](const Inbound& in) {
      return in.to == local && in.from == remote;
    };
    std::optional<Message> m = fetch(deadline, keep, nullptr);
    if (!m) {
      m = Message::unit(classes::timeout());
      record(TraceEvent::Dir::received, m->cls);
    }
    return finish_offer(std::move(token), std::move(*m), picker(*m));
  }

  void close(SessionToken&& token);  // defined with the free close() below

  void release() { transport_->close(); }

 private:
  void check_offer_one_class(const Message& m, const Shape& s) {
    if (m.cls != s.left().cls) {
      throw protocol_error("received " + m.cls.name() +
                           " but the session expects " + summary(s));
    }
  }

  // Returns the buffered message if one is pending; otherwise reads the
  // transport, discarding datagrams the filter rejects, until a message
  // arrives (recorded in the trace) or the deadline passes (nullopt).
  std::optional<Message> fetch(
      Instant deadline, const std::function<bool(const Inbound&)>& keep,
      SockAddr* from_out) {
    if (pending_) {
      Message m = std::move(*pending_);
      pending_.reset();
      if (from_out) *from_out = pending_from_;
      return m;
    }
    for (;;) {
      auto in = transport_->recv(deadline);
      if (!in) return std::nullopt;
      if (keep && !keep(*in)) continue;  // never reaches a picker
      MsgClass cls = classify_segment(in->seg);
      record(TraceEvent::Dir::received, cls);
      if (from_out) *from_out = in->from;
      pending_from_ = in->from;
      return Message::segment(cls, std::move(in->seg));
    }
  }

  SessionToken send_arm(SessionToken token, const Arm& arm, Message msg) {
    if (msg.cls != arm.cls) {
      throw shape_error("selecting " + msg.cls.name() +
                        " does not match the arm " + arm.cls.name() + " of " +
                        summary(token.shape()));
    }
    const wire::Segment& seg = msg.as_segment();
    if (classify_segment(seg) != msg.cls) {
      throw channel_error("segment [" + seg.summary() +
                          "] does not encode message class " +
                          msg.cls.name());
    }
    if (!remote_) {
      throw channel_error(
          "network endpoint has no remote address; set_remote() first");
    }
    transport_->send(seg, remote_->ip);
    record(TraceEvent::Dir::sent, msg.cls);
    auto [sp, env] = token.take();
    return detail::resume(arm.next, std::move(env));
  }

  Branch finish_offer(SessionToken token, Message m, Side side) {
    const Shape& s = token.shape();
    if (side == Side::left) {
      if (m.cls != s.left().cls) {
        throw protocol_error("picker chose the left branch for " +
                             m.cls.name() + " but the arm is " +
                             s.left().cls.name() + " in " + summary(s));
      }
      auto [sp, env] = token.take();
      return Branch{Side::left, std::move(m),
                    detail::resume(sp->left().next, std::move(env))};
    }
    if (s.is_virtual_two()) {
      pending_ = m;
      auto [sp, env] = token.take();
      return Branch{Side::right, std::move(m),
                    detail::resume(sp->virtual_rest(), std::move(env))};
    }
    if (m.cls != s.right().cls) {
      throw protocol_error("picker chose the right branch for " +
                           m.cls.name() + " but the arm is " +
                           s.right().cls.name() + " in " + summary(s));
    }
    auto [sp, env] = token.take();
    return Branch{Side::right, std::move(m),
                  detail::resume(sp->right().next, std::move(env))};
  }

  void record(TraceEvent::Dir dir, MsgClass cls) {
    if (trace_) trace_->events.push_back(TraceEvent{dir, peer_, cls});
  }

  Role self_;
  Role peer_;
  std::unique_ptr<SegmentTransport> transport_;
  std::optional<SockAddr> remote_;
  std::optional<Message> pending_;
  SockAddr pending_from_{};
  std::shared_ptr<TraceLog> trace_;
};

// ---------------------------------------------------------------------------
// Closing
// ---------------------------------------------------------------------------

// Closes one or more endpoints with a single End witness; the token is
// consumed, so a second close with the same token is a linearity violation.
template <class... Chans>
void close(SessionToken&& token, Chans&... chans) {
  const Shape& s = token.shape();
  if (s.kind() != ShapeKind::end)
    throw shape_error("close on " + summary(s));
  (void)token.take();
  (chans.release(), ...);
}

inline void UserChannel::close(SessionToken&& token) {
  stcp::close(std::move(token), *this);
}

inline void NetChannel::close(SessionToken&& token) {
  stcp::close(std::move(token), *this);
}

}  // namespace stcp
