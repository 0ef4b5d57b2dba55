// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <deque>
#include <optional>
#include <string>
#include <tuple>
#include <utility>

#include "stcp/base.hpp"
#include "stcp/error.hpp"
#include "stcp/seqnum.hpp"
#include "stcp/wire.hpp"

// The TCP protocol core for a passive-open server: TCB state, segment
// acceptability, reactions, and the retransmission queue. Everything here
// is a pure function of its inputs — no clocks, no sockets — so runs are
// reproducible and the state machine can be driven from tests, from the
// deterministic simulator, or from a raw socket alike.
//
// Scope: Closed, Listen, SynRcvd, Established, FinWait1, FinWait2,
// CloseWait and LastAck. Active open, simultaneous open/close, congestion
// control, adaptive RTO, urgent data and option emission are out of scope.
// Out-of-order in-window data is not cached: it is classified unacceptable
// and answered with a duplicate ACK, which the sender's retransmission
// repairs.

namespace stcp::tcp {

enum class State {
  Closed,
  Listen,
  SynRcvd,
  Established,
  FinWait1,
  FinWait2,
  CloseWait,
  LastAck,
  // Label for the quiet period after the final ACK of the peer's FIN.  The
  // pure machine never enters it (its close steps return Closed directly);
  // the driver holds this state while it re-acknowledges retransmitted FINs.
  TimeWait,
};

inline const char* to_string(State s) {
  switch (s) {
    case State::Closed: return "Closed";
    case State::Listen: return "Listen";
    case State::SynRcvd: return "SynRcvd";
    case State::Established: return "Established";
    case State::FinWait1: return "FinWait1";
    case State::FinWait2: return "FinWait2";
    case State::CloseWait: return "CloseWait";
    case State::LastAck: return "LastAck";
    case State::TimeWait: return "TimeWait";
  }
  return "?";
}

// The receive window must fit the 16-bit header field, so the "64 KiB"
// default is the largest representable value.
constexpr uint32_t kDefaultRcvWnd = 65535;
constexpr uint32_t kDefaultMss = 1460;

// Core four-case acceptability test on (seq, length, rcv_nxt, window),
// templated so tests can brute-force a narrow ring exhaustively.
template <std::unsigned_integral U>
constexpr bool window_acceptable(U seq, U len, U rcv_nxt, U wnd) {
  const U wnd_end = static_cast<U>(rcv_nxt + wnd);
  if (len == 0 && wnd == 0) return seq == rcv_nxt;
  if (len == 0) return seq_between(rcv_nxt, seq, wnd_end);
  if (wnd == 0) return false;
  const U last = static_cast<U>(seq + len - 1);
  return seq_between(rcv_nxt, seq, wnd_end) ||
         seq_between(rcv_nxt, last, wnd_end);
}

// Segments awaiting acknowledgement, oldest first. Entries are stored
// whole: a partial ACK advances snd_una but keeps the covering entry
// queued, so a retransmission resends the entire original segment.
class RetransmissionQueue {
 public:
  void push(wire::Segment seg) { entries_.push_back(std::move(seg)); }

  bool empty() const { return entries_.empty(); }
  size_t size() const { return entries_.size(); }

  const wire::Segment& head() const {
    if (entries_.empty()) {
      throw state_error("retransmission queue is empty");
    }
    return entries_.front();
  }

  // Drops every entry whose last sequence number is covered by `ack`.
  void trim_acked(seq32 ack) {
    while (!entries_.empty()) {
      const wire::Segment& e = entries_.front();
      const seq32 end = e.seq + e.seq_len();
      if (!seq_lte(end, ack)) break;
      entries_.pop_front();
    }
  }

  // First sequence number still queued (valid only when non-empty).
  seq32 head_seq() const { return head().seq; }

 private:
  std::deque<wire::Segment> entries_;
};

struct Tcb {
  State state = State::Closed;
  wire::SockAddr local_addr;
  wire::SockAddr remote_addr;
  seq32 iss = 0;
  seq32 irs = 0;
  seq32 snd_una = 0;
  seq32 snd_nxt = 0;
  seq32 rcv_nxt = 0;
  uint32_t snd_wnd = 0;
  uint32_t rcv_wnd = kDefaultRcvWnd;
  uint32_t mss = kDefaultMss;
  RetransmissionQueue rtx;
};

inline bool seg_acceptable(const Tcb& tcb, const wire::Segment& seg) {
  return window_acceptable<seq32>(seg.seq, seg.seq_len(), tcb.rcv_nxt,
                                  tcb.rcv_wnd);
}

// A reply with current send/receive state and no payload: the data
// acknowledgement, and also the challenge sent for unacceptable segments.
// Never enqueued for retransmission (it occupies no sequence space).
inline wire::Segment build_empty_ack(const Tcb& tcb) {
  wire::Segment seg;
  seg.src_port = tcb.local_addr.port;
  seg.dst_port = tcb.remote_addr.port;
  seg.seq = tcb.snd_nxt;
  seg.ack = tcb.rcv_nxt;
  seg.flags.ack = true;
  seg.window = static_cast<uint16_t>(tcb.rcv_wnd);
  return seg;
}

// --- Listen -----------------------------------------------------------

inline Tcb open(const Tcb& closed, const wire::SockAddr& local) {
  if (closed.state != State::Closed) {
    throw state_error(std::string("open: TCB is ") + to_string(closed.state));
  }
  Tcb tcb = closed;
  tcb.state = State::Listen;
  tcb.local_addr = local;
  return tcb;
}

inline Tcb open(const wire::SockAddr& local) { return open(Tcb{}, local); }

// Handles the first segment of the three-way handshake. `iss` is injected
// by the caller so runs stay reproducible. Non-SYN (or SYN+ACK) segments
// are discarded without a state change.
inline std::optional<std::pair<Tcb, wire::Segment>> recv_syn(
    const Tcb& listen, const wire::SockAddr& peer, const wire::Segment& syn,
    seq32 iss) {
  if (listen.state != State::Listen) {
    throw state_error(std::string("recv_syn: TCB is ") +
                      to_string(listen.state));
  }
  if (!syn.flags.syn || syn.flags.ack || syn.flags.rst || syn.flags.fin) {
    return std::nullopt;
  }

  Tcb tcb = listen;
  tcb.state = State::SynRcvd;
  tcb.remote_addr = peer;
  tcb.irs = syn.seq;
  tcb.rcv_nxt = syn.seq + 1;  // any SYN payload is ignored in this subset
  tcb.iss = iss;
  tcb.snd_una = iss;
  tcb.snd_nxt = iss + 1;
  tcb.snd_wnd = syn.window;

  wire::Segment synack;
  synack.src_port = tcb.local_addr.port;
  synack.dst_port = tcb.remote_addr.port;
  synack.seq = tcb.iss;
  synack.ack = tcb.rcv_nxt;
  synack.flags.syn = true;
  synack.flags.ack = true;
  synack.window = static_cast<uint16_t>(tcb.rcv_wnd);
  tcb.rtx.push(synack);
  return std::make_pair(std::move(tcb), std::move(synack));
}

// --- Common send-side bookkeeping --------------------------------------

// Applies an acceptable cumulative ACK: advances snd_una, trims the
// retransmission queue, and adopts the advertised window. An ACK outside
// [snd_una, snd_nxt] is a duplicate or stale ACK and changes nothing.
inline Tcb ack_update(const Tcb& tcb, const wire::Segment& seg) {
  if (!seg.flags.ack) return tcb;
  if (!seq_between(tcb.snd_una, seg.ack, tcb.snd_nxt + 1)) return tcb;
  Tcb out = tcb;
  out.snd_una = seq_max(tcb.snd_una, seg.ack);
  out.snd_wnd = seg.window;
  out.rtx.trim_acked(out.snd_una);
  return out;
}

// --- SynRcvd ------------------------------------------------------------

struct Reaction {
  enum class Kind { acceptable, not_acceptable, reset };
  Kind kind = Kind::not_acceptable;
  Tcb tcb;
  std::optional<wire::Segment> response;
};

// Total reaction to any decoded segment while in SynRcvd.
//
// The handshake-completing ACK must be empty: a payload piggybacked on the
// first ACK is outside this subset and is challenged instead of accepted.
// A SYN at a new sequence number inside our window means the peer forgot
// this connection (a half-open restart); that tears the TCB down with an
// outbound RST built from the offending segment's ACK field.
inline Reaction synrcvd_recv_ack(const Tcb& tcb, const wire::Segment& seg) {
  if (tcb.state != State::SynRcvd) {
    throw state_error(std::string("synrcvd_recv_ack: TCB is ") +
                      to_string(tcb.state));
  }

  const bool in_window = seg_acceptable(tcb, seg);
  if (!in_window) {
    return {Reaction::Kind::not_acceptable, tcb, build_empty_ack(tcb)};
  }
  if (seg.flags.rst) {
    Tcb closed = tcb;
    closed.state = State::Closed;
    return {Reaction::Kind::reset, std::move(closed), std::nullopt};
  }
  if (seg.flags.syn) {
    // In-window SYN at a fresh sequence number: half-open peer restart.
    wire::Segment rst;
    rst.src_port = tcb.local_addr.port;
    rst.dst_port = tcb.remote_addr.port;
    rst.seq = seg.ack;
    rst.flags.rst = true;
    Tcb closed = tcb;
    closed.state = State::Closed;
    return {Reaction::Kind::reset, std::move(closed), std::move(rst)};
  }
  if (!seg.flags.ack || seg.ack != tcb.snd_nxt || !seg.payload.empty() ||
      seg.flags.fin) {
    return {Reaction::Kind::not_acceptable, tcb, build_empty_ack(tcb)};
  }

  Tcb estab = ack_update(tcb, seg);
  estab.state = State::Established;
  return {Reaction::Kind::acceptable, std::move(estab), std::nullopt};
}

// --- Established --------------------------------------------------------

enum class EstabClass {
  acceptable_with_payload,
  acceptable_empty,
  fin_ack,
  unacceptable,
};

inline const char* to_string(EstabClass c) {
  switch (c) {
    case EstabClass::acceptable_with_payload: return "AcceptableWithPayload";
    case EstabClass::acceptable_empty: return "AcceptableEmpty";
    case EstabClass::fin_ack: return "FinAck";
    case EstabClass::unacceptable: return "Unacceptable";
  }
  return "?";
}

// Total classification of a non-RST segment in Established; exactly the
// branch picker for the main receive loop. In-window data that does not
// start at rcv_nxt is deliberately unacceptable (no out-of-order cache);
// the duplicate ACK it provokes makes the peer retransmit.
inline EstabClass estab_classify(const Tcb& tcb, const wire::Segment& seg) {
  if (tcb.state != State::Established) {
    throw state_error(std::string("estab_classify: TCB is ") +
                      to_string(tcb.state));
  }
  if (!seg_acceptable(tcb, seg)) return EstabClass::unacceptable;
  if (seg.flags.fin) {
    return seg.seq == tcb.rcv_nxt ? EstabClass::fin_ack
                                  : EstabClass::unacceptable;
  }
  if (!seg.payload.empty()) {
    return seg.seq == tcb.rcv_nxt ? EstabClass::acceptable_with_payload
                                  : EstabClass::unacceptable;
  }
  return EstabClass::acceptable_empty;
}

// Consumes an in-order data segment: delivers its payload, advances
// rcv_nxt, applies the piggybacked ACK, and answers with an empty ACK.
inline std::tuple<Tcb, wire::Segment, Bytes> recv_data(
    const Tcb& tcb, const wire::Segment& seg) {
  Tcb out = ack_update(tcb, seg);
  out.rcv_nxt += static_cast<seq32>(seg.payload.size());
  wire::Segment reply = build_empty_ack(out);
  return {std::move(out), std::move(reply), seg.payload};
}

// Builds a payload-carrying ACK for user data and queues it for
// retransmission. The caller chunks: one segment per call, at most MSS
// bytes and no more than the peer's remaining window.
inline std::pair<Tcb, wire::Segment> send_data(const Tcb& tcb,
                                               const Bytes& bytes) {
  if (tcb.state != State::Established && tcb.state != State::CloseWait) {
    throw state_error(std::string("send_data: TCB is ") +
                      to_string(tcb.state));
  }
  if (bytes.empty()) {
    throw std::invalid_argument("send_data: empty payload (use an empty ACK)");
  }
  if (bytes.size() > tcb.mss) {
    throw std::length_error("send_data: payload exceeds MSS");
  }
  const uint32_t in_flight = tcb.snd_nxt - tcb.snd_una;
  if (in_flight + bytes.size() > tcb.snd_wnd) {
    throw std::length_error("send_data: payload exceeds peer window");
  }

  Tcb out = tcb;
  wire::Segment seg;
  seg.src_port = tcb.local_addr.port;
  seg.dst_port = tcb.remote_addr.port;
  seg.seq = tcb.snd_nxt;
  seg.ack = tcb.rcv_nxt;
  seg.flags.ack = true;
  seg.flags.psh = true;
  seg.window = static_cast<uint16_t>(tcb.rcv_wnd);
  seg.payload = bytes;
  out.snd_nxt += static_cast<seq32>(bytes.size());
  out.rtx.push(seg);
  return {std::move(out), std::move(seg)};
}

// Oldest unacknowledged segment, byte-identical to its first transmission
// except that the cumulative ack and window fields are refreshed.
inline wire::Segment retransmit_head(const Tcb& tcb) {
  wire::Segment seg = tcb.rtx.head();  // throws state_error when empty
  if (seg.flags.ack) {
    seg.ack = tcb.rcv_nxt;
    seg.window = static_cast<uint16_t>(tcb.rcv_wnd);
  }
  return seg;
}

// Consumes an in-order FIN (with any trailing payload): the FIN occupies
// one sequence number beyond the data. Returns the ACK of the FIN and the
// delivered payload bytes; the TCB moves to CloseWait.
inline std::tuple<Tcb, wire::Segment, Bytes> recv_fin(
    const Tcb& tcb, const wire::Segment& seg) {
  Tcb out = ack_update(tcb, seg);
  out.rcv_nxt += static_cast<seq32>(seg.payload.size()) + 1;
  out.state = State::CloseWait;
  wire::Segment reply = build_empty_ack(out);
  return {std::move(out), std::move(reply), seg.payload};
}

// --- Closing ------------------------------------------------------------

// User-requested close: emits FIN+ACK and moves Established → FinWait1 or
// CloseWait → LastAck. The FIN consumes one sequence number and is queued
// for retransmission.
inline std::pair<Tcb, wire::Segment> start_close(const Tcb& tcb) {
  if (tcb.state != State::Established && tcb.state != State::CloseWait) {
    throw state_error(std::string("start_close: TCB is ") +
                      to_string(tcb.state));
  }
  Tcb out = tcb;
  wire::Segment fin;
  fin.src_port = tcb.local_addr.port;
  fin.dst_port = tcb.remote_addr.port;
  fin.seq = tcb.snd_nxt;
  fin.ack = tcb.rcv_nxt;
  fin.flags.fin = true;
  fin.flags.ack = true;
  fin.window = static_cast<uint16_t>(tcb.rcv_wnd);
  out.snd_nxt += 1;
  out.rtx.push(fin);
  out.state =
      tcb.state == State::Established ? State::FinWait1 : State::LastAck;
  return {std::move(out), std::move(fin)};
}

enum class FinWait1Class {
  ack_of_fin,   // pure ACK covering our FIN → FinWait2
  fin_ack,      // FIN plus ACK of our FIN → final ACK, end
  duplicate,    // acceptable but stale; stay, no reply
  unacceptable, // out of window or payload-bearing; challenge, stay
};

inline FinWait1Class finwait1_classify(const Tcb& tcb,
                                       const wire::Segment& seg) {
  if (tcb.state != State::FinWait1) {
    throw state_error(std::string("finwait1_classify: TCB is ") +
                      to_string(tcb.state));
  }
  // Data arriving after our close is outside the subset: challenged,
  // never consumed.
  if (!seg_acceptable(tcb, seg) || !seg.payload.empty()) {
    return FinWait1Class::unacceptable;
  }
  if (seg.flags.fin) {
    // The peer's FIN must also acknowledge ours; a FIN with a stale ack
    // is a simultaneous close, which is out of scope. Our retransmitted
    // FIN will raise the peer's ack, so treat it as a duplicate for now.
    return (seg.seq == tcb.rcv_nxt && seg.flags.ack && seg.ack == tcb.snd_nxt)
               ? FinWait1Class::fin_ack
               : FinWait1Class::duplicate;
  }
  if (seg.flags.ack && seg.ack == tcb.snd_nxt) {
    return FinWait1Class::ack_of_fin;
  }
  return FinWait1Class::duplicate;
}

struct CloseStep {
  Tcb tcb;
  std::optional<wire::Segment> response;
  bool done = false;  // connection fully closed
};

inline CloseStep finwait1_recv(const Tcb& tcb, const wire::Segment& seg) {
  switch (finwait1_classify(tcb, seg)) {
    case FinWait1Class::ack_of_fin: {
      Tcb out = ack_update(tcb, seg);
      out.state = State::FinWait2;
      return {std::move(out), std::nullopt, false};
    }
    case FinWait1Class::fin_ack: {
      // Both directions shut; acknowledge the FIN and finish, passing
      // through the implied transitional states without a timed wait.
      Tcb out = ack_update(tcb, seg);
      out.rcv_nxt += 1;
      wire::Segment reply = build_empty_ack(out);
      out.state = State::Closed;
      return {std::move(out), std::move(reply), true};
    }
    case FinWait1Class::duplicate:
      return {tcb, std::nullopt, false};
    case FinWait1Class::unacceptable:
      return {tcb, build_empty_ack(tcb), false};
  }
  throw std::logic_error("finwait1_recv: unreachable");
}

enum class FinWait2Class {
  fin,          // in-order FIN → final ACK, end
  ignorable,    // acceptable non-FIN; stay silently
  unacceptable, // challenge, stay
};

inline FinWait2Class finwait2_classify(const Tcb& tcb,
                                       const wire::Segment& seg) {
  if (tcb.state != State::FinWait2) {
    throw state_error(std::string("finwait2_classify: TCB is ") +
                      to_string(tcb.state));
  }
  if (!seg_acceptable(tcb, seg) || !seg.payload.empty()) {
    return FinWait2Class::unacceptable;
  }
  if (seg.flags.fin) {
    return seg.seq == tcb.rcv_nxt ? FinWait2Class::fin
                                  : FinWait2Class::unacceptable;
  }
  return FinWait2Class::ignorable;
}

inline CloseStep finwait2_recv(const Tcb& tcb, const wire::Segment& seg) {
  switch (finwait2_classify(tcb, seg)) {
    case FinWait2Class::fin: {
      Tcb out = ack_update(tcb, seg);
      out.rcv_nxt += 1;
      wire::Segment reply = build_empty_ack(out);
      out.state = State::Closed;
      return {std::move(out), std::move(reply), true};
    }
    case FinWait2Class::ignorable:
      return {tcb, std::nullopt, false};
    case FinWait2Class::unacceptable:
      return {tcb, build_empty_ack(tcb), false};
  }
  throw std::logic_error("finwait2_recv: unreachable");
}

enum class LastAckClass {
  final_ack,    // ACK covering our FIN → end
  duplicate,    // acceptable but stale; stay, no reply
  unacceptable, // challenge, stay
};

inline LastAckClass lastack_classify(const Tcb& tcb,
                                     const wire::Segment& seg) {
  if (tcb.state != State::LastAck) {
    throw state_error(std::string("lastack_classify: TCB is ") +
                      to_string(tcb.state));
  }
  if (!seg_acceptable(tcb, seg) || !seg.payload.empty()) {
    return LastAckClass::unacceptable;
  }
  if (seg.flags.ack && seg.ack == tcb.snd_nxt && !seg.flags.fin) {
    return LastAckClass::final_ack;
  }
  return LastAckClass::duplicate;
}

inline CloseStep lastack_recv_ack(const Tcb& tcb, const wire::Segment& seg) {
  switch (lastack_classify(tcb, seg)) {
    case LastAckClass::final_ack: {
      Tcb out = ack_update(tcb, seg);
      out.state = State::Closed;
      return {std::move(out), std::nullopt, true};
    }
    case LastAckClass::duplicate:
      return {tcb, std::nullopt, false};
    case LastAckClass::unacceptable:
      return {tcb, build_empty_ack(tcb), false};
  }
  throw std::logic_error("lastack_recv_ack: unreachable");
}

}  // namespace stcp::tcp
