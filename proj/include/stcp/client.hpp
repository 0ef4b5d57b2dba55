// SPDX-License-Identifier: Apache-2.0
//
// A minimal correct TCP client for driving the server from tests and the
// harness: active open, cumulative acknowledgement, in-order reassembly
// with duplicate ACKs for everything else, and a fixed retransmission
// timeout.  It is intentionally plain imperative code — an independent
// counterpart, not a second session-typed endpoint — so server tests do not
// check the implementation against itself.

#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <utility>

#include "stcp/channel.hpp"
#include "stcp/clock.hpp"
#include "stcp/error.hpp"
#include "stcp/seqnum.hpp"
#include "stcp/wire.hpp"

namespace stcp {

class ScriptedClient {
 public:
  ScriptedClient(SegmentTransport& transport, SockAddr local, SockAddr server,
                 tcp::seq32 iss, std::int64_t rto_ms = 200, int max_rtx = 8)
      : transport_(transport),
        local_(local),
        server_(server),
        rto_ms_(rto_ms),
        max_rtx_(max_rtx),
        snd_una_(iss),
        snd_nxt_(iss) {}

  // Three-way handshake: SYN out, SYN-ACK in, empty ACK out.
  void connect() {
    wire::Segment syn;
    stamp(syn);
    syn.seq = snd_nxt_;
    syn.flags.syn = true;
    transmit(syn, /*queue=*/true);
    snd_nxt_ += 1;
    pump_until([this] { return established_; });
  }

  // Queues one data segment and sends it; does not wait for the ACK.
  void send_line(const Bytes& bytes) {
    wire::Segment seg;
    stamp(seg);
    seg.seq = snd_nxt_;
    seg.ack = rcv_nxt_;
    seg.flags.ack = true;
    seg.flags.psh = true;
    seg.payload = bytes;
    transmit(seg, /*queue=*/true);
    snd_nxt_ += static_cast<tcp::seq32>(bytes.size());
  }

  // Blocks until a full line (through '\n') has been reassembled.
  Bytes recv_line() {
    pump_until([this] { return find_newline().has_value(); });
    if (saw_rst_) throw channel_error("client: connection reset");
    std::size_t end = *find_newline() + 1;
    Bytes line(rx_buf_.begin(), rx_buf_.begin() + end);
    rx_buf_.erase(rx_buf_.begin(), rx_buf_.begin() + end);
    return line;
  }

  // Passive close: wait for the server's FIN, answer it with our own
  // FIN+ACK, and stay until the server acknowledged it.
  void close_respond() {
    mode_ = CloseMode::respond;
    pump_until([this] {
      return server_finned_ && fin_sent_ && snd_una_ == snd_nxt_;
    });
  }

  // As close_respond, but acknowledge the server's FIN with a plain ACK
  // first and follow with a separate FIN, walking the peer through both
  // waiting states instead of the combined branch.
  void close_respond_split() {
    mode_ = CloseMode::respond_split;
    pump_until([this] {
      return server_finned_ && fin_sent_ && snd_una_ == snd_nxt_;
    });
  }

  // Active close: send our FIN first, then wait for the server's FIN and
  // acknowledge it.
  void close_initiate() {
    send_fin();
    mode_ = CloseMode::initiate;
    pump_until([this] { return server_finned_ && snd_una_ == snd_nxt_; });
  }

  // After closing, keep answering retransmissions until the line has been
  // quiet for one timeout.
  void linger() {
    for (;;) {
      auto in = transport_.recv(transport_.now() + 2 * rto_ms_);
      if (!in) return;
      if (in->from == server_ && in->to == local_) handle(in->seg);
    }
  }

  // Repeats the most recent FIN, as after a lost final ACK.
  void resend_fin() {
    if (!fin_sent_) throw state_error("resend_fin: no FIN was sent");
    wire::Segment fin = last_fin_;
    fin.ack = rcv_nxt_;
    transmit(fin, /*queue=*/false);
  }

  // Waits for one segment from the server, bypassing all protocol handling.
  std::optional<wire::Segment> recv_raw(Instant deadline) {
    for (;;) {
      auto in = transport_.recv(deadline);
      if (!in) return std::nullopt;
      if (in->from == server_ && in->to == local_) return std::move(in->seg);
    }
  }

  void send_raw(const wire::Segment& seg) { transmit(seg, /*queue=*/false); }

  bool established() const { return established_; }
  bool saw_rst() const { return saw_rst_; }
  bool server_finned() const { return server_finned_; }
  int retransmits() const { return retransmits_; }
  tcp::seq32 snd_nxt() const { return snd_nxt_; }
  tcp::seq32 rcv_nxt() const { return rcv_nxt_; }

 private:
  enum class CloseMode { none, respond, respond_split, initiate };

  void stamp(wire::Segment& seg) {
    seg.src_port = local_.port;
    seg.dst_port = server_.port;
    seg.window = 65535;
  }

  void transmit(const wire::Segment& seg, bool queue) {
    if (queue) {
      rtx_.push_back(seg);
      if (rtx_.size() == 1) rearm();
    }
    transport_.send(seg, server_.ip);
  }

  void send_fin() {
    wire::Segment fin;
    stamp(fin);
    fin.seq = snd_nxt_;
    fin.ack = rcv_nxt_;
    fin.flags.ack = true;
    fin.flags.fin = true;
    last_fin_ = fin;
    fin_sent_ = true;
    transmit(fin, /*queue=*/true);
    snd_nxt_ += 1;
  }

  void send_empty_ack() {
    wire::Segment ackseg;
    stamp(ackseg);
    ackseg.seq = snd_nxt_;
    ackseg.ack = rcv_nxt_;
    ackseg.flags.ack = true;
    transmit(ackseg, /*queue=*/false);
  }

  void rearm() { rtx_deadline_ = transport_.now() + rto_ms_; }

  void retransmit_head() {
    if (++rtx_count_ > max_rtx_) {
      throw channel_error("client: retransmission limit reached");
    }
    ++retransmits_;
    wire::Segment seg = rtx_.front();
    if (seg.flags.ack) seg.ack = rcv_nxt_;  // refresh the cumulative ACK
    transport_.send(seg, server_.ip);
    rearm();
  }

  template <class Pred>
  void pump_until(Pred done) {
    while (!done() && !saw_rst_) {
      const Instant deadline = rtx_.empty() ? kNever : rtx_deadline_;
      auto in = transport_.recv(deadline);
      if (!in) {
        retransmit_head();
        continue;
      }
      if (in->from == server_ && in->to == local_) handle(in->seg);
    }
  }

  void ack_advance(const wire::Segment& seg) {
    if (!seg.flags.ack) return;
    if (!tcp::seq_between(snd_una_, seg.ack, snd_nxt_ + 1)) return;
    if (seg.ack == snd_una_) return;
    snd_una_ = seg.ack;
    while (!rtx_.empty() &&
           tcp::seq_lte(rtx_.front().seq + rtx_.front().seq_len(), snd_una_)) {
      rtx_.pop_front();
    }
    rtx_count_ = 0;
    if (!rtx_.empty()) rearm();
  }

  void handle(const wire::Segment& seg) {
    if (seg.flags.rst) {
      saw_rst_ = true;
      return;
    }
    if (seg.flags.syn && seg.flags.ack) {
      if (!established_) {
        rcv_nxt_ = seg.seq + 1;
        ack_advance(seg);
        established_ = true;
      }
      // Fresh or repeated, the handshake reply wants an empty ACK; repeating
      // it heals a lost one.
      send_empty_ack();
      return;
    }
    ack_advance(seg);
    if (seg.flags.fin) {
      if (seg.seq == rcv_nxt_) {
        rx_buf_.insert(rx_buf_.end(), seg.payload.begin(), seg.payload.end());
        rcv_nxt_ = seg.seq + static_cast<tcp::seq32>(seg.payload.size()) + 1;
        server_finned_ = true;
        if (mode_ == CloseMode::respond && !fin_sent_) {
          send_fin();  // our FIN acknowledges theirs on the way out
        } else if (mode_ == CloseMode::respond_split && !fin_sent_) {
          send_empty_ack();  // acknowledge first...
          send_fin();        // ...then close our own direction
        } else {
          send_empty_ack();
        }
      } else {
        send_empty_ack();  // stale or out of order: repeat where we stand
      }
      return;
    }
    if (!seg.payload.empty()) {
      if (seg.seq == rcv_nxt_) {
        rx_buf_.insert(rx_buf_.end(), seg.payload.begin(), seg.payload.end());
        rcv_nxt_ += static_cast<tcp::seq32>(seg.payload.size());
      }
      send_empty_ack();  // in order: acknowledge; out of order: duplicate ACK
    }
  }

  std::optional<std::size_t> find_newline() const {
    for (std::size_t i = 0; i < rx_buf_.size(); ++i) {
      if (rx_buf_[i] == '\n') return i;
    }
    return std::nullopt;
  }

  SegmentTransport& transport_;
  SockAddr local_;
  SockAddr server_;
  std::int64_t rto_ms_;
  int max_rtx_;

  tcp::seq32 snd_una_ = 0;
  tcp::seq32 snd_nxt_ = 0;
  tcp::seq32 rcv_nxt_ = 0;
  std::deque<wire::Segment> rtx_;
  Instant rtx_deadline_ = kNever;
  int rtx_count_ = 0;
  int retransmits_ = 0;

  Bytes rx_buf_;
  bool established_ = false;
  bool server_finned_ = false;
  bool fin_sent_ = false;
  bool saw_rst_ = false;
  CloseMode mode_ = CloseMode::none;
  wire::Segment last_fin_;
};

}  // namespace stcp
