// SPDX-License-Identifier: Apache-2.0
//
// The Server System driver: walks the full server session shape while
// operating the TCP core, relaying between the user endpoint and the
// network endpoint.
//
// Each protocol state is one loop.  The loop enters the recursion, receives
// one message through the branching offer (descending the two-arm spine
// case by case, with pickers that consult the pure machine), performs the
// machine transition for the chosen arm, sends whatever the arm's selects
// dictate, and either recurses or moves to the next state's loop.  Every
// segment the driver emits comes out of exactly one machine build or
// retransmit operation; the driver itself never forges one.
//
// Timeouts: a receive carries a budget exactly when the retransmission
// queue is non-empty (there must be something to resend when it expires),
// except in TimeWait where the budget is the quiet period itself.  The
// retransmission counter resets whenever the cumulative acknowledgement
// advances and aborts the run when one queue head exhausts the limit.
//
// A protocol or linearity violation anywhere (a peer that sends what no arm
// admits, a command the session does not permit) aborts the run: both
// endpoints are released and the report carries the diagnostic.

#pragma once

#include <cstdint>
#include <exception>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "stcp/channel.hpp"
#include "stcp/message.hpp"
#include "stcp/session.hpp"
#include "stcp/shapes.hpp"
#include "stcp/tcp.hpp"
#include "stcp/trace.hpp"
#include "stcp/wire.hpp"

namespace stcp {

struct ServerConfig {
  SockAddr local{};
  tcp::seq32 iss = 0;
  std::int64_t rto_ms = 200;       // fixed retransmission timeout
  int max_retransmits = 8;         // per queue head, then the run aborts
  std::int64_t time_wait_ms = 400; // quiet period after the final ACK
  // Optional live view of the state transitions, appended as they are
  // announced; the harness polls it for scenario assertions.
  std::shared_ptr<std::vector<tcp::State>> state_probe;
};

struct RunReport {
  bool ok = true;
  bool reset = false;     // the connection ended through the reset decision
  std::string error;      // diagnostic when !ok
  std::vector<tcp::State> states;
  int retransmits = 0;
  int challenges = 0;
  std::vector<std::string> lines;

  std::string text() const {
    std::string out;
    for (const std::string& line : lines) {
      out += line;
      out += '\n';
    }
    out += ok ? "result=ok\n" : "result=aborted error=" + error + "\n";
    return out;
  }
};

namespace detail {

class ServerDriver {
 public:
  ServerDriver(UserChannel& user, NetChannel& net, const ServerConfig& cfg)
      : user_(user), net_(net), cfg_(cfg), log_([this] { return net_.now(); }) {}

  RunReport run() {
    try {
      run_session();
    } catch (const std::exception& e) {
      rep_.ok = false;
      rep_.error = e.what();
      log_.note(std::string("aborted: ") + e.what());
      user_.release();
      net_.release();
    }
    rep_.lines = log_.lines();
    return std::move(rep_);
  }

 private:
  // --- bookkeeping ---------------------------------------------------------

  void state(tcp::State s) {
    rep_.states.push_back(s);
    log_.state(s);
    if (cfg_.state_probe) cfg_.state_probe->push_back(s);
  }

  TimeoutBudget budget() const {
    return tcb_.rtx.empty() ? TimeoutBudget::none()
                            : TimeoutBudget::of(cfg_.rto_ms);
  }

  // Resets the retransmission counter whenever the peer acknowledged
  // something new since the last receive.
  void note_progress() {
    if (tcb_.snd_una != last_una_) {
      last_una_ = tcb_.snd_una;
      rtx_count_ = 0;
    }
  }

  void bump_rtx(const char* where) {
    if (++rtx_count_ > cfg_.max_retransmits) {
      throw channel_error(std::string("retransmission limit reached in ") +
                          where);
    }
    ++rep_.retransmits;
  }

  void log_inbound(const Message& m) {
    if (m.cls == classes::timeout()) {
      log_.note("timeout");
    } else {
      log_.seg_rx(m.as_segment());
    }
  }

  SessionToken send_seg(SessionToken t, MsgClass cls,
                        const wire::Segment& seg) {
    log_.seg_tx(seg);
    return net_.select_one(std::move(t), Message::segment(cls, seg));
  }

  SessionToken challenge(SessionToken t) {
    ++rep_.challenges;
    return send_seg(std::move(t), classes::ack(), tcp::build_empty_ack(tcb_));
  }

  SessionToken to_user(SessionToken t, Message m) {
    log_.user("sent", m.cls);
    return user_.select_one(std::move(t), std::move(m));
  }

  // --- session -------------------------------------------------------------

  void run_session() {
    SessionToken t = new_session(shapes::server_session());
    state(tcp::State::Closed);

    // Passive open: the user commands it, the TCB enters Listen.
    auto [open_cmd, t1] = user_.offer_one(std::move(t));
    log_.user("received", open_cmd.cls);
    tcb_ = tcp::open(cfg_.local);
    state(tcp::State::Listen);
    SessionToken t2 =
        to_user(std::move(t1), Message::unit(classes::tcb_created()));

    // Handshake: connection request in, handshake reply out.
    auto [from, syn, t3] = net_.offer_one_with_addr(std::move(t2), cfg_.local);
    log_.seg_rx(syn.as_segment());
    auto opened = tcp::recv_syn(tcb_, from, syn.as_segment(), cfg_.iss);
    if (!opened) {
      throw protocol_error("listen: segment is not a connection request");
    }
    tcb_ = std::move(opened->first);
    net_.set_remote(from);
    state(tcp::State::SynRcvd);
    SessionToken t4 =
        send_seg(std::move(t3), classes::syn_ack(), opened->second);

    std::optional<SessionToken> established = syn_rcvd(std::move(t4));
    if (!established) return;  // reset: the session already closed cleanly
    comm_loop(std::move(*established));
  }

  // The handshake tail.  Returns the token after the user learned the
  // connection is established, or nullopt when the connection was reset.
  std::optional<SessionToken> syn_rcvd(SessionToken tok) {
    const SockAddr remote = *net_.remote();
    for (;;) {
      note_progress();
      SessionToken body = rec_enter(std::move(tok));
      Branch b1 = net_.offer_timed(
          std::move(body),
          [this](const Message& m) {
            if (m.cls != classes::ack()) return Side::right;
            return tcp::synrcvd_recv_ack(tcb_, m.as_segment()).kind ==
                           tcp::Reaction::Kind::acceptable
                       ? Side::left
                       : Side::right;
          },
          budget(), cfg_.local, remote);
      log_inbound(b1.message);
      if (b1.left()) {
        // The handshake completes.
        auto r = tcp::synrcvd_recv_ack(tcb_, b1.message.as_segment());
        tcb_ = std::move(r.tcb);
        state(tcp::State::Established);
        return to_user(std::move(b1.token),
                       Message::unit(classes::connected()));
      }
      Branch b2 =
          net_.offer_two(std::move(b1.token), class_picker(classes::ack()));
      if (b2.left()) {
        // Unacceptable ACK: challenge and stay.
        auto r = tcp::synrcvd_recv_ack(tcb_, b2.message.as_segment());
        tcb_ = std::move(r.tcb);
        ++rep_.challenges;
        log_.seg_tx(*r.response);
        tok = net_.select_left(std::move(b2.token),
                               Message::segment(classes::ack(), *r.response));
        continue;
      }
      Branch b3 =
          net_.offer_two(std::move(b2.token), class_picker(classes::syn()));
      if (b3.left()) {
        auto r = tcp::synrcvd_recv_ack(tcb_, b3.message.as_segment());
        if (r.kind == tcp::Reaction::Kind::not_acceptable) {
          // A duplicate of the original request: challenge and stay.
          tcb_ = std::move(r.tcb);
          ++rep_.challenges;
          log_.seg_tx(*r.response);
          tok = net_.select_left(
              std::move(b3.token),
              Message::segment(classes::ack(), *r.response));
          continue;
        }
        // A fresh in-window request: the peer forgot this connection.
        tcb_ = std::move(r.tcb);
        log_.seg_tx(*r.response);
        SessionToken t = net_.select_right(
            std::move(b3.token), Message::segment(classes::rst(), *r.response));
        finish_reset(std::move(t));
        return std::nullopt;
      }
      Branch b4 =
          net_.offer_two(std::move(b3.token), class_picker(classes::rst()));
      if (b4.left()) {
        // Inbound RST: tear down without answering.
        auto r = tcp::synrcvd_recv_ack(tcb_, b4.message.as_segment());
        tcb_ = std::move(r.tcb);
        finish_reset(std::move(b4.token));
        return std::nullopt;
      }
      // Timeout: resend the handshake reply.
      bump_rtx("SynRcvd");
      tok = send_seg(std::move(b4.token), classes::syn_ack(),
                     tcp::retransmit_head(tcb_));
    }
  }

  void finish_reset(SessionToken tok) {
    rep_.reset = true;
    state(tcp::State::Closed);
    SessionToken e = to_user(std::move(tok), Message::unit(classes::close()));
    stcp::close(std::move(e), net_, user_);
    log_.note("connection reset");
  }

  // The established request/reply loop.
  void comm_loop(SessionToken tok) {
    const SockAddr remote = *net_.remote();
    for (;;) {
      note_progress();
      SessionToken body = rec_enter(std::move(tok));
      Branch b1 = net_.offer_timed(
          std::move(body),
          [this](const Message& m) {
            if (m.cls != classes::ack()) return Side::right;
            return tcp::estab_classify(tcb_, m.as_segment()) ==
                           tcp::EstabClass::acceptable_with_payload
                       ? Side::left
                       : Side::right;
          },
          budget(), cfg_.local, remote);
      log_inbound(b1.message);
      if (b1.left()) {
        // In-order data: acknowledge, deliver, relay the user's reply.
        auto [tcb2, ackseg, payload] =
            tcp::recv_data(tcb_, b1.message.as_segment());
        tcb_ = std::move(tcb2);
        SessionToken t = send_seg(std::move(b1.token), classes::ack(), ackseg);
        t = to_user(std::move(t),
                    Message::bytes(classes::data(), std::move(payload)));
        Branch ub = user_.offer_two(std::move(t), class_picker(classes::data()));
        log_.user("received", ub.message.cls);
        if (ub.left()) {
          const Bytes& reply = ub.message.as_bytes();
          if (reply.empty()) {
            // "Nothing to send": answer with a plain ACK that carries no
            // sequence space and is never queued for retransmission.
            tok = send_seg(std::move(ub.token), classes::ack(),
                           tcp::build_empty_ack(tcb_));
          } else {
            auto [tcb3, dataseg] = tcp::send_data(tcb_, reply);
            tcb_ = std::move(tcb3);
            tok = send_seg(std::move(ub.token), classes::ack(), dataseg);
          }
          continue;
        }
        // The user closes: our FIN goes out.
        auto [tcb3, fin] = tcp::start_close(tcb_);
        tcb_ = std::move(tcb3);
        state(tcp::State::FinWait1);
        SessionToken ft =
            send_seg(std::move(ub.token), classes::fin_ack(), fin);
        fin_wait1(std::move(ft));
        return;
      }
      Branch b2 = net_.offer_two(
          std::move(b1.token), [this](const Message& m) {
            if (m.cls != classes::ack()) return Side::right;
            return tcp::estab_classify(tcb_, m.as_segment()) ==
                           tcp::EstabClass::acceptable_empty
                       ? Side::left
                       : Side::right;
          });
      if (b2.left()) {
        // A plain acknowledgement of our own data.
        tcb_ = tcp::ack_update(tcb_, b2.message.as_segment());
        tok = std::move(b2.token);
        continue;
      }
      Branch b3 = net_.offer_two(
          std::move(b2.token), [this](const Message& m) {
            if (m.cls != classes::fin_ack()) return Side::right;
            return tcp::estab_classify(tcb_, m.as_segment()) ==
                           tcp::EstabClass::fin_ack
                       ? Side::left
                       : Side::right;
          });
      if (b3.left()) {
        // The peer closed its direction.
        auto [tcb2, ackseg, payload] =
            tcp::recv_fin(tcb_, b3.message.as_segment());
        tcb_ = std::move(tcb2);
        if (!payload.empty()) {
          log_.note("data on the closing segment acknowledged, not delivered");
        }
        state(tcp::State::CloseWait);
        SessionToken t = send_seg(std::move(b3.token), classes::ack(), ackseg);
        t = to_user(std::move(t), Message::unit(classes::close()));
        close_wait(std::move(t));
        return;
      }
      Branch b4 =
          net_.offer_two(std::move(b3.token), class_picker(classes::ack()));
      if (b4.left()) {
        // Unacceptable: challenge with the current window.
        tok = challenge(std::move(b4.token));
        continue;
      }
      Branch b5 =
          net_.offer_two(std::move(b4.token), class_picker(classes::fin_ack()));
      if (b5.left()) {
        // Out-of-order FIN: challenge; the peer's retransmission repairs it.
        tok = challenge(std::move(b5.token));
        continue;
      }
      // Timeout: resend the oldest unacknowledged segment.
      bump_rtx("Established");
      tok = send_seg(std::move(b5.token), classes::ack(),
                     tcp::retransmit_head(tcb_));
    }
  }

  // The peer closed first; the user drains and eventually closes.  The
  // drain path waits for each chunk's acknowledgement with the plain offer,
  // so user data during CloseWait is only exercised over clean links.
  void close_wait(SessionToken tok) {
    for (;;) {
      SessionToken body = rec_enter(std::move(tok));
      Branch ub = user_.offer_two(std::move(body), class_picker(classes::data()));
      log_.user("received", ub.message.cls);
      if (ub.left()) {
        const Bytes& bytes = ub.message.as_bytes();
        if (bytes.empty()) {
          throw protocol_error("empty Data command while draining");
        }
        auto [tcb2, dataseg] = tcp::send_data(tcb_, bytes);
        tcb_ = std::move(tcb2);
        SessionToken t = send_seg(std::move(ub.token), classes::ack(), dataseg);
        auto [ackmsg, t2] = net_.offer_one(std::move(t));
        log_inbound(ackmsg);
        tcb_ = tcp::ack_update(tcb_, ackmsg.as_segment());
        tok = std::move(t2);
        continue;
      }
      // The user closes: our FIN goes out and LastAck retires it.
      auto [tcb2, fin] = tcp::start_close(tcb_);
      tcb_ = std::move(tcb2);
      state(tcp::State::LastAck);
      SessionToken t = send_seg(std::move(ub.token), classes::fin_ack(), fin);
      last_ack(std::move(t));
      return;
    }
  }

  void fin_wait1(SessionToken tok) {
    const SockAddr remote = *net_.remote();
    for (;;) {
      note_progress();
      SessionToken body = rec_enter(std::move(tok));
      Branch b1 = net_.offer_timed(
          std::move(body),
          [this](const Message& m) {
            if (m.cls != classes::ack()) return Side::right;
            return tcp::finwait1_classify(tcb_, m.as_segment()) ==
                           tcp::FinWait1Class::ack_of_fin
                       ? Side::left
                       : Side::right;
          },
          budget(), cfg_.local, remote);
      log_inbound(b1.message);
      if (b1.left()) {
        // Our FIN is acknowledged; wait for the peer's.
        auto step = tcp::finwait1_recv(tcb_, b1.message.as_segment());
        tcb_ = std::move(step.tcb);
        state(tcp::State::FinWait2);
        fin_wait2(std::move(b1.token));
        return;
      }
      Branch b2 = net_.offer_two(
          std::move(b1.token), [this](const Message& m) {
            if (m.cls != classes::fin_ack()) return Side::right;
            return tcp::finwait1_classify(tcb_, m.as_segment()) ==
                           tcp::FinWait1Class::fin_ack
                       ? Side::left
                       : Side::right;
          });
      if (b2.left()) {
        // The peer closed too and acknowledged ours in one segment.
        auto step = tcp::finwait1_recv(tcb_, b2.message.as_segment());
        tcb_ = std::move(step.tcb);
        SessionToken t =
            send_seg(std::move(b2.token), classes::ack(), *step.response);
        state(tcp::State::TimeWait);
        time_wait(std::move(t));
        return;
      }
      Branch b3 = net_.offer_two(
          std::move(b2.token), [this](const Message& m) {
            if (m.cls != classes::ack()) return Side::right;
            return tcp::finwait1_classify(tcb_, m.as_segment()) ==
                           tcp::FinWait1Class::duplicate
                       ? Side::left
                       : Side::right;
          });
      if (b3.left()) {  // stale: stay silent
        tok = std::move(b3.token);
        continue;
      }
      Branch b4 =
          net_.offer_two(std::move(b3.token), class_picker(classes::ack()));
      if (b4.left()) {  // unacceptable ACK: challenge
        tok = challenge(std::move(b4.token));
        continue;
      }
      Branch b5 = net_.offer_two(
          std::move(b4.token), [this](const Message& m) {
            if (m.cls != classes::fin_ack()) return Side::right;
            return tcp::finwait1_classify(tcb_, m.as_segment()) ==
                           tcp::FinWait1Class::duplicate
                       ? Side::left
                       : Side::right;
          });
      if (b5.left()) {  // a FIN we cannot retire yet: hold off
        tok = std::move(b5.token);
        continue;
      }
      Branch b6 =
          net_.offer_two(std::move(b5.token), class_picker(classes::fin_ack()));
      if (b6.left()) {  // out-of-order FIN: challenge
        tok = challenge(std::move(b6.token));
        continue;
      }
      // Timeout: resend the queue head, branching on what it is.
      bump_rtx("FinWait1");
      tok = retransmit_mixed(std::move(b6.token));
    }
  }

  void fin_wait2(SessionToken tok) {
    const SockAddr remote = *net_.remote();
    for (;;) {
      SessionToken body = rec_enter(std::move(tok));
      Branch b1 = net_.offer_timed(
          std::move(body),
          [this](const Message& m) {
            if (m.cls != classes::fin_ack()) return Side::right;
            return tcp::finwait2_classify(tcb_, m.as_segment()) ==
                           tcp::FinWait2Class::fin
                       ? Side::left
                       : Side::right;
          },
          budget(), cfg_.local, remote);
      log_inbound(b1.message);
      if (b1.left()) {
        // The peer's FIN: answer the final ACK and hold the quiet period.
        auto step = tcp::finwait2_recv(tcb_, b1.message.as_segment());
        tcb_ = std::move(step.tcb);
        SessionToken t =
            send_seg(std::move(b1.token), classes::ack(), *step.response);
        state(tcp::State::TimeWait);
        time_wait(std::move(t));
        return;
      }
      Branch b2 = net_.offer_two(
          std::move(b1.token), [this](const Message& m) {
            if (m.cls != classes::ack()) return Side::right;
            return tcp::finwait2_classify(tcb_, m.as_segment()) ==
                           tcp::FinWait2Class::ignorable
                       ? Side::left
                       : Side::right;
          });
      if (b2.left()) {  // acceptable but empty-handed: stay silent
        tok = std::move(b2.token);
        continue;
      }
      Branch b3 =
          net_.offer_two(std::move(b2.token), class_picker(classes::ack()));
      if (b3.left()) {  // unacceptable ACK: challenge
        tok = challenge(std::move(b3.token));
        continue;
      }
      // Unacceptable FIN: challenge.
      tok = challenge(std::move(b3.token));
    }
  }

  void last_ack(SessionToken tok) {
    const SockAddr remote = *net_.remote();
    for (;;) {
      note_progress();
      SessionToken body = rec_enter(std::move(tok));
      Branch b1 = net_.offer_timed(
          std::move(body),
          [this](const Message& m) {
            if (m.cls != classes::ack()) return Side::right;
            return tcp::lastack_classify(tcb_, m.as_segment()) ==
                           tcp::LastAckClass::final_ack
                       ? Side::left
                       : Side::right;
          },
          budget(), cfg_.local, remote);
      log_inbound(b1.message);
      if (b1.left()) {
        // The final ACK retires our FIN; the connection is fully closed.
        auto step = tcp::lastack_recv_ack(tcb_, b1.message.as_segment());
        tcb_ = std::move(step.tcb);
        state(tcp::State::Closed);
        stcp::close(std::move(b1.token), net_, user_);
        return;
      }
      Branch b2 = net_.offer_two(
          std::move(b1.token), [this](const Message& m) {
            if (m.cls != classes::ack()) return Side::right;
            return tcp::lastack_classify(tcb_, m.as_segment()) ==
                           tcp::LastAckClass::duplicate
                       ? Side::left
                       : Side::right;
          });
      if (b2.left()) {  // stale: stay silent
        tok = std::move(b2.token);
        continue;
      }
      Branch b3 =
          net_.offer_two(std::move(b2.token), class_picker(classes::ack()));
      if (b3.left()) {  // unacceptable ACK: challenge
        tok = challenge(std::move(b3.token));
        continue;
      }
      Branch b4 = net_.offer_two(
          std::move(b3.token), [this](const Message& m) {
            if (m.cls != classes::fin_ack()) return Side::right;
            return tcp::lastack_classify(tcb_, m.as_segment()) ==
                           tcp::LastAckClass::duplicate
                       ? Side::left
                       : Side::right;
          });
      if (b4.left()) {  // a stray acceptable FIN: stay silent
        tok = std::move(b4.token);
        continue;
      }
      Branch b5 =
          net_.offer_two(std::move(b4.token), class_picker(classes::fin_ack()));
      if (b5.left()) {  // the peer's FIN again: re-acknowledge it
        tok = challenge(std::move(b5.token));
        continue;
      }
      // Timeout: resend the queue head, branching on what it is.
      bump_rtx("LastAck");
      tok = retransmit_mixed(std::move(b5.token));
    }
  }

  // Quiet period after the final ACK: re-acknowledge retransmitted FINs,
  // ignore stray ACKs, and close once a full budget passes in silence.
  void time_wait(SessionToken tok) {
    const SockAddr remote = *net_.remote();
    for (;;) {
      SessionToken body = rec_enter(std::move(tok));
      Branch b1 = net_.offer_timed(std::move(body),
                                   class_picker(classes::fin_ack()),
                                   TimeoutBudget::of(cfg_.time_wait_ms),
                                   cfg_.local, remote);
      log_inbound(b1.message);
      if (b1.left()) {
        // The peer never saw our final ACK: repeat it.
        tok = send_seg(std::move(b1.token), classes::ack(),
                       tcp::build_empty_ack(tcb_));
        continue;
      }
      Branch b2 =
          net_.offer_two(std::move(b1.token), class_picker(classes::ack()));
      if (b2.left()) {  // stray: ignore
        tok = std::move(b2.token);
        continue;
      }
      // Quiet period over.
      state(tcp::State::Closed);
      stcp::close(std::move(b2.token), net_, user_);
      return;
    }
  }

  // For the Timeout arms whose select branches on the resent segment's
  // class: the queue head is normally our FIN but can be earlier data.
  SessionToken retransmit_mixed(SessionToken tok) {
    wire::Segment head = tcp::retransmit_head(tcb_);
    MsgClass cls = classify_segment(head);
    log_.seg_tx(head);
    if (cls == classes::fin_ack()) {
      return net_.select_left(std::move(tok),
                              Message::segment(cls, std::move(head)));
    }
    return net_.select_right(std::move(tok),
                             Message::segment(cls, std::move(head)));
  }

  UserChannel& user_;
  NetChannel& net_;
  ServerConfig cfg_;
  ReportLog log_;
  RunReport rep_;
  tcp::Tcb tcb_;
  tcp::seq32 last_una_ = 0;
  int rtx_count_ = 0;
};

}  // namespace detail

// Runs one full server session over the two endpoints and reports what
// happened.  Never throws: violations abort the run into the report.
inline RunReport run_server_system(UserChannel& user, NetChannel& net,
                                   const ServerConfig& cfg) {
  return detail::ServerDriver(user, net, cfg).run();
}

}  // namespace stcp
