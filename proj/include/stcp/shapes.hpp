// SPDX-License-Identifier: Apache-2.0
//
// The named session shapes for the passive-open TCP server subset.
//
// The system-side session walks the annotated state diagram: passive open,
// three-way handshake, the established request/reply loop, and both close
// handshakes (peer-first through CloseWait/LastAck, server-first through
// FinWait1/FinWait2/TimeWait).  The user-side session is the action-wise
// dual of every user-facing step of the system session.
//
// Branch labels are the wire classes assigned by classify_segment, so every
// datagram a misbehaving peer can legally aim at an open state has an arm:
// next to the happy-path arms, each receiving state carries arms for stale
// duplicates (stay silent), unacceptable sequence numbers (challenge with a
// current ACK and stay), and — whenever the retransmission queue can be
// non-empty — a Timeout arm that retransmits the oldest unacknowledged
// segment.  Timeout is the virtual message a network endpoint synthesizes
// when an offer budget expires; it never crosses the wire.
//
// Two deliberate subset boundaries: in SynRcvd a reset decision is reachable
// both from an inbound RST (nothing is sent back) and from a fresh in-window
// connection request (answered with an RST); and an unacceptable plain ACK
// is always challenged, never escalated, so the nested challenge-or-reset
// choice after an unacceptable ACK keeps its reset arm only as a declared
// possibility.

#pragma once

#include "stcp/session.hpp"
#include "stcp/session_text.hpp"

namespace stcp::shapes {

// Builds the protocol library.  Prefer the process-wide instance from lib().
inline ShapeLib make_protocol_lib() {
  ShapeLib lib;

  // Quiet period after we sent the final ACK of the peer's FIN.  A lost
  // final ACK makes the peer retransmit its FIN, so the state re-acknowledges
  // FINs and ignores stray ACKs until one full budget passes in silence;
  // here the Timeout arm means "quiet period over", not a retransmission.
  lib.define("TimeWait", R"(
      rec TimeWait .
      (ClientSystem & {
        FinAck. (ClientSystem + Ack). TimeWait,
        Ack. TimeWait,
        Timeout. end
      }))");

  // Our FIN is acknowledged; waiting for the peer's FIN.  The retransmission
  // queue is empty here (the ACK that moved us in covered everything), so
  // there is no Timeout arm and the offer blocks until the peer closes.
  lib.define("FinWaitTwo", R"(
      rec FinWaitTwo .
      (ClientSystem & {
        FinAck. (ClientSystem + Ack). TimeWait,
        Ack. FinWaitTwo,
        Ack. (ClientSystem + Ack). FinWaitTwo,
        FinAck. (ClientSystem + Ack). FinWaitTwo
      }))");

  // Our FIN is in flight.  Arms in order: the peer acknowledges it; the peer
  // closes too and acknowledges in one segment; a stale duplicate; an
  // unacceptable ACK (challenged); a stale FIN; an unacceptable FIN
  // (challenged); retransmission — the queue head is normally the FIN but
  // can be earlier data, so the select branches on what is resent.
  lib.define("FinWaitOne", R"(
      rec FinWaitOne .
      (ClientSystem & {
        Ack. FinWaitTwo,
        FinAck. (ClientSystem + Ack). TimeWait,
        Ack. FinWaitOne,
        Ack. (ClientSystem + Ack). FinWaitOne,
        FinAck. FinWaitOne,
        FinAck. (ClientSystem + Ack). FinWaitOne,
        Timeout. (ClientSystem + {
          FinAck. FinWaitOne,
          Ack. FinWaitOne
        })
      }))");

  // Both directions are shutting down and our FIN went last; waiting for the
  // ACK that retires it.  The peer may retransmit its own FIN if our ACK of
  // it was lost, which lands here as an unacceptable FIN and is re-acked.
  lib.define("LastAck", R"(
      rec LastAck .
      (ClientSystem & {
        Ack. end,
        Ack. LastAck,
        Ack. (ClientSystem + Ack). LastAck,
        FinAck. LastAck,
        FinAck. (ClientSystem + Ack). LastAck,
        Timeout. (ClientSystem + {
          FinAck. LastAck,
          Ack. LastAck
        })
      }))");

  // The peer closed its direction first.  The user may keep sending; each
  // chunk is sent and its acknowledgement awaited before the next command.
  // When the user closes, our FIN goes out and LastAck finishes the session.
  lib.define("CloseWait", R"(
      rec CloseWait .
      (ServerUser & {
        Data. (ClientSystem + Ack). (ClientSystem & Ack). CloseWait,
        Close. (ClientSystem + FinAck). LastAck
      }))");

  // The established request/reply loop.  Arms in order: in-order data is
  // acknowledged, delivered to the user, and answered with the user's reply
  // (more data, or a FIN when the user closes); a plain acknowledgement of
  // our own data; the peer's FIN; an unacceptable segment (challenged); an
  // unacceptable FIN (challenged); retransmission of the queue head.
  lib.define("CommLoop", R"(
      rec CommLoop .
      (ClientSystem & {
        Ack. (ClientSystem + Ack). (ServerUser + Data).
          (ServerUser & {
            Data. (ClientSystem + Ack). CommLoop,
            Close. (ClientSystem + FinAck). FinWaitOne
          }),
        Ack. CommLoop,
        FinAck. (ClientSystem + Ack). (ServerUser + Close). CloseWait,
        Ack. (ClientSystem + Ack). CommLoop,
        FinAck. (ClientSystem + Ack). CommLoop,
        Timeout. (ClientSystem + Ack). CommLoop
      }))");

  // The handshake tail.  Arms in order: the acceptable ACK completes the
  // handshake; an unacceptable ACK is challenged (the nested reset arm is a
  // declared possibility the driver never takes for plain ACKs); a
  // connection request — a stale duplicate is challenged, a fresh in-window
  // one is answered with an RST and resets; an inbound RST resets with
  // nothing sent; a timeout retransmits the handshake reply.
  lib.define("SynRcvd", R"(
      rec SynRcvd .
      (ClientSystem & {
        Ack. (ServerUser + Connected). CommLoop,
        Ack. (ClientSystem + {
          Ack. SynRcvd,
          Rst. (ServerUser + Close). end
        }),
        Syn. (ClientSystem + {
          Ack. SynRcvd,
          Rst. (ServerUser + Close). end
        }),
        Rst. (ServerUser + Close). end,
        Timeout. (ClientSystem + SynAck). SynRcvd
      }))");

  // The full system session: passive open on the user's command, then the
  // handshake into SynRcvd.
  lib.define("ServerSession", R"(
      (ServerUser & Open).
      (ServerUser + TcbCreated).
      (ClientSystem & Syn).
      (ClientSystem + SynAck).
      SynRcvd)");

  // --- user side -----------------------------------------------------------

  // Dual of CloseWait: after the system announces the peer's close, the user
  // decides per step whether to drain more data or close.
  lib.define("UserCloseWait", R"(
      rec UserCloseWait .
      (ServerSystem + {
        Data. UserCloseWait,
        Close. end
      }))");

  // Dual of the established loop: every delivery obliges exactly one reply —
  // more data (possibly empty, meaning "nothing to send") or a close.
  lib.define("UserLoop", R"(
      rec UserLoop .
      (ServerSystem & {
        Data. (ServerSystem + {
          Data. UserLoop,
          Close. end
        }),
        Close. UserCloseWait
      }))");

  // The full user session: command the open, learn the TCB exists, then the
  // connection is either established or reset before it ever opens.
  lib.define("UserSession", R"(
      (ServerSystem + Open).
      (ServerSystem & TcbCreated).
      (ServerSystem & {
        Connected. UserLoop,
        Close. end
      }))");

  return lib;
}

inline const ShapeLib& lib() {
  static const ShapeLib lib = make_protocol_lib();
  return lib;
}

inline ShapeP server_session() { return lib().find("ServerSession"); }
inline ShapeP user_session() { return lib().find("UserSession"); }

}  // namespace stcp::shapes
