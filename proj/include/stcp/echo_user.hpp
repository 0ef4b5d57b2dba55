// SPDX-License-Identifier: Apache-2.0
//
// The Server User role: a line-reversal echo service driven over the user
// session shape.  It buffers delivered bytes, reverses every complete line,
// and answers each delivery with exactly one reply.  An empty line is the
// quit command: the user closes instead of replying, dropping any reversed
// lines from the same delivery — the farewell supersedes them.

#pragma once

#include <algorithm>
#include <exception>
#include <string>
#include <utility>

#include "stcp/channel.hpp"
#include "stcp/message.hpp"
#include "stcp/session.hpp"
#include "stcp/shapes.hpp"

namespace stcp {

struct UserReport {
  bool ok = true;
  std::string error;
  Bytes received;       // every byte the system delivered, in order
  Bytes sent;           // every byte handed back for sending, in order
  bool saw_connected = false;
  bool reset = false;   // the system reported the connection was reset
  bool peer_closed = false;
  bool self_closed = false;
};

// One scan over the buffer: complete lines are reversed (line feed kept),
// the incomplete tail stays buffered.  An empty line means "stop": the
// reply and the buffer are discarded and `close` is set.
struct LineSplit {
  Bytes reply;
  bool close = false;
};

inline LineSplit reverse_complete_lines(Bytes& buf) {
  LineSplit out;
  std::size_t start = 0;
  for (std::size_t i = 0; i < buf.size(); ++i) {
    if (buf[i] != '\n') continue;
    if (i == start) {
      out.close = true;
      out.reply.clear();
      buf.clear();
      return out;
    }
    out.reply.insert(out.reply.end(), std::make_reverse_iterator(buf.begin() + i),
                     std::make_reverse_iterator(buf.begin() + start));
    out.reply.push_back('\n');
    start = i + 1;
  }
  buf.erase(buf.begin(), buf.begin() + start);
  return out;
}

// Runs the echo service over one full user session.  Never throws:
// violations abort the run into the report.
inline UserReport run_echo_user(UserChannel& chan) {
  UserReport rep;
  try {
    SessionToken t = new_session(shapes::user_session());
    t = chan.select_one(std::move(t), Message::unit(classes::open()));
    auto [created, t1] = chan.offer_one(std::move(t));
    (void)created;

    Branch est = chan.offer_two(std::move(t1),
                                class_picker(classes::connected()));
    if (!est.left()) {
      // The connection was reset before it was established.
      rep.reset = true;
      close(std::move(est.token), chan);
      return rep;
    }
    rep.saw_connected = true;

    SessionToken tok = std::move(est.token);
    Bytes buf;
    for (;;) {
      SessionToken body = rec_enter(std::move(tok));
      Branch b = chan.offer_two(std::move(body), class_picker(classes::data()));
      if (b.left()) {
        const Bytes& chunk = b.message.as_bytes();
        rep.received.insert(rep.received.end(), chunk.begin(), chunk.end());
        buf.insert(buf.end(), chunk.begin(), chunk.end());
        LineSplit ls = reverse_complete_lines(buf);
        if (ls.close) {
          rep.self_closed = true;
          SessionToken e = chan.select_right(std::move(b.token),
                                             Message::unit(classes::close()));
          close(std::move(e), chan);
          return rep;
        }
        rep.sent.insert(rep.sent.end(), ls.reply.begin(), ls.reply.end());
        // An empty reply is a legal answer: "nothing to send yet".
        tok = chan.select_left(std::move(b.token),
                               Message::bytes(classes::data(),
                                              std::move(ls.reply)));
        continue;
      }
      // The peer closed its direction; nothing more will be delivered, so
      // follow up with our own close.
      rep.peer_closed = true;
      SessionToken dr = rec_enter(std::move(b.token));
      SessionToken e = chan.select_right(std::move(dr),
                                         Message::unit(classes::close()));
      close(std::move(e), chan);
      return rep;
    }
  } catch (const std::exception& e) {
    rep.ok = false;
    rep.error = e.what();
    chan.release();
    return rep;
  }
}

}  // namespace stcp
