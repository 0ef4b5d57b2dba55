// SPDX-License-Identifier: Apache-2.0
//
// Line-oriented run reports.  Every role writes one event per line with a
// stable field order, so reports diff cleanly and double as golden files:
//
//   t=<ms> kind=state state=<TcpState>
//   t=<ms> kind=seg dir=tx|rx seg=<flags=... seq=... ack=... len=... win=...>
//   t=<ms> kind=user dir=sent|received cls=<MessageClass>
//   t=<ms> kind=note text=<free text>
//
// Times are milliseconds on the driving clock: virtual under the simulator,
// wall-clock otherwise.

#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "stcp/clock.hpp"
#include "stcp/message.hpp"
#include "stcp/tcp.hpp"
#include "stcp/wire.hpp"

namespace stcp {

class ReportLog {
 public:
  explicit ReportLog(std::function<Instant()> now) : now_(std::move(now)) {}

  void state(tcp::State s) {
    add("state", std::string("state=") + tcp::to_string(s));
  }

  void seg_tx(const wire::Segment& s) { seg("tx", s); }
  void seg_rx(const wire::Segment& s) { seg("rx", s); }

  void user(const char* dir, MsgClass cls) {
    add("user", std::string("dir=") + dir + " cls=" + cls.name());
  }

  void note(const std::string& text) { add("note", "text=" + text); }

  const std::vector<std::string>& lines() const { return lines_; }

  std::string text() const {
    std::string out;
    for (const std::string& line : lines_) {
      out += line;
      out += '\n';
    }
    return out;
  }

 private:
  void seg(const char* dir, const wire::Segment& s) {
    add("seg", std::string("dir=") + dir + " seg=<" + s.summary() + ">");
  }

  void add(const char* kind, const std::string& rest) {
    lines_.push_back("t=" + std::to_string(now_()) + " kind=" + kind + " " +
                     rest);
  }

  std::function<Instant()> now_;
  std::vector<std::string> lines_;
};

}  // namespace stcp
