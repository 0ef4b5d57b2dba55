// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <deque>
#include <optional>
#include <string>
#include <utility>

#include "stcp/error.hpp"
#include "stcp/exec.hpp"

namespace stcp {

// Bounded FIFO between two processes, blocking on both ends, driven by an
// Executor so the same code runs under the simulator and the wall clock.
// close() wakes both sides; operations on a closed queue throw
// channel_error (a drained receiver gets the leftovers first).
template <typename T>
class MsgQueue {
 public:
  MsgQueue(Executor& ex, std::string name, size_t capacity)
      : ex_(&ex), name_(std::move(name)), cap_(capacity) {}

  MsgQueue(const MsgQueue&) = delete;
  MsgQueue& operator=(const MsgQueue&) = delete;

  void send(T v) {
    std::unique_lock l(ex_->mu());
    ex_->await_locked(l, kNever,
                      [&] { return closed_ || q_.size() < cap_; });
    if (closed_) throw channel_error("send on closed queue " + name_);
    q_.push_back(std::move(v));
    ex_->notify_locked();
  }

  // Next item, or nullopt once `deadline` passes. Throws channel_error
  // when the queue is closed and drained.
  std::optional<T> recv(Instant deadline) {
    std::unique_lock l(ex_->mu());
    ex_->await_locked(l, deadline, [&] { return closed_ || !q_.empty(); });
    if (!q_.empty()) {
      T v = std::move(q_.front());
      q_.pop_front();
      ex_->notify_locked();
      return v;
    }
    if (closed_) throw channel_error("recv on closed queue " + name_);
    return std::nullopt;
  }

  void close() {
    std::unique_lock l(ex_->mu());
    closed_ = true;
    ex_->notify_locked();
  }

  bool closed() const {
    std::unique_lock l(ex_->mu());
    return closed_;
  }

  size_t capacity() const { return cap_; }
  Executor& executor() { return *ex_; }

 private:
  Executor* ex_;
  std::string name_;
  size_t cap_;
  std::deque<T> q_;
  bool closed_ = false;
};

}  // namespace stcp
