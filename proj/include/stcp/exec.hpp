// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <condition_variable>
#include <functional>
#include <mutex>

#include "stcp/clock.hpp"

// Blocking-and-time abstraction shared by queues, links, and channels.
//
// All shared state in a run (queue contents, link schedules) is guarded by
// the executor's single mutex. An operation that needs to block does so
// via await_locked() while holding that mutex; how the wait happens is the
// executor's business: the real executor parks the thread on a condition
// variable against the wall clock, while the simulation executor
// (sim.hpp) hands the run token to its deterministic scheduler and lets
// virtual time jump.

namespace stcp {

class Executor {
 public:
  virtual ~Executor() = default;

  virtual Instant now() = 0;
  virtual std::mutex& mu() = 0;

  // Blocks the calling process until pred() holds or `deadline` passes
  // (kNever = wait forever). Called with `l` locked on mu(); returns with
  // it locked. True iff pred() held at wake.
  virtual bool await_locked(std::unique_lock<std::mutex>& l, Instant deadline,
                            const std::function<bool()>& pred) = 0;

  // Wakes blocked processes so they re-check predicates. Call after
  // mutating shared state, with mu() held.
  virtual void notify_locked() = 0;
};

// Wall-clock executor for live runs: one mutex, one condition variable.
class RealExecutor final : public Executor {
 public:
  Instant now() override {
    auto d = std::chrono::steady_clock::now() - origin_;
    return std::chrono::duration_cast<std::chrono::milliseconds>(d).count();
  }

  std::mutex& mu() override { return mu_; }

  bool await_locked(std::unique_lock<std::mutex>& l, Instant deadline,
                    const std::function<bool()>& pred) override {
    while (!pred()) {
      if (deadline == kNever) {
        cv_.wait(l);
      } else {
        auto until = origin_ + std::chrono::milliseconds(deadline);
        if (cv_.wait_until(l, until) == std::cv_status::timeout &&
            now() >= deadline) {
          return pred();
        }
      }
    }
    return true;
  }

  void notify_locked() override { cv_.notify_all(); }

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  std::chrono::steady_clock::time_point origin_ =
      std::chrono::steady_clock::now();
};

// Adapter so components that only need timestamps can take a Clock.
class ExecutorClock final : public Clock {
 public:
  explicit ExecutorClock(Executor& ex) : ex_(&ex) {}
  Instant now() const override { return ex_->now(); }

 private:
  Executor* ex_;
};

}  // namespace stcp
