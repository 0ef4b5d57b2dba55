// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <functional>
#include <memory>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "stcp/error.hpp"
#include "stcp/exec.hpp"

// Deterministic multi-process simulation.
//
// Each logical process (server driver, user role, scripted client,
// scenario director) runs on its own std::thread, but a single run token
// guarantees that exactly one of them executes at a time. A process gives
// the token up only by blocking in await_locked(); the scheduler then
// picks the next runnable process in fixed round-robin order. When every
// process is blocked waiting on the future, the virtual clock jumps
// straight to the earliest deadline — timeouts cost no wall time, and the
// whole interleaving is a pure function of the program, so runs are
// bit-reproducible.
//
// If every process is blocked forever (no deadline to jump to), the world
// is deadlocked; run() tears everything down and reports who was stuck
// where instead of hanging.

namespace stcp {

class SimWorld final : public Executor {
 public:
  SimWorld() = default;
  SimWorld(const SimWorld&) = delete;
  SimWorld& operator=(const SimWorld&) = delete;
  ~SimWorld() { join_all(); }

  // Registers a process. Spawn order is scheduling order.
  void spawn(std::string name, std::function<void()> body) {
    auto p = std::make_unique<Proc>();
    p->name = std::move(name);
    p->body = std::move(body);
    procs_.push_back(std::move(p));
  }

  // Runs all spawned processes to completion. Rethrows the first process
  // exception; throws channel_error on deadlock.
  void run() {
    std::unique_lock l(mu_);
    for (auto& p : procs_) {
      p->thread = std::thread([this, proc = p.get()] { thread_main(proc); });
    }

    size_t cursor = 0;
    std::exception_ptr first_error;
    std::string deadlock_report;

    while (true) {
      // A process that died with an exception poisons the whole run.
      for (auto& p : procs_) {
        if (p->st == Proc::St::done && p->error && !p->error_seen) {
          p->error_seen = true;
          if (!first_error) first_error = p->error;
        }
      }
      if (first_error) break;

      bool all_done = true;
      for (auto& p : procs_) all_done &= (p->st == Proc::St::done);
      if (all_done) break;

      Proc* pick = nullptr;
      const Instant t = now_.load(std::memory_order_relaxed);
      for (size_t i = 0; i < procs_.size() && !pick; ++i) {
        Proc* p = procs_[(cursor + i) % procs_.size()].get();
        const bool runnable =
            p->st == Proc::St::ready ||
            (p->st == Proc::St::blocked &&
             (t >= p->deadline || (p->pred && (*p->pred)())));
        if (runnable) {
          pick = p;
          cursor = ((cursor + i) % procs_.size() + 1) % procs_.size();
        }
      }

      if (pick) {
        pick->st = Proc::St::running;
        pick->cv.notify_all();
        sched_cv_.wait(l, [&] { return pick->st != Proc::St::running; });
        continue;
      }

      // Everyone is blocked: jump the virtual clock to the earliest
      // deadline, or report a deadlock when there is none.
      Instant next = kNever;
      for (auto& p : procs_) {
        if (p->st == Proc::St::blocked && p->deadline < next) {
          next = p->deadline;
        }
      }
      if (next == kNever) {
        deadlock_report = describe_deadlock();
        break;
      }
      now_.store(next, std::memory_order_relaxed);
    }

    abort_blocked(l);
    sched_cv_.wait(l, [&] {
      for (auto& p : procs_) {
        if (p->st != Proc::St::done) return false;
      }
      return true;
    });
    l.unlock();
    join_all();

    if (first_error) std::rethrow_exception(first_error);
    if (!deadlock_report.empty()) throw channel_error(deadlock_report);
    // Surface stragglers' errors (a process that failed during teardown).
    for (auto& p : procs_) {
      if (p->error && !p->error_seen) std::rethrow_exception(p->error);
    }
  }

  // --- Executor interface (called from inside processes) ---------------

  Instant now() override { return now_.load(std::memory_order_relaxed); }
  std::mutex& mu() override { return mu_; }

  bool await_locked(std::unique_lock<std::mutex>& l, Instant deadline,
                    const std::function<bool()>& pred) override {
    Proc* self = current_;
    if (!self) {
      throw std::logic_error("await_locked outside a simulated process");
    }
    while (true) {
      if (aborting_) throw channel_error("simulation aborted");
      if (pred()) return true;
      if (now() >= deadline) return false;
      self->st = Proc::St::blocked;
      self->deadline = deadline;
      self->pred = &pred;
      sched_cv_.notify_all();
      self->cv.wait(l, [&] { return self->st == Proc::St::running; });
      self->pred = nullptr;
      self->deadline = kNever;
    }
  }

  void notify_locked() override {
    // Nothing to do: the scheduler re-evaluates predicates every pick.
  }

  // Convenience for processes.
  void sleep_until(Instant t) {
    std::unique_lock l(mu_);
    await_locked(l, t, [] { return false; });
  }
  void sleep_for(int64_t ms) { sleep_until(now() + ms); }

  // Cooperative yield: give every other runnable process a turn.
  void yield() {
    std::unique_lock l(mu_);
    Proc* self = current_;
    if (!self) return;
    bool passed = false;
    await_locked(l, kNever, [&] {
      const bool ready = passed;
      passed = true;
      return ready;
    });
  }

 private:
  struct Proc {
    std::string name;
    std::function<void()> body;
    std::thread thread;
    std::condition_variable cv;
    enum class St { ready, running, blocked, done };
    St st = St::ready;
    Instant deadline = kNever;
    const std::function<bool()>* pred = nullptr;
    std::exception_ptr error;
    bool error_seen = false;
  };

  void thread_main(Proc* self) {
    current_ = self;
    {
      std::unique_lock l(mu_);
      self->cv.wait(l, [&] { return self->st == Proc::St::running; });
      if (aborting_) {
        self->st = Proc::St::done;
        sched_cv_.notify_all();
        return;
      }
    }
    try {
      self->body();
    } catch (...) {
      std::unique_lock l(mu_);
      self->error = std::current_exception();
    }
    std::unique_lock l(mu_);
    self->st = Proc::St::done;
    sched_cv_.notify_all();
  }

  void abort_blocked(std::unique_lock<std::mutex>&) {
    aborting_ = true;
    for (auto& p : procs_) {
      if (p->st == Proc::St::blocked || p->st == Proc::St::ready) {
        p->st = Proc::St::running;  // wake; await_locked throws on abort
        p->cv.notify_all();
      }
    }
  }

  std::string describe_deadlock() const {
    std::ostringstream os;
    os << "simulation deadlock at t=" << now_.load() << "ms:";
    for (const auto& p : procs_) {
      os << " [" << p->name << ": ";
      switch (p->st) {
        case Proc::St::done: os << "done"; break;
        case Proc::St::ready: os << "ready"; break;
        case Proc::St::running: os << "running"; break;
        case Proc::St::blocked:
          os << "blocked"
             << (p->deadline == kNever
                     ? std::string(" forever")
                     : " until t=" + std::to_string(p->deadline));
          break;
      }
      os << "]";
    }
    return os.str();
  }

  void join_all() {
    for (auto& p : procs_) {
      if (p->thread.joinable()) p->thread.join();
    }
  }

  std::mutex mu_;
  std::condition_variable sched_cv_;
  std::vector<std::unique_ptr<Proc>> procs_;
  std::atomic<Instant> now_{0};
  bool aborting_ = false;
  static inline thread_local Proc* current_ = nullptr;
};

}  // namespace stcp
