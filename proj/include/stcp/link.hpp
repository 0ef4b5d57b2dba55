// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <optional>
#include <random>
#include <set>
#include <utility>

#include "stcp/base.hpp"
#include "stcp/error.hpp"
#include "stcp/exec.hpp"

// In-memory duplex datagram link with seeded fault injection: the
// unreliable best-effort IP service that TCP is built to survive.
//
// Faults per direction, drawn from one generator in a fixed order, so a
// given (profile, seed, send sequence) always produces the same delivery
// schedule:
//   1. loss    — the datagram vanishes;
//   2. dup     — a second copy is scheduled at its own delay (a datagram
//                is delivered at most twice);
//   3. reorder — pairwise swap: the datagram is held back and scheduled
//                just after the next one sent in the same direction. A
//                held datagram also carries a flush deadline so that a
//                stream that simply stops cannot strand it forever.
// Datagrams are delivered whole, byte-identical to what was sent; there
// is no corruption model (crafted segments exercise the checksum path).

namespace stcp {

struct FaultProfile {
  double loss_p = 0.0;
  double dup_p = 0.0;
  double reorder_p = 0.0;
  int64_t delay_base_ms = 0;
  int64_t delay_jitter_ms = 0;
  uint64_t seed = 0;

  void validate() const {
    auto bad = [](double p) { return !(p >= 0.0 && p <= 1.0); };
    if (bad(loss_p) || bad(dup_p) || bad(reorder_p)) {
      throw config_error("fault probabilities must lie in [0, 1]");
    }
    if (delay_base_ms < 0 || delay_jitter_ms < 0) {
      throw config_error("delays must be non-negative");
    }
  }
};

struct LinkStats {
  uint64_t sent = 0;
  uint64_t delivered = 0;
  uint64_t dropped = 0;
  uint64_t duplicated = 0;
  uint64_t reordered = 0;
  uint64_t flushed = 0;  // held datagrams released by deadline, not by swap
};

namespace detail {

class LinkCore {
 public:
  LinkCore(Executor& ex, const FaultProfile& profile)
      : ex_(&ex), profile_(profile) {
    profile.validate();
    dir_[0].rng.seed(profile.seed ^ 0x9e3779b97f4a7c15ull);
    dir_[1].rng.seed(profile.seed ^ 0x2545f4914f6cdd1dull);
  }

  void send(int d, Bytes bytes) {
    std::unique_lock l(ex_->mu());
    Direction& dir = dir_[d];
    const Instant t = ex_->now();
    dir.stats.sent += 1;

    // Complete any pending pairwise swap first: the previously held
    // datagram goes out right after whatever this call schedules.
    std::optional<Held> prev = std::move(dir.held);
    dir.held.reset();

    if (draw(dir) < profile_.loss_p) {
      dir.stats.dropped += 1;
      // The newcomer is gone, but a held datagram must not leak: leave it
      // to its flush deadline.
      dir.held = std::move(prev);
      return;
    }

    const bool dup = profile_.dup_p > 0.0 && draw(dir) < profile_.dup_p;
    const bool swap = profile_.reorder_p > 0.0 && !prev.has_value() &&
                      draw(dir) < profile_.reorder_p;

    Instant latest = t;
    if (swap) {
      dir.stats.reordered += 1;
      dir.held = Held{bytes, t + delay(dir) + flush_slack()};
    } else {
      latest = std::max(latest, schedule(dir, t + delay(dir), bytes));
    }
    if (dup) {
      dir.stats.duplicated += 1;
      latest = std::max(latest, schedule(dir, t + delay(dir), bytes));
    }
    if (prev.has_value()) {
      // `swap` was suppressed above, so something was scheduled and the
      // held datagram can complete its swap strictly after it.
      schedule(dir, latest + 1, std::move(prev->bytes));
    }
    ex_->notify_locked();
  }

  std::optional<Bytes> recv(int d, Instant deadline) {
    std::unique_lock l(ex_->mu());
    Direction& dir = dir_[d];
    while (true) {
      const Instant t = ex_->now();
      if (dir.held && dir.held->flush_at <= t) {
        dir.stats.flushed += 1;
        schedule(dir, t, std::move(dir.held->bytes));
        dir.held.reset();
      }
      if (!dir.entries.empty() && dir.entries.begin()->at <= t) {
        Bytes out = std::move(
            dir.entries.extract(dir.entries.begin()).value().bytes);
        dir.stats.delivered += 1;
        ex_->notify_locked();
        return out;
      }
      if (t >= deadline) return std::nullopt;

      const Instant wake = std::min(deadline, next_event(dir));
      const uint64_t version = dir.version;
      ex_->await_locked(l, wake, [&] {
        return dir.version != version || deliverable(dir, ex_->now());
      });
    }
  }

  LinkStats stats(int d) {
    std::unique_lock l(ex_->mu());
    return dir_[d].stats;
  }

  Executor& executor() { return *ex_; }

 private:
  struct Entry {
    Instant at;
    uint64_t seq;
    mutable Bytes bytes;  // moved out on extract
    bool operator<(const Entry& o) const {
      return at != o.at ? at < o.at : seq < o.seq;
    }
  };
  struct Held {
    Bytes bytes;
    Instant flush_at;
  };
  struct Direction {
    std::mt19937_64 rng;
    std::set<Entry> entries;
    std::optional<Held> held;
    uint64_t next_seq = 0;
    uint64_t version = 0;
    LinkStats stats;
  };

  double draw(Direction& dir) {
    return std::uniform_real_distribution<double>(0.0, 1.0)(dir.rng);
  }

  Instant delay(Direction& dir) {
    Instant d = profile_.delay_base_ms;
    if (profile_.delay_jitter_ms > 0) {
      d += std::uniform_int_distribution<int64_t>(
          0, profile_.delay_jitter_ms)(dir.rng);
    }
    return d;
  }

  // Worst-case wait before a held datagram is released unswapped.
  Instant flush_slack() const {
    return 2 * (profile_.delay_base_ms + profile_.delay_jitter_ms) + 50;
  }

  Instant schedule(Direction& dir, Instant at, Bytes bytes) {
    dir.entries.insert(Entry{at, dir.next_seq++, std::move(bytes)});
    dir.version += 1;
    return at;
  }

  static bool deliverable(const Direction& dir, Instant t) {
    return (!dir.entries.empty() && dir.entries.begin()->at <= t) ||
           (dir.held && dir.held->flush_at <= t);
  }

  static Instant next_event(const Direction& dir) {
    Instant e = kNever;
    if (!dir.entries.empty()) e = dir.entries.begin()->at;
    if (dir.held) e = std::min(e, dir.held->flush_at);
    return e;
  }

  Executor* ex_;
  FaultProfile profile_;
  Direction dir_[2];
};

}  // namespace detail

// One side of a duplex link. Side s sends into direction s and receives
// from direction 1-s.
class LinkEndpoint {
 public:
  LinkEndpoint() = default;

  void send(Bytes datagram) { core_->send(side_, std::move(datagram)); }

  // Next datagram for this side, or nullopt once `deadline` passes.
  std::optional<Bytes> recv(Instant deadline) {
    return core_->recv(1 - side_, deadline);
  }

  Instant now() { return core_->executor().now(); }
  Executor& executor() { return core_->executor(); }

  // Fault counters for the direction this endpoint sends into / hears.
  LinkStats out_stats() { return core_->stats(side_); }
  LinkStats in_stats() { return core_->stats(1 - side_); }

 private:
  friend std::pair<LinkEndpoint, LinkEndpoint> link_pair(Executor&,
                                                         const FaultProfile&);
  LinkEndpoint(std::shared_ptr<detail::LinkCore> core, int side)
      : core_(std::move(core)), side_(side) {}

  std::shared_ptr<detail::LinkCore> core_;
  int side_ = 0;
};

inline std::pair<LinkEndpoint, LinkEndpoint> link_pair(
    Executor& ex, const FaultProfile& profile) {
  auto core = std::make_shared<detail::LinkCore>(ex, profile);
  return {LinkEndpoint(core, 0), LinkEndpoint(core, 1)};
}

}  // namespace stcp
