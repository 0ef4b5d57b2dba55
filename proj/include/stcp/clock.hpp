// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <cstdint>

namespace stcp {

// Milliseconds since an arbitrary per-run origin.
using Instant = int64_t;

constexpr Instant kNever = INT64_MAX;

// Time source used for timeout budgets and trace timestamps.
// Simulation mode supplies a virtual clock (sim.hpp); the raw backend
// uses the wall clock below.
class Clock {
 public:
  virtual ~Clock() = default;
  virtual Instant now() const = 0;
};

class WallClock final : public Clock {
 public:
  WallClock() : origin_(std::chrono::steady_clock::now()) {}

  Instant now() const override {
    auto d = std::chrono::steady_clock::now() - origin_;
    return std::chrono::duration_cast<std::chrono::milliseconds>(d).count();
  }

 private:
  std::chrono::steady_clock::time_point origin_;
};

}  // namespace stcp
