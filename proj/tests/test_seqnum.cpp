// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <cstdint>
#include <random>
#include <vector>

#include "stcp/seqnum.hpp"

using namespace stcp::tcp;

namespace {

// Independent oracle on the 8-bit ring: walk forward from a one step at a
// time; a < b iff b is reached in fewer than half the ring, in at least one
// step. No modular shortcuts — this is deliberately the dumb definition.
bool walk_lt(uint8_t a, uint8_t b) {
  uint8_t cur = a;
  for (int steps = 1; steps <= 127; ++steps) {
    cur = static_cast<uint8_t>(cur + 1);
    if (cur == b) return true;
  }
  return false;
}

// Second, differently-shaped oracle for the 32-bit ring: two's-complement
// sign of the difference.
bool sign_lt(uint32_t a, uint32_t b) {
  return static_cast<int32_t>(b - a) > 0 && a != b;
}

}  // namespace

TEST_CASE("seq_lt matches the walk oracle exhaustively on the 8-bit ring",
          "[seqnum]") {
  for (int a = 0; a < 256; ++a) {
    for (int b = 0; b < 256; ++b) {
      const auto ua = static_cast<uint8_t>(a);
      const auto ub = static_cast<uint8_t>(b);
      if (seq_lt(ua, ub) != walk_lt(ua, ub)) {
        CAPTURE(a, b);
        REQUIRE(seq_lt(ua, ub) == walk_lt(ua, ub));
      }
    }
  }
  SUCCEED();
}

TEST_CASE("seq_lt matches the sign oracle on randomized 32-bit tuples",
          "[seqnum]") {
  std::mt19937 rng(0xc0ffee);
  std::uniform_int_distribution<uint32_t> any;
  std::uniform_int_distribution<int32_t> near(-4096, 4096);

  size_t checked = 0;
  for (int i = 0; i < 1'200'000; ++i) {
    const uint32_t a = any(rng);
    const uint32_t b = (i % 2 == 0)
                           ? any(rng)
                           : a + static_cast<uint32_t>(near(rng));
    if (seq_lt(a, b) != sign_lt(a, b)) {
      CAPTURE(a, b);
      REQUIRE(seq_lt(a, b) == sign_lt(a, b));
    }
    if (seq_lte(a, b) != (a == b || sign_lt(a, b))) {
      CAPTURE(a, b);
      REQUIRE(seq_lte(a, b) == (a == b || sign_lt(a, b)));
    }
    ++checked;
  }
  REQUIRE(checked >= 1'000'000);
}

TEST_CASE("seq_lt pinned edge cases", "[seqnum]") {
  // Irreflexive.
  REQUIRE_FALSE(seq_lt(uint32_t{0}, uint32_t{0}));
  REQUIRE_FALSE(seq_lt(uint32_t{0xdeadbeef}, uint32_t{0xdeadbeef}));
  REQUIRE(seq_lte(uint32_t{0xdeadbeef}, uint32_t{0xdeadbeef}));

  // Successor, including the wrap.
  REQUIRE(seq_lt(uint32_t{0}, uint32_t{1}));
  REQUIRE(seq_lt(uint32_t{0xffffffff}, uint32_t{0}));
  REQUIRE_FALSE(seq_lt(uint32_t{0}, uint32_t{0xffffffff}));

  // Largest forward distance: 2^31 - 1 is still "less than".
  REQUIRE(seq_lt(uint32_t{0}, uint32_t{0x7fffffff}));

  // The antipode is ambiguous; the comparison resolves it as "not less"
  // in both directions.
  REQUIRE_FALSE(seq_lt(uint32_t{0}, uint32_t{0x80000000}));
  REQUIRE_FALSE(seq_lt(uint32_t{0x80000000}, uint32_t{0}));
}

TEST_CASE("seq_between matches set membership built by walking", "[seqnum]") {
  std::mt19937 rng(0x5eed);
  std::uniform_int_distribution<int> byte(0, 255);

  for (int trial = 0; trial < 512; ++trial) {
    const auto lo = static_cast<uint8_t>(byte(rng));
    const auto hi = static_cast<uint8_t>(byte(rng));

    // Collect [lo, hi) by stepping from lo until hi appears.
    std::vector<bool> member(256, false);
    for (uint8_t cur = lo; cur != hi; cur = static_cast<uint8_t>(cur + 1)) {
      member[cur] = true;
    }

    for (int x = 0; x < 256; ++x) {
      const auto ux = static_cast<uint8_t>(x);
      if (seq_between(lo, ux, hi) != member[x]) {
        CAPTURE(int{lo}, x, int{hi});
        REQUIRE(seq_between(lo, ux, hi) == member[x]);
      }
    }
  }
  SUCCEED();
}

TEST_CASE("seq_between half-open bounds", "[seqnum]") {
  REQUIRE(seq_between(uint32_t{10}, uint32_t{10}, uint32_t{20}));
  REQUIRE(seq_between(uint32_t{10}, uint32_t{19}, uint32_t{20}));
  REQUIRE_FALSE(seq_between(uint32_t{10}, uint32_t{20}, uint32_t{20}));
  // Empty window admits nothing.
  REQUIRE_FALSE(seq_between(uint32_t{10}, uint32_t{10}, uint32_t{10}));
  // Window wrapping through zero.
  REQUIRE(seq_between(uint32_t{0xfffffff0}, uint32_t{3}, uint32_t{0x10}));
  REQUIRE(seq_between(uint32_t{0xfffffff0}, uint32_t{0xfffffffe}, uint32_t{0x10}));
  REQUIRE_FALSE(seq_between(uint32_t{0xfffffff0}, uint32_t{0x11}, uint32_t{0x10}));
}

TEST_CASE("seq_max picks the ring-forward maximum", "[seqnum]") {
  REQUIRE(seq_max(uint32_t{5}, uint32_t{9}) == 9);
  REQUIRE(seq_max(uint32_t{9}, uint32_t{5}) == 9);
  REQUIRE(seq_max(uint32_t{0xffffffff}, uint32_t{2}) == 2);
  REQUIRE(seq_max(uint32_t{7}, uint32_t{7}) == 7);
}
