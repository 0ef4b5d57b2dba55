// SPDX-License-Identifier: Apache-2.0
//
// Session-core tests: N-ary expansion against an independent structural
// oracle, text notation roundtrips (fixed corpus plus randomized shapes),
// recursion unrolling, one-shot token discipline, malformed-shape rejection,
// and trace conformance via ShapeWalker.

#include <random>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "stcp/session.hpp"
#include "stcp/session_text.hpp"

using namespace stcp;

namespace {

Role role_a() { return Role::named("A"); }
Role role_b() { return Role::named("B"); }

MsgClass cls_n(int i) { return MsgClass::named("C" + std::to_string(i)); }
MsgClass mark_n(int i) { return MsgClass::named("Mark" + std::to_string(i)); }

// Distinct, recognizable continuation for branch i of an expansion test.
ShapeP cont_n(int i) {
  return Shape::select(role_b(), mark_n(i), Shape::end_());
}

}  // namespace

// ---------------------------------------------------------------------------
// N-ary expansion: structural oracle
// ---------------------------------------------------------------------------

TEST_CASE("n-ary expansion produces the documented two-arm spine") {
  // Oracle: by the expansion recurrence, for n >= 3 the result is a chain of
  // virtual two-arm nodes whose left arms are cases 0..n-3 in order, ending
  // in a labeled two-arm node holding cases n-2 and n-1.  This walk spells
  // that recurrence out independently of flat_arms.
  for (int offer_side = 0; offer_side <= 1; ++offer_side) {
    for (int n = 1; n <= 8; ++n) {
      std::vector<Arm> arms;
      std::vector<const Shape*> conts;
      for (int i = 0; i < n; ++i) {
        ShapeP c = cont_n(i);
        conts.push_back(c.get());
        arms.push_back(Arm{cls_n(i), std::move(c)});
      }
      ShapeP s = offer_side ? expand_nary_offer(role_a(), arms)
                            : expand_nary_select(role_a(), arms);
      ShapeKind one = offer_side ? ShapeKind::offer_one : ShapeKind::select_one;
      ShapeKind two = offer_side ? ShapeKind::offer_two : ShapeKind::select_two;

      if (n == 1) {
        REQUIRE(s->kind() == one);
        CHECK(s->peer() == role_a());
        CHECK(s->left().cls == cls_n(0));
        CHECK(s->left().next.get() == conts[0]);
        continue;
      }

      // Walk the spine, collecting leaves in left-to-right order and
      // counting the two-arm nodes (the tree depth).
      std::vector<std::pair<MsgClass, const Shape*>> leaves;
      int depth = 0;
      const Shape* at = s.get();
      for (;;) {
        REQUIRE(at->kind() == two);
        REQUIRE(at->peer() == role_a());
        ++depth;
        leaves.emplace_back(at->left().cls, at->left().next.get());
        if (!at->is_virtual_two()) {
          leaves.emplace_back(at->right().cls, at->right().next.get());
          break;
        }
        at = at->virtual_rest().get();
      }

      CHECK(depth == n - 1);
      REQUIRE(leaves.size() == static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) {
        CHECK(leaves[i].first == cls_n(i));
        // Continuations are shared, not cloned.
        CHECK(leaves[i].second == conts[i]);
      }
      if (n == 2) CHECK_FALSE(s->is_virtual_two());

      // Library flattener agrees with the oracle walk.
      auto flat = flat_arms(*s);
      REQUIRE(flat.size() == static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) CHECK(flat[i].cls == cls_n(i));
    }
  }
}

TEST_CASE("expansion keeps duplicate labels as distinct branches") {
  MsgClass ack = classes::ack();
  std::vector<Arm> arms{{ack, cont_n(0)}, {ack, cont_n(1)},
                        {classes::rst(), cont_n(2)}};
  const Shape* c0 = arms[0].next.get();
  const Shape* c1 = arms[1].next.get();
  ShapeP s = expand_nary_offer(role_a(), arms);
  auto flat = flat_arms(*s);
  REQUIRE(flat.size() == 3);
  CHECK(flat[0].cls == ack);
  CHECK(flat[1].cls == ack);
  CHECK(flat[0].next.get() == c0);
  CHECK(flat[1].next.get() == c1);
}

TEST_CASE("expansion rejects an empty branch list") {
  CHECK_THROWS_AS(expand_nary_offer(role_a(), {}), shape_error);
  CHECK_THROWS_AS(expand_nary_select(role_a(), {}), shape_error);
}

TEST_CASE("virtual nodes only accept a two-arm rest of the same family") {
  Arm arm{cls_n(0), Shape::end_()};
  CHECK_THROWS_AS(Shape::offer_more(role_a(), arm, Shape::end_()),
                  shape_error);
  ShapeP sel2 = Shape::select(role_a(), Arm{cls_n(1), Shape::end_()},
                              Arm{cls_n(2), Shape::end_()});
  CHECK_THROWS_AS(Shape::offer_more(role_a(), arm, sel2), shape_error);
  ShapeP off2_other_peer = Shape::offer(role_b(), Arm{cls_n(1), Shape::end_()},
                                        Arm{cls_n(2), Shape::end_()});
  CHECK_THROWS_AS(Shape::offer_more(role_a(), arm, off2_other_peer),
                  shape_error);
}

// ---------------------------------------------------------------------------
// Text notation
// ---------------------------------------------------------------------------

TEST_CASE("notation builds the documented structures") {
  SECTION("request/response chain") {
    ShapeP s = parse_shape("(Client & Request).(Client + Response).end");
    REQUIRE(s->kind() == ShapeKind::offer_one);
    CHECK(s->peer() == Role::named("Client"));
    CHECK(s->left().cls == MsgClass::named("Request"));
    const Shape& sel = *s->left().next;
    REQUIRE(sel.kind() == ShapeKind::select_one);
    CHECK(sel.peer() == Role::named("Client"));
    CHECK(sel.left().cls == MsgClass::named("Response"));
    CHECK(sel.left().next->kind() == ShapeKind::end);
  }

  SECTION("bare end") {
    CHECK(parse_shape("end")->kind() == ShapeKind::end);
  }

  SECTION("two-branch close offer resolves a library name") {
    ShapeLib lib;
    lib.define("FinWaitTwo", "(ClientSystem & FinAck).(ClientSystem + Ack).end");
    ShapeP s = parse_shape(
        "(ClientSystem & {"
        "  Ack. FinWaitTwo,"
        "  FinAck. (ClientSystem + Ack). end"
        "})",
        lib);
    REQUIRE(s->kind() == ShapeKind::offer_two);
    CHECK_FALSE(s->is_virtual_two());
    CHECK(s->left().cls == classes::ack());
    // The library shape is spliced in by structure.
    CHECK(s->left().next.get() == lib.find("FinWaitTwo").get());
    CHECK(s->right().cls == classes::fin_ack());
    REQUIRE(s->right().next->kind() == ShapeKind::select_one);
  }

  SECTION("comments are ignored") {
    ShapeP a = parse_shape("(A & /* acceptable */ C0). end /* done */");
    ShapeP b = parse_shape("(A & C0).end");
    CHECK(shapes_equal(a, b));
  }

  SECTION("single-arm branch block equals the single-label step") {
    CHECK(shapes_equal(parse_shape("(A & {C0. end})"),
                       parse_shape("(A & C0).end")));
  }
}

TEST_CASE("notation errors carry positions and reasons") {
  auto fails = [](std::string_view text) {
    CHECK_THROWS_AS(parse_shape(text), shape_error);
  };
  fails("");                                   // no shape at all
  fails("(A & C0) end");                       // missing '.' after step
  fails("(A & C0).");                          // missing continuation
  fails("end end");                            // trailing garbage
  fails("/* never closed");                    // unterminated comment
  fails("(A & {})");                           // empty branch block
  fails("(A & {C0. end}).end");                // block followed by '.'
  fails("(A % C0).end");                       // bad operator
  fails("Nope");                               // unknown name, no library
  fails("rec X . rec X . (A & C0). X");        // duplicate binder
  fails("rec X . X");                          // unguarded recursion
  CHECK_THROWS_WITH(parse_shape("(A & C0) end"),
                    Catch::Matchers::ContainsSubstring("line 1"));
}

namespace {

// The six named protocol shapes, written as the server-side listings.
ShapeLib protocol_lib() {
  ShapeLib lib;
  lib.define("FinWaitTwo", R"((ClientSystem & FinAck).(ClientSystem + Ack).end)");
  lib.define("FinWaitOne", R"(
      (ClientSystem & {
        Ack. FinWaitTwo,
        FinAck. (ClientSystem + Ack). end
      }))");
  lib.define("CloseWait", R"(
      rec CloseWait .
      (ServerUser & {
        Data. (ClientSystem + Ack). (ClientSystem & Ack). CloseWait,
        Close. (ClientSystem + FinAck). (ClientSystem & Ack). end
      }))");
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
        Ack. (ClientSystem + Ack). CommLoop
      }))");
  lib.define("SynRcvd", R"(
      rec SynRcvd .
      (ClientSystem & {
        Ack. (ServerUser + Connected). CommLoop,
        Ack. (ClientSystem + {
          Ack. SynRcvd,
          Rst. (ServerUser + Close). end
        })
      }))");
  lib.define("ServerSession", R"(
      (ServerUser & Open).
      (ServerUser + TcbCreated).
      (ClientSystem & Syn).
      (ClientSystem + SynAck).
      SynRcvd)");
  return lib;
}

}  // namespace

TEST_CASE("print -> parse roundtrips the protocol shapes") {
  ShapeLib lib = protocol_lib();
  for (const char* name : {"FinWaitTwo", "FinWaitOne", "CloseWait", "CommLoop",
                           "SynRcvd", "ServerSession"}) {
    INFO("shape " << name);
    ShapeP s = lib.find(name);
    REQUIRE(s);
    std::string text = print_shape(s);
    // Printed text is closed: all library references were spliced, so it
    // parses without any library.
    ShapeP back = parse_shape(text);
    CHECK(shapes_equal(s, back));
  }
}

TEST_CASE("the comm loop flattens to its four cases in order") {
  ShapeLib lib = protocol_lib();
  ShapeP loop = lib.find("CommLoop");
  REQUIRE(loop->kind() == ShapeKind::rec);
  auto arms = flat_arms(*loop->body());
  REQUIRE(arms.size() == 4);
  CHECK(arms[0].cls == classes::ack());
  CHECK(arms[1].cls == classes::ack());
  CHECK(arms[2].cls == classes::fin_ack());
  CHECK(arms[3].cls == classes::ack());
}

namespace {

// Random well-formed shape generator: rec bodies are always communication
// nodes (guardedness by construction), references target the currently
// enclosing binders only, and all names are identifiers.
class ShapeGen {
 public:
  explicit ShapeGen(std::uint64_t seed) : rng_(seed) {}

  ShapeP shape(int depth) {
    if (depth <= 0) return leaf();
    switch (pick(0, 9)) {
      case 0:
        return leaf();
      case 1:
      case 2: {
        std::string name = "X" + std::to_string(counter_++);
        bound_.push_back(name);
        ShapeP body = comm(depth - 1);
        bound_.pop_back();
        return Shape::rec(name, std::move(body));
      }
      default:
        return comm(depth - 1);
    }
  }

 private:
  ShapeP leaf() {
    if (!bound_.empty() && pick(0, 1) == 0)
      return Shape::ref(bound_[static_cast<std::size_t>(
          pick(0, static_cast<int>(bound_.size()) - 1))]);
    return Shape::end_();
  }

  ShapeP comm(int depth) {
    Role peer = Role::named(std::string("R") +
                            static_cast<char>('A' + pick(0, 2)));
    bool offer = pick(0, 1) == 0;
    int n = pick(1, 5);
    std::vector<Arm> arms;
    for (int i = 0; i < n; ++i) {
      // A small label pool makes duplicate labels common on purpose.
      arms.push_back(
          Arm{MsgClass::named("M" + std::to_string(pick(0, 3))), shape(depth)});
    }
    return offer ? expand_nary_offer(peer, std::move(arms))
                 : expand_nary_select(peer, std::move(arms));
  }

  int pick(int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(rng_);
  }

  std::mt19937_64 rng_;
  std::vector<std::string> bound_;
  int counter_ = 0;
};

}  // namespace

TEST_CASE("print -> parse roundtrips randomized shapes") {
  ShapeGen gen(0x5e55100u);
  for (int i = 0; i < 200; ++i) {
    INFO("random shape " << i);
    ShapeP s = gen.shape(4);
    REQUIRE_NOTHROW(validate_shape(s));
    ShapeP back = parse_shape(print_shape(s));
    REQUIRE(shapes_equal(s, back));
  }
}

// ---------------------------------------------------------------------------
// Tokens: recursion unrolling and linearity
// ---------------------------------------------------------------------------

TEST_CASE("rec_enter unrolls one level and back-references re-arm the rec") {
  ShapeP loop = parse_shape("rec Loop . (A & Ping).(A + Pong). Loop");
  REQUIRE(loop->kind() == ShapeKind::rec);

  SessionToken t0 = new_session(loop);
  REQUIRE(t0.shape().kind() == ShapeKind::rec);

  SessionToken t1 = rec_enter(std::move(t0));
  CHECK(t0.spent());
  // One unrolling: the token witnesses the rec body itself.
  CHECK(t1.shape_ptr().get() == loop->body().get());
  REQUIRE(t1.shape().kind() == ShapeKind::offer_one);

  SessionToken t2 = choose_arm(std::move(t1), classes::ping());
  REQUIRE(t2.shape().kind() == ShapeKind::select_one);

  SessionToken t3 = choose_arm(std::move(t2), classes::pong());
  // The continuation was the back-reference; it resolves to the binder.
  REQUIRE(t3.shape().kind() == ShapeKind::rec);
  CHECK(t3.shape_ptr().get() == loop.get());

  SessionToken t4 = rec_enter(std::move(t3));
  CHECK(t4.shape_ptr().get() == loop->body().get());
}

TEST_CASE("tokens are one-shot") {
  static_assert(!std::is_copy_constructible_v<SessionToken>);
  static_assert(!std::is_copy_assignable_v<SessionToken>);
  static_assert(std::is_move_constructible_v<SessionToken>);

  ShapeP loop = parse_shape("rec Loop . (A & Ping). Loop");

  SECTION("take() twice") {
    SessionToken t = new_session(loop);
    (void)t.take();
    CHECK_THROWS_AS(t.take(), linearity_error);
    CHECK_THROWS_AS(t.shape(), linearity_error);
  }

  SECTION("consuming after a move") {
    SessionToken t = new_session(loop);
    SessionToken u = rec_enter(std::move(t));
    CHECK(t.spent());
    CHECK_THROWS_AS(rec_enter(std::move(t)), linearity_error);
    CHECK_FALSE(u.spent());
  }

  SECTION("move assignment spends the source") {
    SessionToken t = new_session(loop);
    SessionToken u = new_session(loop);
    u = std::move(t);
    CHECK(t.spent());
    CHECK_FALSE(u.spent());
  }
}

TEST_CASE("stepping rejects shape mismatches") {
  ShapeP loop = parse_shape("rec Loop . (A & Ping).(A + Pong). Loop");

  SECTION("rec_enter on a non-rec token") {
    SessionToken t = new_session(parse_shape("(A & Ping).end"));
    CHECK_THROWS_AS(rec_enter(std::move(t)), shape_error);
  }
  SECTION("choose_arm on end") {
    SessionToken t = new_session(parse_shape("end"));
    CHECK_THROWS_AS(choose_arm(std::move(t), classes::ping()), shape_error);
  }
  SECTION("choose_arm on a rec binder") {
    SessionToken t = new_session(loop);
    CHECK_THROWS_AS(choose_arm(std::move(t), classes::ping()), shape_error);
  }
  SECTION("wrong class") {
    SessionToken t = new_session(parse_shape("(A & Ping).end"));
    CHECK_THROWS_AS(choose_arm(std::move(t), classes::rst()), shape_error);
  }
  SECTION("index out of range") {
    SessionToken t = new_session(parse_shape("(A & Ping).end"));
    CHECK_THROWS_AS(choose_arm_index(std::move(t), 1), shape_error);
  }
}

// ---------------------------------------------------------------------------
// Malformed shapes
// ---------------------------------------------------------------------------

TEST_CASE("malformed shapes are rejected at session start") {
  SECTION("unbound reference") {
    CHECK_THROWS_AS(new_session(Shape::ref("Nowhere")), shape_error);
    CHECK_THROWS_AS(
        new_session(Shape::offer(role_a(), cls_n(0), Shape::ref("Nowhere"))),
        shape_error);
  }
  SECTION("unguarded recursion") {
    CHECK_THROWS_AS(new_session(Shape::rec("A", Shape::ref("A"))),
                    shape_error);
    CHECK_THROWS_AS(
        new_session(Shape::rec("A", Shape::rec("B", Shape::ref("A")))),
        shape_error);
  }
  SECTION("guarded inner binder that loops through an outer one is fine") {
    // rec A . (RA & M0). rec B . A  — entering B resolves A, whose body is
    // an offer, so every cycle crosses an action: guarded, must be accepted.
    ShapeP s = Shape::rec(
        "A", Shape::offer(role_a(), cls_n(0),
                          Shape::rec("B", Shape::ref("A"))));
    CHECK_NOTHROW(validate_shape(s));
  }
  SECTION("shadowing binders") {
    ShapeP inner = Shape::rec("A", Shape::offer(role_a(), cls_n(1),
                                                Shape::ref("A")));
    ShapeP outer = Shape::rec("A", Shape::offer(role_a(), cls_n(0), inner));
    CHECK_THROWS_AS(new_session(outer), shape_error);
  }
}

// ---------------------------------------------------------------------------
// Trace conformance
// ---------------------------------------------------------------------------

namespace {

TraceEvent sent(Role peer, MsgClass cls) {
  return TraceEvent{TraceEvent::Dir::sent, peer, cls};
}
TraceEvent received(Role peer, MsgClass cls) {
  return TraceEvent{TraceEvent::Dir::received, peer, cls};
}

}  // namespace

TEST_CASE("walker accepts a full server-session trace") {
  ShapeLib lib = protocol_lib();
  Role user = Role::named("ServerUser");
  Role client = Role::named("ClientSystem");

  ShapeWalker w(lib.find("ServerSession"));
  w.step(received(user, classes::open()));
  w.step(sent(user, classes::tcb_created()));
  w.step(received(client, classes::syn()));
  w.step(sent(client, classes::syn_ack()));

  // Two Ack arms are live until the next event disambiguates.
  w.step(received(client, classes::ack()));
  CHECK(w.ambiguity() == 2);
  w.step(sent(user, classes::connected()));
  CHECK(w.ambiguity() == 1);

  // One data exchange through the comm loop.
  w.step(received(client, classes::ack()));
  w.step(sent(client, classes::ack()));
  w.step(sent(user, classes::data()));
  w.step(received(user, classes::data()));
  w.step(sent(client, classes::ack()));

  // Peer closes; we pass through close-wait and finish.
  w.step(received(client, classes::fin_ack()));
  w.step(sent(client, classes::ack()));
  w.step(sent(user, classes::close()));
  w.step(received(user, classes::close()));
  w.step(sent(client, classes::fin_ack()));
  w.step(received(client, classes::ack()));

  CHECK(w.may_end());
  REQUIRE_NOTHROW(w.finish());
}

TEST_CASE("walker rejects deviating traces with a diagnostic") {
  ShapeLib lib = protocol_lib();
  Role user = Role::named("ServerUser");
  Role client = Role::named("ClientSystem");

  SECTION("wrong class") {
    ShapeWalker w(lib.find("ServerSession"));
    CHECK_THROWS_WITH(w.step(received(user, classes::close())),
                      Catch::Matchers::ContainsSubstring("Open"));
  }
  SECTION("wrong direction") {
    ShapeWalker w(lib.find("ServerSession"));
    CHECK_THROWS_AS(w.step(sent(user, classes::open())), shape_error);
  }
  SECTION("wrong peer") {
    ShapeWalker w(lib.find("ServerSession"));
    CHECK_THROWS_AS(w.step(received(client, classes::open())), shape_error);
  }
  SECTION("premature finish") {
    ShapeWalker w(lib.find("ServerSession"));
    CHECK_FALSE(w.may_end());
    CHECK_THROWS_AS(w.finish(), shape_error);
  }
  SECTION("dead branch after disambiguation") {
    ShapeWalker w(lib.find("SynRcvd"));
    w.step(received(client, classes::ack()));
    CHECK(w.ambiguity() == 2);
    w.step(sent(client, classes::ack()));  // unacceptable path: challenge
    CHECK(w.ambiguity() == 1);
    // The acceptable path's Connected notification is no longer available.
    CHECK_THROWS_AS(w.step(sent(user, classes::connected())), shape_error);
  }
}
