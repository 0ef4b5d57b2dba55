// SPDX-License-Identifier: Apache-2.0
//
// Session-type action shapes and one-shot session tokens.
//
// A Shape is an immutable description of the next permitted interaction:
// offer (receive one of a set of labeled messages from a peer), select (send
// one), end, or recursion.  Shapes are plain trees; recursion is encoded by
// an explicit Rec binder plus named back-references (Ref nodes), so every
// cycle in the described protocol passes through one level of indirection
// and the in-memory structure itself stays acyclic.
//
// A SessionToken witnesses the right to perform the next action of one
// running session.  Tokens are move-only and additionally carry a runtime
// spent flag, so a second consumption attempt is rejected even in code that
// defeats the static move discipline.

#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "stcp/error.hpp"
#include "stcp/message.hpp"

namespace stcp {

class Shape;
using ShapeP = std::shared_ptr<const Shape>;

// Environment of a running session: maps each entered Rec binder's name to
// its Rec node, so Ref nodes can be resolved when a continuation is taken.
using Env = std::map<std::string, ShapeP>;

enum class ShapeKind {
  end,         // session complete
  offer_one,   // receive exactly one message class from peer
  offer_two,   // receive one of two branches from peer
  select_one,  // send exactly one message class to peer
  select_two,  // send one of two branches to peer
  rec,         // named recursion binder
  ref,         // back-reference to an enclosing rec binder
};

inline const char* to_string(ShapeKind k) {
  switch (k) {
    case ShapeKind::end: return "end";
    case ShapeKind::offer_one: return "offer_one";
    case ShapeKind::offer_two: return "offer_two";
    case ShapeKind::select_one: return "select_one";
    case ShapeKind::select_two: return "select_two";
    case ShapeKind::rec: return "rec";
    case ShapeKind::ref: return "ref";
  }
  return "?";
}

// One labeled branch: the message class that selects it and its continuation.
struct Arm {
  MsgClass cls;
  ShapeP next;
};

class Shape {
 public:
  ShapeKind kind() const { return kind_; }

  bool is_offer() const {
    return kind_ == ShapeKind::offer_one || kind_ == ShapeKind::offer_two;
  }
  bool is_select() const {
    return kind_ == ShapeKind::select_one || kind_ == ShapeKind::select_two;
  }
  bool is_comm() const { return is_offer() || is_select(); }

  Role peer() const {
    require(is_comm(), "peer() on a non-communication shape");
    return peer_;
  }

  // First (left) arm of any communication node.
  const Arm& left() const {
    require(is_comm(), "left() on a non-communication shape");
    return left_;
  }

  // A two-arm node either carries a second labeled arm, or is a "virtual"
  // node produced by N-ary expansion whose right side is a nested tree of
  // further cases.
  bool is_two() const {
    return kind_ == ShapeKind::offer_two || kind_ == ShapeKind::select_two;
  }
  bool is_virtual_two() const { return is_two() && !right_labeled_; }

  const Arm& right() const {
    require(is_two() && right_labeled_, "right() needs a labeled second arm");
    return right_;
  }

  // Nested continuation tree of a virtual two-arm node.
  ShapeP virtual_rest() const {
    require(is_virtual_two(), "virtual_rest() on a non-virtual shape");
    return right_.next;
  }

  const std::string& name() const {
    require(kind_ == ShapeKind::rec || kind_ == ShapeKind::ref,
            "name() on a shape without a name");
    return name_;
  }

  ShapeP body() const {
    require(kind_ == ShapeKind::rec, "body() on a non-rec shape");
    return body_;
  }

  // ---- factories ----------------------------------------------------------

  static ShapeP end_() { return make(Shape(ShapeKind::end)); }

  static ShapeP offer(Role peer, MsgClass cls, ShapeP next) {
    return one(ShapeKind::offer_one, peer, std::move(cls), std::move(next));
  }
  static ShapeP select(Role peer, MsgClass cls, ShapeP next) {
    return one(ShapeKind::select_one, peer, std::move(cls), std::move(next));
  }

  static ShapeP offer(Role peer, Arm first, Arm second) {
    return two(ShapeKind::offer_two, peer, std::move(first), std::move(second));
  }
  static ShapeP select(Role peer, Arm first, Arm second) {
    return two(ShapeKind::select_two, peer, std::move(first),
               std::move(second));
  }

  // Virtual two-arm node: `first` is a single case, `rest` holds the
  // remaining cases as a nested two-arm tree of the same family and peer.
  // These are the interior nodes produced by N-ary branching expansion.
  static ShapeP offer_more(Role peer, Arm first, ShapeP rest) {
    return more(ShapeKind::offer_two, peer, std::move(first), std::move(rest));
  }
  static ShapeP select_more(Role peer, Arm first, ShapeP rest) {
    return more(ShapeKind::select_two, peer, std::move(first),
                std::move(rest));
  }

  static ShapeP rec(std::string name, ShapeP body) {
    if (!body) throw shape_error("rec body must not be null");
    if (name.empty()) throw shape_error("rec binder needs a name");
    Shape s(ShapeKind::rec);
    s.name_ = std::move(name);
    s.body_ = std::move(body);
    return make(std::move(s));
  }

  static ShapeP ref(std::string name) {
    if (name.empty()) throw shape_error("ref needs a name");
    Shape s(ShapeKind::ref);
    s.name_ = std::move(name);
    return make(std::move(s));
  }

 private:
  explicit Shape(ShapeKind k)
      : kind_(k),
        peer_(Role::named("?")),
        left_{MsgClass::named("?"), nullptr},
        right_{MsgClass::named("?"), nullptr} {}

  void require(bool ok, const char* what) const {
    if (!ok) {
      throw shape_error(std::string(what) + " (shape kind is " +
                        to_string(kind_) + ")");
    }
  }

  static ShapeP make(Shape&& s) {
    return std::make_shared<const Shape>(std::move(s));
  }

  static ShapeP one(ShapeKind k, Role peer, MsgClass cls, ShapeP next) {
    if (!next) throw shape_error("arm continuation must not be null");
    Shape s(k);
    s.peer_ = peer;
    s.left_ = Arm{cls, std::move(next)};
    return make(std::move(s));
  }

  static ShapeP two(ShapeKind k, Role peer, Arm first, Arm second) {
    if (!first.next || !second.next)
      throw shape_error("arm continuation must not be null");
    Shape s(k);
    s.peer_ = peer;
    s.left_ = std::move(first);
    s.right_ = std::move(second);
    s.right_labeled_ = true;
    return make(std::move(s));
  }

  static ShapeP more(ShapeKind k, Role peer, Arm first, ShapeP rest) {
    if (!first.next || !rest)
      throw shape_error("arm continuation must not be null");
    if (rest->kind() != k || rest->peer() != peer) {
      throw shape_error(
          "the rest of a virtual branching node must be a two-arm node of "
          "the same family and peer");
    }
    Shape s(k);
    s.peer_ = peer;
    s.left_ = std::move(first);
    s.right_ = Arm{MsgClass::named("?"), std::move(rest)};
    s.right_labeled_ = false;
    return make(std::move(s));
  }

  ShapeKind kind_;
  Role peer_;
  Arm left_;
  Arm right_;
  bool right_labeled_ = false;
  std::string name_;
  ShapeP body_;
};

// ---- N-ary branching expansion ---------------------------------------------
//
// A list of n labeled branches becomes a spine of two-arm nodes: each step
// peels off one case on the left and nests the remaining cases on the right,
// so the n cases appear as the n-1 left arms plus the final right leaf, in
// declaration order, at depth n-1.

inline ShapeP expand_nary_offer(Role peer, std::vector<Arm> branches) {
  if (branches.empty())
    throw shape_error("expand_nary_offer: empty branch list");
  if (branches.size() == 1)
    return Shape::offer(peer, branches[0].cls, std::move(branches[0].next));
  if (branches.size() == 2)
    return Shape::offer(peer, std::move(branches[0]), std::move(branches[1]));
  Arm head = std::move(branches.front());
  branches.erase(branches.begin());
  return Shape::offer_more(peer, std::move(head),
                           expand_nary_offer(peer, std::move(branches)));
}

inline ShapeP expand_nary_select(Role peer, std::vector<Arm> branches) {
  if (branches.empty())
    throw shape_error("expand_nary_select: empty branch list");
  if (branches.size() == 1)
    return Shape::select(peer, branches[0].cls, std::move(branches[0].next));
  if (branches.size() == 2)
    return Shape::select(peer, std::move(branches[0]), std::move(branches[1]));
  Arm head = std::move(branches.front());
  branches.erase(branches.begin());
  return Shape::select_more(peer, std::move(head),
                            expand_nary_select(peer, std::move(branches)));
}

// All cases of a communication node in declaration order, descending through
// virtual nodes.  For one-arm nodes this is the single arm.
inline std::vector<Arm> flat_arms(const Shape& s) {
  std::vector<Arm> out;
  const Shape* at = &s;
  for (;;) {
    switch (at->kind()) {
      case ShapeKind::offer_one:
      case ShapeKind::select_one:
        out.push_back(at->left());
        return out;
      case ShapeKind::offer_two:
      case ShapeKind::select_two:
        out.push_back(at->left());
        if (!at->is_virtual_two()) {
          out.push_back(at->right());
          return out;
        }
        at = at->virtual_rest().get();
        break;
      default:
        throw shape_error(std::string("flat_arms on a ") +
                          to_string(at->kind()) + " shape");
    }
  }
}

// One-line descriptor for diagnostics, e.g. `(ClientSystem & {Ack, FinAck})`.
inline std::string summary(const Shape& s) {
  switch (s.kind()) {
    case ShapeKind::end: return "end";
    case ShapeKind::rec: return "rec " + s.name();
    case ShapeKind::ref: return "ref " + s.name();
    default: break;
  }
  const char* op = s.is_offer() ? "&" : "+";
  auto arms = flat_arms(s);
  std::string out = "(" + s.peer().name() + " " + op + " ";
  if (arms.size() == 1) {
    out += arms[0].cls.name();
  } else {
    out += "{";
    for (std::size_t i = 0; i < arms.size(); ++i) {
      if (i) out += ", ";
      out += arms[i].cls.name();
    }
    out += "}";
  }
  return out + ")";
}

// ---- structural equality ----------------------------------------------------

inline bool shapes_equal(const Shape& a, const Shape& b) {
  if (a.kind() != b.kind()) return false;
  switch (a.kind()) {
    case ShapeKind::end:
      return true;
    case ShapeKind::rec:
      return a.name() == b.name() && shapes_equal(*a.body(), *b.body());
    case ShapeKind::ref:
      return a.name() == b.name();
    case ShapeKind::offer_one:
    case ShapeKind::select_one:
      return a.peer() == b.peer() && a.left().cls == b.left().cls &&
             shapes_equal(*a.left().next, *b.left().next);
    case ShapeKind::offer_two:
    case ShapeKind::select_two:
      if (a.peer() != b.peer() || a.is_virtual_two() != b.is_virtual_two())
        return false;
      if (a.left().cls != b.left().cls ||
          !shapes_equal(*a.left().next, *b.left().next))
        return false;
      if (a.is_virtual_two())
        return shapes_equal(*a.virtual_rest(), *b.virtual_rest());
      return a.right().cls == b.right().cls &&
             shapes_equal(*a.right().next, *b.right().next);
  }
  return false;
}

inline bool shapes_equal(const ShapeP& a, const ShapeP& b) {
  if (!a || !b) return a == b;
  return shapes_equal(*a, *b);
}

// ---- validation --------------------------------------------------------------

namespace detail {

// Resolves each ref node to its binding rec node while checking that all refs
// are bound and no rec binder shadows an enclosing one.
inline void bind_refs(const ShapeP& s, std::map<std::string, ShapeP>& bound,
                      std::map<const Shape*, ShapeP>& targets) {
  switch (s->kind()) {
    case ShapeKind::end:
      return;
    case ShapeKind::ref: {
      auto it = bound.find(s->name());
      if (it == bound.end())
        throw shape_error("reference to unbound name '" + s->name() + "'");
      targets.emplace(s.get(), it->second);
      return;
    }
    case ShapeKind::rec: {
      if (bound.count(s->name()))
        throw shape_error("rec binder '" + s->name() +
                          "' shadows an enclosing binder of the same name");
      bound.emplace(s->name(), s);
      bind_refs(s->body(), bound, targets);
      bound.erase(s->name());
      return;
    }
    default: {
      bind_refs(s->left().next, bound, targets);
      if (s->is_two()) {
        if (s->is_virtual_two())
          bind_refs(s->virtual_rest(), bound, targets);
        else
          bind_refs(s->right().next, bound, targets);
      }
      return;
    }
  }
}

// Guardedness: unrolling must always reach an action node (offer, select or
// end) between consecutive visits to the same rec binder.  With refs resolved
// this reduces to cycle detection over the epsilon moves rec -> body and
// ref -> binder.
inline void check_guarded(const Shape* node,
                          const std::map<const Shape*, ShapeP>& targets,
                          std::set<const Shape*>& on_path,
                          std::set<const Shape*>& done) {
  for (;;) {
    if (node->kind() == ShapeKind::rec) {
      if (on_path.count(node))
        throw shape_error("unguarded recursion through binder '" +
                          node->name() + "'");
      if (done.count(node)) return;
      on_path.insert(node);
      check_guarded(node->body().get(), targets, on_path, done);
      on_path.erase(node);
      done.insert(node);
      return;
    }
    if (node->kind() == ShapeKind::ref) {
      node = targets.at(node).get();
      continue;
    }
    return;  // action node: the epsilon chain is broken here
  }
}

inline void walk_guardedness(const ShapeP& s,
                             const std::map<const Shape*, ShapeP>& targets) {
  std::set<const Shape*> on_path;
  std::set<const Shape*> done;
  // Seed the check at every node so recs nested under actions are covered.
  struct Walker {
    const std::map<const Shape*, ShapeP>& targets;
    std::set<const Shape*>& on_path;
    std::set<const Shape*>& done;
    void visit(const ShapeP& n) {
      switch (n->kind()) {
        case ShapeKind::end:
        case ShapeKind::ref:
          return;
        case ShapeKind::rec:
          check_guarded(n.get(), targets, on_path, done);
          visit(n->body());
          return;
        default:
          visit(n->left().next);
          if (n->is_two()) {
            if (n->is_virtual_two())
              visit(n->virtual_rest());
            else
              visit(n->right().next);
          }
          return;
      }
    }
  };
  Walker w{targets, on_path, done};
  w.visit(s);
}

}  // namespace detail

// Checks well-formedness: all refs bound, no shadowing binders, guarded
// recursion.  Virtual-node structure is enforced by the factories.
inline void validate_shape(const ShapeP& s) {
  if (!s) throw shape_error("null shape");
  std::map<std::string, ShapeP> bound;
  std::map<const Shape*, ShapeP> targets;
  detail::bind_refs(s, bound, targets);
  detail::walk_guardedness(s, targets);
}

// ---- session tokens -----------------------------------------------------------

class SessionToken;

namespace detail {
SessionToken resume(ShapeP s, Env env);
}

// One-shot witness of the next permitted action.  Move-only; a moved-from or
// consumed token is spent and every operation on it fails.
class SessionToken {
 public:
  SessionToken(SessionToken&& other)
      : shape_(std::move(other.shape_)),
        env_(std::move(other.env_)),
        spent_(other.spent_) {
    other.spent_ = true;
    other.shape_.reset();
  }

  SessionToken& operator=(SessionToken&& other) {
    if (this != &other) {
      shape_ = std::move(other.shape_);
      env_ = std::move(other.env_);
      spent_ = other.spent_;
      other.spent_ = true;
      other.shape_.reset();
    }
    return *this;
  }

  SessionToken(const SessionToken&) = delete;
  SessionToken& operator=(const SessionToken&) = delete;

  bool spent() const { return spent_; }

  const Shape& shape() const {
    check_live();
    return *shape_;
  }

  ShapeP shape_ptr() const {
    check_live();
    return shape_;
  }

  // Consumes the token: marks it spent and surrenders its witness state.
  std::pair<ShapeP, Env> take() {
    check_live();
    spent_ = true;
    return {std::move(shape_), std::move(env_)};
  }

 private:
  friend SessionToken detail::resume(ShapeP, Env);

  SessionToken(ShapeP s, Env env)
      : shape_(std::move(s)), env_(std::move(env)), spent_(false) {}

  void check_live() const {
    if (spent_)
      throw linearity_error(
          "session token consumed twice: the token was already spent");
  }

  ShapeP shape_;
  Env env_;
  bool spent_;
};

static_assert(!std::is_copy_constructible_v<SessionToken>,
              "session tokens must not be copyable");
static_assert(!std::is_copy_assignable_v<SessionToken>,
              "session tokens must not be copyable");

namespace detail {

// Builds the token for a continuation shape, resolving a back-reference to
// its rec binder through the session environment.
inline SessionToken resume(ShapeP s, Env env) {
  if (s->kind() == ShapeKind::ref) {
    auto it = env.find(s->name());
    if (it == env.end())
      throw shape_error("reference to unbound name '" + s->name() +
                        "' while resuming a session");
    s = it->second;
  }
  return SessionToken(std::move(s), std::move(env));
}

}  // namespace detail

// Starts a session: validates the shape and returns the unspent root token.
inline SessionToken new_session(ShapeP shape) {
  validate_shape(shape);
  return detail::resume(std::move(shape), Env{});
}

// Consumes a token witnessing a rec binder and returns a token for its body;
// back-references to the binder now resolve to this rec node.
inline SessionToken rec_enter(SessionToken token) {
  auto [s, env] = token.take();
  if (s->kind() != ShapeKind::rec)
    throw shape_error("rec_enter on " + summary(*s));
  env[s->name()] = s;
  return detail::resume(s->body(), std::move(env));
}

// Consumes a token witnessing a communication node and returns the token for
// the arm at `index` (in flat_arms order).  Transport-free stepping used by
// channels and interpreters after they decide which branch applies.
inline SessionToken choose_arm_index(SessionToken token, std::size_t index) {
  auto [s, env] = token.take();
  if (!s->is_comm())
    throw shape_error("choose_arm_index on " + summary(*s));
  auto arms = flat_arms(*s);
  if (index >= arms.size())
    throw shape_error("branch index " + std::to_string(index) +
                      " out of range for " + summary(*s));
  return detail::resume(arms[index].next, std::move(env));
}

// As above, picking the first arm labeled `cls` in declaration order.
inline SessionToken choose_arm(SessionToken token, MsgClass cls) {
  const Shape& s = token.shape();
  auto arms = flat_arms(s);
  for (std::size_t i = 0; i < arms.size(); ++i) {
    if (arms[i].cls == cls) return choose_arm_index(std::move(token), i);
  }
  throw shape_error("no branch labeled " + cls.name() + " in " + summary(s));
}

// ---- trace conformance ----------------------------------------------------------
//
// ShapeWalker replays an observed interaction trace against a shape.  Because
// distinct branches may reuse one message class (pickers disambiguate at run
// time), the walker tracks the set of positions compatible with the trace so
// far and rejects an event only when no position survives.

struct TraceEvent {
  enum class Dir { sent, received };
  Dir dir;
  Role peer;
  MsgClass cls;
};

inline std::string to_string(const TraceEvent& ev) {
  return std::string(ev.dir == TraceEvent::Dir::sent ? "sent " : "received ") +
         ev.cls.name() +
         (ev.dir == TraceEvent::Dir::sent ? " to " : " from ") +
         ev.peer.name();
}

class ShapeWalker {
 public:
  explicit ShapeWalker(ShapeP root) {
    validate_shape(root);
    states_.push_back(St{std::move(root), Env{}});
    close_eps(states_);
  }

  // Advances over one observed event; throws shape_error when the event fits
  // no live position.
  void step(const TraceEvent& ev) {
    std::vector<St> next;
    for (const St& st : states_) {
      const Shape& s = *st.node;
      if (!s.is_comm()) continue;
      bool fits_dir = (ev.dir == TraceEvent::Dir::received && s.is_offer()) ||
                      (ev.dir == TraceEvent::Dir::sent && s.is_select());
      if (!fits_dir || s.peer() != ev.peer) continue;
      for (const Arm& arm : flat_arms(s)) {
        if (arm.cls == ev.cls) next.push_back(St{arm.next, st.env});
      }
    }
    close_eps(next);
    if (next.empty())
      throw shape_error("trace violates session shape: " + to_string(ev) +
                        ", but the live positions were " + describe());
    states_ = std::move(next);
    ++steps_;
  }

  // True when the trace seen so far may stop here.
  bool may_end() const {
    for (const St& st : states_)
      if (st.node->kind() == ShapeKind::end) return true;
    return false;
  }

  void finish() const {
    if (!may_end())
      throw shape_error(
          "trace ended before the session shape permits: live positions " +
          describe());
  }

  std::size_t ambiguity() const { return states_.size(); }
  std::size_t steps() const { return steps_; }

  std::string describe() const {
    std::string out = "[";
    for (std::size_t i = 0; i < states_.size(); ++i) {
      if (i) out += "; ";
      out += summary(*states_[i].node);
    }
    return out + "]";
  }

 private:
  struct St {
    ShapeP node;
    Env env;
  };

  // Unwraps rec binders (binding them) and back-references until every state
  // rests on an action node; deduplicates identical positions.
  static void close_eps(std::vector<St>& states) {
    std::vector<St> out;
    for (St& st : states) {
      ShapeP node = std::move(st.node);
      Env env = std::move(st.env);
      for (;;) {
        if (node->kind() == ShapeKind::rec) {
          env[node->name()] = node;
          node = node->body();
        } else if (node->kind() == ShapeKind::ref) {
          node = env.at(node->name());
        } else {
          break;
        }
      }
      bool dup = false;
      for (const St& seen : out) {
        if (seen.node == node && seen.env == env) {
          dup = true;
          break;
        }
      }
      if (!dup) out.push_back(St{std::move(node), std::move(env)});
    }
    states = std::move(out);
  }

  std::vector<St> states_;
  std::size_t steps_ = 0;
};

}  // namespace stcp
