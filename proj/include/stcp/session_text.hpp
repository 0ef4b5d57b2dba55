// SPDX-License-Identifier: Apache-2.0
//
// Textual notation for session shapes.
//
//   shape  := 'end'
//           | 'rec' NAME '.' shape
//           | NAME                          (bound rec name, or library shape)
//           | '(' ROLE op CLASS ')' '.' shape
//           | '(' ROLE op '{' arm (',' arm)* '}' ')'
//   op     := '&' (offer: receive from ROLE) | '+' (select: send to ROLE)
//   arm    := CLASS '.' shape
//
// `/* ... */` comments and whitespace are ignored.  Names are identifiers
// ([A-Za-z_][A-Za-z0-9_]*).  A rec binder's name shadows a library shape of
// the same name inside its body.  Multi-arm blocks expand to the two-arm
// spine produced by expand_nary_offer/select, and the printer flattens that
// spine back, so print -> parse is the identity on shapes.

#pragma once

#include <cctype>
#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "stcp/error.hpp"
#include "stcp/session.hpp"

namespace stcp {

// Named shapes that texts can reference; references splice the shape in by
// structure.  Each definition must be closed (no free back-references).
class ShapeLib {
 public:
  ShapeP define(const std::string& name, ShapeP shape) {
    validate_shape(shape);
    if (defs_.count(name))
      throw shape_error("shape '" + name + "' is already defined");
    defs_.emplace(name, shape);
    return shape;
  }

  ShapeP define(const std::string& name, std::string_view text);  // below

  ShapeP find(const std::string& name) const {
    auto it = defs_.find(name);
    return it == defs_.end() ? nullptr : it->second;
  }

  bool contains(const std::string& name) const { return defs_.count(name); }

 private:
  std::map<std::string, ShapeP> defs_;
};

namespace detail {

class ShapeParser {
 public:
  ShapeParser(std::string_view text, const ShapeLib* lib)
      : text_(text), lib_(lib) {}

  ShapeP parse() {
    std::set<std::string> bound;
    ShapeP s = parse_shape(bound);
    skip_space();
    if (pos_ != text_.size()) fail("unexpected trailing input");
    validate_shape(s);
    return s;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < pos_ && i < text_.size(); ++i) {
      if (text_[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw shape_error("shape text error at line " + std::to_string(line) +
                      ", column " + std::to_string(col) + ": " + msg);
  }

  void skip_space() {
    for (;;) {
      while (pos_ < text_.size() &&
             std::isspace(static_cast<unsigned char>(text_[pos_])))
        ++pos_;
      if (pos_ + 1 < text_.size() && text_[pos_] == '/' &&
          text_[pos_ + 1] == '*') {
        std::size_t close = text_.find("*/", pos_ + 2);
        if (close == std::string_view::npos) fail("unterminated comment");
        pos_ = close + 2;
        continue;
      }
      return;
    }
  }

  bool eat(char c) {
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c, const char* what) {
    if (!eat(c)) fail(std::string("expected '") + c + "' " + what);
  }

  static bool ident_start(char c) {
    return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
  }
  static bool ident_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
  }

  std::string ident(const char* what) {
    skip_space();
    if (pos_ >= text_.size() || !ident_start(text_[pos_]))
      fail(std::string("expected ") + what);
    std::size_t start = pos_;
    while (pos_ < text_.size() && ident_char(text_[pos_])) ++pos_;
    return std::string(text_.substr(start, pos_ - start));
  }

  ShapeP parse_shape(std::set<std::string>& bound) {
    skip_space();
    if (eat('(')) return parse_step(bound);
    std::string word = ident("'end', 'rec', a name, or '('");
    if (word == "end") return Shape::end_();
    if (word == "rec") {
      std::string name = ident("a binder name after 'rec'");
      if (bound.count(name))
        fail("duplicate rec binder '" + name + "'");
      expect('.', "after the rec binder name");
      bound.insert(name);
      ShapeP body = parse_shape(bound);
      bound.erase(name);
      return Shape::rec(name, std::move(body));
    }
    if (bound.count(word)) return Shape::ref(word);
    if (lib_) {
      if (ShapeP s = lib_->find(word)) return s;
    }
    fail("unknown name '" + word +
         "' (not a bound rec binder or a library shape)");
  }

  ShapeP parse_step(std::set<std::string>& bound) {
    Role peer = Role::named(ident("a role name"));
    skip_space();
    bool is_offer;
    if (eat('&')) {
      is_offer = true;
    } else if (eat('+')) {
      is_offer = false;
    } else {
      fail("expected '&' or '+' after the role name");
    }
    skip_space();
    if (eat('{')) {
      std::vector<Arm> arms;
      for (;;) {
        MsgClass cls = MsgClass::named(ident("a message class"));
        expect('.', "after the branch label");
        arms.push_back(Arm{cls, parse_shape(bound)});
        if (eat(',')) continue;
        expect('}', "to close the branch block");
        break;
      }
      expect(')', "to close the step");
      skip_space();
      if (pos_ < text_.size() && text_[pos_] == '.')
        fail("a branch block carries its continuations; unexpected '.'");
      return is_offer ? expand_nary_offer(peer, std::move(arms))
                      : expand_nary_select(peer, std::move(arms));
    }
    MsgClass cls = MsgClass::named(ident("a message class or '{'"));
    expect(')', "to close the step");
    expect('.', "(a single-label step needs a continuation)");
    ShapeP cont = parse_shape(bound);
    return is_offer ? Shape::offer(peer, cls, std::move(cont))
                    : Shape::select(peer, cls, std::move(cont));
  }

  std::string_view text_;
  const ShapeLib* lib_;
  std::size_t pos_ = 0;
};

inline bool prints_inline(const Shape& s) {
  return s.kind() == ShapeKind::end || s.kind() == ShapeKind::ref;
}

inline void emit_shape(const Shape& s, std::size_t indent, std::string& out) {
  const std::string pad(indent, ' ');
  switch (s.kind()) {
    case ShapeKind::end:
      out += "end";
      return;
    case ShapeKind::ref:
      out += s.name();
      return;
    case ShapeKind::rec:
      out += "rec " + s.name() + " .\n" + pad;
      emit_shape(*s.body(), indent, out);
      return;
    default:
      break;
  }
  const char* op = s.is_offer() ? "&" : "+";
  auto arms = flat_arms(s);
  if (arms.size() == 1) {
    out += "(" + s.peer().name() + " " + op + " " + arms[0].cls.name() + ").";
    const Shape& cont = *arms[0].next;
    if (prints_inline(cont)) {
      out += " ";
      emit_shape(cont, indent, out);
    } else {
      out += "\n" + pad;
      emit_shape(cont, indent, out);
    }
    return;
  }
  out += "(" + s.peer().name() + " " + op + " {\n";
  const std::string arm_pad(indent + 2, ' ');
  for (std::size_t i = 0; i < arms.size(); ++i) {
    const Shape& cont = *arms[i].next;
    out += arm_pad + arms[i].cls.name() + ".";
    if (prints_inline(cont)) {
      out += " ";
      emit_shape(cont, indent + 2, out);
    } else {
      out += "\n" + arm_pad + "  ";
      emit_shape(cont, indent + 4, out);
    }
    out += (i + 1 < arms.size()) ? ",\n" : "\n";
  }
  out += pad + "})";
}

}  // namespace detail

inline ShapeP parse_shape(std::string_view text, const ShapeLib& lib) {
  return detail::ShapeParser(text, &lib).parse();
}

inline ShapeP parse_shape(std::string_view text) {
  return detail::ShapeParser(text, nullptr).parse();
}

inline ShapeP ShapeLib::define(const std::string& name,
                               std::string_view text) {
  return define(name, parse_shape(text, *this));
}

// Canonical pretty-printer; parse(print(s)) is structurally equal to s.
inline std::string print_shape(const Shape& s) {
  std::string out;
  detail::emit_shape(s, 0, out);
  out += "\n";
  return out;
}

inline std::string print_shape(const ShapeP& s) {
  if (!s) throw shape_error("print_shape on a null shape");
  return print_shape(*s);
}

}  // namespace stcp
