#pragma once

// Infix expression grammar shared by operator files and scenario definitions:
//
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := ('-' | '+') unary | power
//   power   := primary ('^' unary)?           right associative
//   primary := number | name | name '(' expr ')' | '(' expr ')'
//
// Numbers are parsed exactly (decimals become rationals). No implicit
// multiplication.

#include <cctype>
#include <cmath>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "phasemetric/error.hpp"
#include "phasemetric/rational.hpp"

namespace phasemetric::expr {

enum class Op { Const, Var, Add, Sub, Mul, Div, Neg, Pow, Call };

struct Node;
using NodePtr = std::shared_ptr<const Node>;

struct Node {
  Op op = Op::Const;
  double value = 0.0;
  std::optional<Rational> exact;  // set for constants that are exact rationals
  std::string name;               // variable or function name
  int index = -1;                 // resolved variable index
  NodePtr a, b;
};

namespace detail {

inline NodePtr make_const(double v, std::optional<Rational> exact = std::nullopt) {
  auto n = std::make_shared<Node>();
  n->op = Op::Const;
  n->value = v;
  n->exact = std::move(exact);
  return n;
}

inline NodePtr make_exact(const Rational& r) { return make_const(r.get_d(), r); }

inline NodePtr make_node(Op op, NodePtr a, NodePtr b = nullptr, std::string name = {}) {
  auto n = std::make_shared<Node>();
  n->op = op;
  n->a = std::move(a);
  n->b = std::move(b);
  n->name = std::move(name);
  return n;
}

class Parser {
 public:
  explicit Parser(std::string_view text) : s_(text) {}

  NodePtr parse() {
    auto n = parse_expr();
    skip_ws();
    if (pos_ != s_.size()) fail("unexpected trailing input");
    return n;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const {
    throw Error(ErrorCode::Parse,
                msg + " at offset " + std::to_string(pos_) + " in '" + std::string(s_) + "'");
  }

  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  NodePtr parse_expr() {
    auto lhs = parse_term();
    for (;;) {
      if (accept('+')) {
        lhs = make_node(Op::Add, lhs, parse_term());
      } else if (accept('-')) {
        lhs = make_node(Op::Sub, lhs, parse_term());
      } else {
        return lhs;
      }
    }
  }

  NodePtr parse_term() {
    auto lhs = parse_unary();
    for (;;) {
      if (accept('*')) {
        lhs = make_node(Op::Mul, lhs, parse_unary());
      } else if (accept('/')) {
        lhs = make_node(Op::Div, lhs, parse_unary());
      } else {
        return lhs;
      }
    }
  }

  NodePtr parse_unary() {
    if (accept('-')) return make_node(Op::Neg, parse_unary());
    if (accept('+')) return parse_unary();
    return parse_power();
  }

  NodePtr parse_power() {
    auto base = parse_primary();
    if (accept('^')) return make_node(Op::Pow, base, parse_unary());
    return base;
  }

  NodePtr parse_primary() {
    skip_ws();
    if (pos_ >= s_.size()) fail("unexpected end of input");
    char c = s_[pos_];
    if (c == '(') {
      ++pos_;
      auto n = parse_expr();
      if (!accept(')')) fail("expected ')'");
      return n;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      std::size_t start = pos_;
      while (pos_ < s_.size() &&
             (std::isdigit(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '.'))
        ++pos_;
      Rational r = parse_rational(s_.substr(start, pos_ - start));
      return make_exact(r);
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t start = pos_;
      while (pos_ < s_.size() &&
             (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_'))
        ++pos_;
      std::string name(s_.substr(start, pos_ - start));
      if (accept('(')) {
        auto arg = parse_expr();
        if (!accept(')')) fail("expected ')' after function argument");
        return make_node(Op::Call, arg, nullptr, name);
      }
      auto n = std::make_shared<Node>();
      n->op = Op::Var;
      n->name = name;
      return n;
    }
    fail(std::string("unexpected character '") + c + "'");
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

}  // namespace detail

/// Parses text into an unresolved syntax tree (variables carry names only).
inline NodePtr parse(std::string_view text) { return detail::Parser(text).parse(); }

/// Evaluates a variable-free subtree exactly, if it only involves rational
/// arithmetic with integer powers.
inline std::optional<Rational> eval_exact_constant(const NodePtr& n) {
  switch (n->op) {
    case Op::Const: return n->exact;
    case Op::Var:
    case Op::Call: return std::nullopt;
    case Op::Neg: {
      auto a = eval_exact_constant(n->a);
      if (!a) return std::nullopt;
      return Rational(-*a);
    }
    case Op::Add:
    case Op::Sub:
    case Op::Mul:
    case Op::Div: {
      auto a = eval_exact_constant(n->a);
      auto b = eval_exact_constant(n->b);
      if (!a || !b) return std::nullopt;
      if (n->op == Op::Add) return Rational(*a + *b);
      if (n->op == Op::Sub) return Rational(*a - *b);
      if (n->op == Op::Mul) return Rational(*a * *b);
      if (*b == 0) return std::nullopt;
      return Rational(*a / *b);
    }
    case Op::Pow: {
      auto a = eval_exact_constant(n->a);
      auto b = eval_exact_constant(n->b);
      if (!a || !b || !is_integer(*b)) return std::nullopt;
      long e = b->get_num().get_si();
      if (std::abs(e) > 64) return std::nullopt;
      if (e < 0 && *a == 0) return std::nullopt;
      Rational r = 1;
      for (long i = 0; i < std::abs(e); ++i) r *= *a;
      if (e < 0) r = 1 / r;
      return r;
    }
  }
  return std::nullopt;
}

/// A real-valued expression over a fixed list of named variables, with
/// symbolic differentiation. Used for scenario parameters and witnesses.
class NumExpr {
 public:
  NumExpr() : root_(detail::make_const(0.0, Rational(0))) {}

  static NumExpr parse(std::string_view text, const std::vector<std::string>& names) {
    NumExpr e;
    e.root_ = resolve(expr::parse(text), names);
    return e;
  }

  static NumExpr constant(double v) {
    NumExpr e;
    e.root_ = detail::make_const(v);
    return e;
  }

  double eval(std::span<const double> vars) const { return eval_node(*root_, vars); }

  NumExpr derivative(int var) const {
    NumExpr e;
    e.root_ = diff(root_, var);
    return e;
  }

  /// Replaces variable `var` by a constant and folds.
  NumExpr bind(int var, double value) const {
    NumExpr e;
    e.root_ = substitute(root_, var, value);
    return e;
  }

  bool depends_on(int var) const { return depends(*root_, var); }
  bool is_constant() const { return root_->op == Op::Const; }
  double constant_value() const { return root_->value; }
  const NodePtr& root() const { return root_; }

 private:
  static NodePtr resolve(const NodePtr& n, const std::vector<std::string>& names) {
    if (n->op == Op::Var) {
      for (std::size_t i = 0; i < names.size(); ++i) {
        if (names[i] == n->name) {
          auto r = std::make_shared<Node>(*n);
          r->index = static_cast<int>(i);
          return r;
        }
      }
      if (n->name == "pi") return detail::make_const(M_PI);
      std::string allowed;
      for (const auto& s : names) allowed += (allowed.empty() ? "" : ", ") + s;
      throw Error(ErrorCode::Parse, "unknown variable '" + n->name + "' (allowed: " + allowed + ")");
    }
    if (n->op == Op::Call) {
      static const char* known[] = {"exp", "log", "sqrt", "abs", "sin", "cos", "sign"};
      bool ok = false;
      for (auto* k : known) ok = ok || n->name == k;
      if (!ok) throw Error(ErrorCode::Parse, "unknown function '" + n->name + "'");
    }
    if (n->op == Op::Const) return n;
    auto a = n->a ? resolve(n->a, names) : nullptr;
    auto b = n->b ? resolve(n->b, names) : nullptr;
    return fold(n->op, a, b, n->name);
  }

  static double call(const std::string& f, double x) {
    if (f == "exp") return std::exp(x);
    if (f == "log") return std::log(x);
    if (f == "sqrt") return std::sqrt(x);
    if (f == "abs") return std::fabs(x);
    if (f == "sin") return std::sin(x);
    if (f == "cos") return std::cos(x);
    if (f == "sign") return (x > 0) - (x < 0);
    return std::nan("");
  }

  static double eval_node(const Node& n, std::span<const double> v) {
    switch (n.op) {
      case Op::Const: return n.value;
      case Op::Var: return v[static_cast<std::size_t>(n.index)];
      case Op::Add: return eval_node(*n.a, v) + eval_node(*n.b, v);
      case Op::Sub: return eval_node(*n.a, v) - eval_node(*n.b, v);
      case Op::Mul: return eval_node(*n.a, v) * eval_node(*n.b, v);
      case Op::Div: return eval_node(*n.a, v) / eval_node(*n.b, v);
      case Op::Neg: return -eval_node(*n.a, v);
      case Op::Pow: {
        double base = eval_node(*n.a, v);
        if (n.b->op == Op::Const) {
          double e = n.b->value;
          if (e == 1.0) return base;
          if (e == 2.0) return base * base;
          return std::pow(base, e);
        }
        return std::pow(base, eval_node(*n.b, v));
      }
      case Op::Call: return call(n.name, eval_node(*n.a, v));
    }
    return std::nan("");
  }

  static bool depends(const Node& n, int var) {
    if (n.op == Op::Var) return n.index == var;
    if (n.op == Op::Const) return false;
    return (n.a && depends(*n.a, var)) || (n.b && depends(*n.b, var));
  }

  static bool is_zero(const NodePtr& n) { return n->op == Op::Const && n->value == 0.0; }
  static bool is_one(const NodePtr& n) { return n->op == Op::Const && n->value == 1.0; }

  // Smart constructor: constant folding plus 0/1 elimination.
  static NodePtr fold(Op op, NodePtr a, NodePtr b = nullptr, const std::string& name = {}) {
    using detail::make_const;
    using detail::make_node;
    bool ca = a && a->op == Op::Const;
    bool cb = b && b->op == Op::Const;
    if (op == Op::Neg) {
      if (ca) return a->exact ? detail::make_exact(-*a->exact) : make_const(-a->value);
      return make_node(op, a);
    }
    if (op == Op::Call) {
      if (ca) return make_const(call(name, a->value));
      return make_node(op, a, nullptr, name);
    }
    if (ca && cb) {
      auto tmp = make_node(op, a, b);
      if (auto r = eval_exact_constant(tmp)) return detail::make_exact(*r);
      double x = a->value, y = b->value;
      switch (op) {
        case Op::Add: return make_const(x + y);
        case Op::Sub: return make_const(x - y);
        case Op::Mul: return make_const(x * y);
        case Op::Div: return make_const(x / y);
        case Op::Pow: return make_const(std::pow(x, y));
        default: break;
      }
    }
    switch (op) {
      case Op::Add:
        if (is_zero(a)) return b;
        if (is_zero(b)) return a;
        break;
      case Op::Sub:
        if (is_zero(b)) return a;
        if (is_zero(a)) return fold(Op::Neg, b);
        break;
      case Op::Mul:
        if (is_zero(a) || is_zero(b)) return make_const(0.0, Rational(0));
        if (is_one(a)) return b;
        if (is_one(b)) return a;
        break;
      case Op::Div:
        if (is_zero(a)) return make_const(0.0, Rational(0));
        if (is_one(b)) return a;
        break;
      case Op::Pow:
        if (is_zero(b)) return make_const(1.0, Rational(1));
        if (is_one(b)) return a;
        break;
      default: break;
    }
    return make_node(op, a, b);
  }

  static NodePtr substitute(const NodePtr& n, int var, double value) {
    if (n->op == Op::Var) return n->index == var ? detail::make_const(value) : n;
    if (n->op == Op::Const) return n;
    auto a = n->a ? substitute(n->a, var, value) : nullptr;
    auto b = n->b ? substitute(n->b, var, value) : nullptr;
    return fold(n->op, a, b, n->name);
  }

  static NodePtr diff(const NodePtr& n, int var) {
    using detail::make_const;
    auto zero = make_const(0.0, Rational(0));
    switch (n->op) {
      case Op::Const: return zero;
      case Op::Var: return n->index == var ? make_const(1.0, Rational(1)) : zero;
      case Op::Add: return fold(Op::Add, diff(n->a, var), diff(n->b, var));
      case Op::Sub: return fold(Op::Sub, diff(n->a, var), diff(n->b, var));
      case Op::Neg: return fold(Op::Neg, diff(n->a, var));
      case Op::Mul:
        return fold(Op::Add, fold(Op::Mul, diff(n->a, var), n->b),
                    fold(Op::Mul, n->a, diff(n->b, var)));
      case Op::Div: {
        auto num = fold(Op::Sub, fold(Op::Mul, diff(n->a, var), n->b),
                        fold(Op::Mul, n->a, diff(n->b, var)));
        return fold(Op::Div, num, fold(Op::Mul, n->b, n->b));
      }
      case Op::Pow: {
        if (!depends(*n->b, var)) {
          auto em1 = fold(Op::Sub, n->b, make_const(1.0, Rational(1)));
          return fold(Op::Mul, fold(Op::Mul, n->b, fold(Op::Pow, n->a, em1)), diff(n->a, var));
        }
        // d(a^b) = a^b (b' log a + b a'/a)
        auto t1 = fold(Op::Mul, diff(n->b, var), fold(Op::Call, n->a, nullptr, "log"));
        auto t2 = fold(Op::Div, fold(Op::Mul, n->b, diff(n->a, var)), n->a);
        return fold(Op::Mul, n, fold(Op::Add, t1, t2));
      }
      case Op::Call: {
        auto da = diff(n->a, var);
        if (is_zero(da)) return zero;
        const auto& f = n->name;
        NodePtr outer;
        if (f == "exp") {
          outer = n;
        } else if (f == "log") {
          outer = fold(Op::Div, make_const(1.0, Rational(1)), n->a);
        } else if (f == "sqrt") {
          outer = fold(Op::Div, make_const(0.5, make_rational(1, 2)), n);
        } else if (f == "abs") {
          outer = fold(Op::Call, n->a, nullptr, "sign");
        } else if (f == "sin") {
          outer = fold(Op::Call, n->a, nullptr, "cos");
        } else if (f == "cos") {
          outer = fold(Op::Neg, fold(Op::Call, n->a, nullptr, "sin"));
        } else {
          outer = zero;  // sign: derivative zero almost everywhere
        }
        return fold(Op::Mul, outer, da);
      }
    }
    return zero;
  }

  NodePtr root_;
};

}  // namespace phasemetric::expr
