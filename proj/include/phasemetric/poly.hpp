#pragma once

// ScalarExpr: exact generalized polynomials.
//
// A term is c * x^a * exp(R) where c is rational, a is an integer (Laurent)
// exponent vector and R is an atom-free Laurent polynomial (empty R means no
// atom). Sums of such terms are closed under +, *, and d/dx_i, which is all
// the bracket calculus needs. Plain polynomials are the atom-free terms with
// a >= 0; they evaluate exactly at rational points.
//
// Numerically, a term whose atom evaluates to exp(-inf) is taken to be 0.
// This is how flat coefficients like exp(-1/x^2) are extended to x = 0.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "phasemetric/error.hpp"
#include "phasemetric/expr.hpp"
#include "phasemetric/rational.hpp"

namespace phasemetric {

inline constexpr int kMaxVars = 12;

struct Monomial {
  std::array<std::int16_t, kMaxVars> e{};

  int degree() const {
    int s = 0;
    for (auto v : e) s += v;
    return s;
  }
  bool has_negative() const {
    return std::any_of(e.begin(), e.end(), [](auto v) { return v < 0; });
  }
  Monomial operator+(const Monomial& o) const {
    Monomial r;
    for (int i = 0; i < kMaxVars; ++i) r.e[i] = static_cast<std::int16_t>(e[i] + o.e[i]);
    return r;
  }
  Monomial operator-() const {
    Monomial r;
    for (int i = 0; i < kMaxVars; ++i) r.e[i] = static_cast<std::int16_t>(-e[i]);
    return r;
  }
  // Graded lexicographic.
  bool operator<(const Monomial& o) const {
    int da = degree(), db = o.degree();
    if (da != db) return da < db;
    return e > o.e;
  }
  bool operator==(const Monomial& o) const = default;
};

using Laurent = std::map<Monomial, Rational>;

struct TermKey {
  Monomial mono;
  Laurent atom;  // exponent of the exp atom; empty = no atom

  bool operator<(const TermKey& o) const {
    if (!(mono == o.mono)) return mono < o.mono;
    return atom < o.atom;
  }
  bool operator==(const TermKey& o) const = default;
};

namespace detail {

inline void add_term(Laurent& m, const Monomial& k, const Rational& c) {
  if (c == 0) return;
  auto [it, inserted] = m.emplace(k, c);
  if (!inserted) {
    it->second += c;
    if (it->second == 0) m.erase(it);
  }
}

inline Laurent laurent_add(const Laurent& a, const Laurent& b) {
  Laurent r = a;
  for (const auto& [k, c] : b) add_term(r, k, c);
  return r;
}

inline Rational rational_pow(const Rational& base, int e) {
  Rational r = 1;
  Rational b = base;
  unsigned n = static_cast<unsigned>(e < 0 ? -e : e);
  while (n) {
    if (n & 1u) r *= b;
    b *= b;
    n >>= 1u;
  }
  if (e < 0) r = 1 / r;
  return r;
}

inline double int_pow(double b, int e) {
  if (e < 0) return 1.0 / int_pow(b, -e);
  double r = 1.0;
  while (e) {
    if (e & 1) r *= b;
    b *= b;
    e >>= 1;
  }
  return r;
}

}  // namespace detail

class ScalarExpr {
 public:
  using Terms = std::map<TermKey, Rational>;

  explicit ScalarExpr(int nvars = 0) : n_(nvars) {
    if (nvars < 0 || nvars > kMaxVars)
      throw Error(ErrorCode::InvalidArgument,
                  "at most " + std::to_string(kMaxVars) + " variables supported");
  }

  static ScalarExpr constant(int nvars, const Rational& c) {
    ScalarExpr r(nvars);
    r.add(TermKey{}, c);
    return r;
  }

  static ScalarExpr variable(int nvars, int i) {
    ScalarExpr r(nvars);
    TermKey k;
    k.mono.e[static_cast<std::size_t>(i)] = 1;
    r.add(k, 1);
    return r;
  }

  static ScalarExpr monomial(int nvars, const Monomial& m, const Rational& c) {
    ScalarExpr r(nvars);
    r.add(TermKey{m, {}}, c);
    return r;
  }

  /// Parses infix text; identifiers must be among `names` (index = variable).
  static ScalarExpr parse(std::string_view text, const std::vector<std::string>& names) {
    return from_ast(expr::parse(text), names);
  }

  static ScalarExpr from_ast(const expr::NodePtr& n, const std::vector<std::string>& names) {
    const int nv = static_cast<int>(names.size());
    using expr::Op;
    switch (n->op) {
      case Op::Const:
        if (!n->exact) throw Error(ErrorCode::Parse, "non-rational constant in exact expression");
        return constant(nv, *n->exact);
      case Op::Var:
        for (int i = 0; i < nv; ++i)
          if (names[static_cast<std::size_t>(i)] == n->name) return variable(nv, i);
        throw Error(ErrorCode::Parse, "unknown variable '" + n->name + "'");
      case Op::Add: return from_ast(n->a, names) + from_ast(n->b, names);
      case Op::Sub: return from_ast(n->a, names) - from_ast(n->b, names);
      case Op::Mul: return from_ast(n->a, names) * from_ast(n->b, names);
      case Op::Neg: return -from_ast(n->a, names);
      case Op::Div: {
        auto den = from_ast(n->b, names);
        auto inv = den.inverse();
        if (!inv) throw Error(ErrorCode::Parse, "division is only supported by a single term");
        return from_ast(n->a, names) * *inv;
      }
      case Op::Pow: {
        auto e = expr::eval_exact_constant(n->b);
        if (!e || !is_integer(*e))
          throw Error(ErrorCode::Parse, "exponents must be integer constants");
        long k = e->get_num().get_si();
        if (std::labs(k) > 1000) throw Error(ErrorCode::Parse, "exponent too large");
        auto base = from_ast(n->a, names);
        if (k >= 0) return base.pow(static_cast<unsigned>(k));
        auto inv = base.inverse();
        if (!inv) throw Error(ErrorCode::Parse, "negative powers are only supported for a single term");
        return inv->pow(static_cast<unsigned>(-k));
      }
      case Op::Call: {
        if (n->name != "exp")
          throw Error(ErrorCode::Parse, "function '" + n->name + "' is not supported in exact expressions");
        auto arg = from_ast(n->a, names);
        if (arg.has_atoms()) throw Error(ErrorCode::Parse, "nested exp is not supported");
        if (arg.is_zero()) return constant(nv, 1);
        TermKey k;
        for (const auto& [t, c] : arg.terms_) k.atom.emplace(t.mono, c);
        ScalarExpr r(nv);
        r.add(k, 1);
        return r;
      }
    }
    throw Error(ErrorCode::Parse, "unsupported expression");
  }

  int nvars() const { return n_; }
  const Terms& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }
  std::size_t size() const { return terms_.size(); }

  bool has_atoms() const {
    return std::any_of(terms_.begin(), terms_.end(), [](const auto& t) { return !t.first.atom.empty(); });
  }
  bool is_polynomial() const {
    return std::all_of(terms_.begin(), terms_.end(), [](const auto& t) {
      return t.first.atom.empty() && !t.first.mono.has_negative();
    });
  }

  bool depends_on(int i) const {
    for (const auto& [k, c] : terms_) {
      if (k.mono.e[static_cast<std::size_t>(i)] != 0) return true;
      for (const auto& [m, rc] : k.atom)
        if (m.e[static_cast<std::size_t>(i)] != 0) return true;
    }
    return false;
  }

  /// Total degree in variables [first, last) if every term agrees, else nullopt.
  /// Terms whose atom involves those variables also yield nullopt.
  std::optional<int> homogeneous_degree(int first, int last) const {
    std::optional<int> deg;
    for (const auto& [k, c] : terms_) {
      int d = 0;
      for (int i = first; i < last; ++i) d += k.mono.e[static_cast<std::size_t>(i)];
      for (const auto& [m, rc] : k.atom)
        for (int i = first; i < last; ++i)
          if (m.e[static_cast<std::size_t>(i)] != 0) return std::nullopt;
      if (deg && *deg != d) return std::nullopt;
      deg = d;
    }
    return deg ? deg : std::optional<int>(0);
  }

  int max_degree() const {
    int d = 0;
    for (const auto& [k, c] : terms_) d = std::max(d, k.mono.degree());
    return d;
  }
  int min_degree() const {
    int d = 1 << 20;
    for (const auto& [k, c] : terms_) d = std::min(d, k.mono.degree());
    return terms_.empty() ? 0 : d;
  }

  /// If every term carries the same atom exp(R), returns (P, R) with this = P * exp(R).
  std::optional<std::pair<ScalarExpr, ScalarExpr>> split_common_atom() const {
    if (terms_.empty()) return std::nullopt;
    const Laurent& a = terms_.begin()->first.atom;
    if (a.empty()) return std::nullopt;
    ScalarExpr P(n_), R(n_);
    for (const auto& [k, c] : terms_) {
      if (k.atom != a) return std::nullopt;
      P.add(TermKey{k.mono, {}}, c);
    }
    for (const auto& [m, c] : a) R.add(TermKey{m, {}}, c);
    return std::make_pair(std::move(P), std::move(R));
  }

  /// Coefficient of an atom-free monomial.
  Rational coefficient(const Monomial& m) const {
    auto it = terms_.find(TermKey{m, {}});
    return it == terms_.end() ? Rational(0) : it->second;
  }

  ScalarExpr operator-() const {
    ScalarExpr r = *this;
    for (auto& [k, c] : r.terms_) c = -c;
    return r;
  }

  ScalarExpr& operator+=(const ScalarExpr& o) {
    check_compatible(o);
    for (const auto& [k, c] : o.terms_) add(k, c);
    return *this;
  }
  ScalarExpr& operator-=(const ScalarExpr& o) {
    check_compatible(o);
    for (const auto& [k, c] : o.terms_) add(k, -c);
    return *this;
  }
  friend ScalarExpr operator+(ScalarExpr a, const ScalarExpr& b) { return a += b; }
  friend ScalarExpr operator-(ScalarExpr a, const ScalarExpr& b) { return a -= b; }

  friend ScalarExpr operator*(const ScalarExpr& a, const ScalarExpr& b) {
    a.check_compatible(b);
    ScalarExpr r(std::max(a.n_, b.n_));
    for (const auto& [ka, ca] : a.terms_) {
      for (const auto& [kb, cb] : b.terms_) {
        TermKey k;
        k.mono = ka.mono + kb.mono;
        k.atom = ka.atom.empty() ? kb.atom
                 : kb.atom.empty() ? ka.atom
                                   : detail::laurent_add(ka.atom, kb.atom);
        r.add(k, ca * cb);
      }
    }
    return r;
  }
  friend ScalarExpr operator*(const Rational& s, ScalarExpr a) {
    if (s == 0) return ScalarExpr(a.n_);
    for (auto& [k, c] : a.terms_) c *= s;
    return a;
  }

  ScalarExpr pow(unsigned k) const {
    ScalarExpr r = constant(n_, 1);
    ScalarExpr b = *this;
    while (k) {
      if (k & 1u) r = r * b;
      k >>= 1u;
      if (k) b = b * b;
    }
    return r;
  }

  /// Multiplicative inverse of a single nonzero term.
  std::optional<ScalarExpr> inverse() const {
    if (terms_.size() != 1) return std::nullopt;
    const auto& [k, c] = *terms_.begin();
    TermKey ik;
    ik.mono = -k.mono;
    for (const auto& [m, rc] : k.atom) ik.atom.emplace(m, -rc);
    ScalarExpr r(n_);
    r.add(ik, 1 / c);
    return r;
  }

  ScalarExpr derivative(int i) const {
    const auto ui = static_cast<std::size_t>(i);
    ScalarExpr r(n_);
    for (const auto& [k, c] : terms_) {
      if (auto a = k.mono.e[ui]; a != 0) {
        TermKey dk = k;
        dk.mono.e[ui] = static_cast<std::int16_t>(a - 1);
        r.add(dk, c * a);
      }
      for (const auto& [m, rc] : k.atom) {
        if (auto b = m.e[ui]; b != 0) {
          TermKey dk = k;
          Monomial dm = m;
          dm.e[ui] = static_cast<std::int16_t>(b - 1);
          dk.mono = dk.mono + dm;
          r.add(dk, c * rc * b);
        }
      }
    }
    return r;
  }

  /// Antiderivative in x_i with zero constant of integration (polynomial terms only).
  ScalarExpr antiderivative(int i) const {
    const auto ui = static_cast<std::size_t>(i);
    ScalarExpr r(n_);
    for (const auto& [k, c] : terms_) {
      if (!k.atom.empty() || k.mono.e[ui] == -1)
        throw Error(ErrorCode::InvalidArgument, "antiderivative needs a polynomial in that variable");
      TermKey ik = k;
      ik.mono.e[ui] = static_cast<std::int16_t>(k.mono.e[ui] + 1);
      r.add(ik, c / ik.mono.e[ui]);
    }
    return r;
  }

  /// Substitutes x_i := value (rational), keeping the variable count.
  ScalarExpr substitute(int i, const Rational& value) const {
    const auto ui = static_cast<std::size_t>(i);
    ScalarExpr r(n_);
    for (const auto& [k, c] : terms_) {
      if (!k.atom.empty() && depends_atom(k.atom, i))
        throw Error(ErrorCode::InvalidArgument, "cannot substitute into an exp atom");
      int e = k.mono.e[ui];
      if (e < 0 && value == 0) throw Error(ErrorCode::NonFinite, "negative power of zero");
      TermKey sk = k;
      sk.mono.e[ui] = 0;
      r.add(sk, c * detail::rational_pow(value, e));
    }
    return r;
  }

  /// Re-indexes into a space with `nvars` variables, variable j -> j + offset.
  ScalarExpr embed(int nvars, int offset) const {
    ScalarExpr r(nvars);
    auto shift = [&](const Monomial& m) {
      Monomial s;
      for (int j = 0; j < n_; ++j) {
        if (m.e[static_cast<std::size_t>(j)] == 0) continue;
        if (j + offset >= nvars) throw Error(ErrorCode::InvalidArgument, "embed out of range");
        s.e[static_cast<std::size_t>(j + offset)] = m.e[static_cast<std::size_t>(j)];
      }
      return s;
    };
    for (const auto& [k, c] : terms_) {
      TermKey sk;
      sk.mono = shift(k.mono);
      for (const auto& [m, rc] : k.atom) sk.atom.emplace(shift(m), rc);
      r.add(sk, c);
    }
    return r;
  }

  /// Exact value at a rational point; nullopt if atoms are present or a
  /// negative power of zero occurs.
  std::optional<Rational> eval_exact(std::span<const Rational> x) const {
    Rational sum = 0;
    for (const auto& [k, c] : terms_) {
      if (!k.atom.empty()) return std::nullopt;
      Rational t = c;
      for (int i = 0; i < n_; ++i) {
        int e = k.mono.e[static_cast<std::size_t>(i)];
        if (e == 0) continue;
        if (e < 0 && x[static_cast<std::size_t>(i)] == 0) return std::nullopt;
        t *= detail::rational_pow(x[static_cast<std::size_t>(i)], e);
      }
      sum += t;
    }
    return sum;
  }

  double eval(std::span<const double> x) const {
    double sum = 0.0;
    for (const auto& [k, c] : terms_) {
      double t = c.get_d();
      if (!k.atom.empty()) {
        double R = 0.0;
        for (const auto& [m, rc] : k.atom) R += rc.get_d() * mono_value(m, x);
        if (std::isnan(R) || R == -INFINITY) continue;
        t *= std::exp(R);
      }
      t *= mono_value(k.mono, x);
      sum += t;
    }
    return sum;
  }

  /// True when the lead (last in graded-lex order) coefficient is negative.
  bool lead_negative() const { return !terms_.empty() && terms_.rbegin()->second < 0; }

  ScalarExpr sign_normalized() const { return lead_negative() ? -*this : *this; }

  bool operator==(const ScalarExpr& o) const { return terms_ == o.terms_; }
  bool operator<(const ScalarExpr& o) const { return terms_ < o.terms_; }

  std::string to_string(const std::vector<std::string>& names) const {
    if (terms_.empty()) return "0";
    std::string s;
    for (auto it = terms_.rbegin(); it != terms_.rend(); ++it) {
      const auto& [k, c] = *it;
      Rational ac = abs(c);
      if (s.empty()) {
        if (c < 0) s += "-";
      } else {
        s += c < 0 ? " - " : " + ";
      }
      std::string body = mono_string(k.mono, names);
      if (!k.atom.empty()) {
        std::string a = "exp(" + laurent_string(k.atom, names) + ")";
        body = body.empty() ? a : body + "*" + a;
      }
      if (body.empty()) {
        s += ac.get_str();
      } else if (ac == 1) {
        s += body;
      } else {
        s += ac.get_str() + "*" + body;
      }
    }
    return s;
  }

 private:
  static bool depends_atom(const Laurent& a, int i) {
    for (const auto& [m, c] : a)
      if (m.e[static_cast<std::size_t>(i)] != 0) return true;
    return false;
  }

  static double mono_value(const Monomial& m, std::span<const double> x) {
    double t = 1.0;
    for (std::size_t i = 0; i < x.size() && i < m.e.size(); ++i)
      if (m.e[i] != 0) t *= detail::int_pow(x[i], m.e[i]);
    return t;
  }

  static std::string mono_string(const Monomial& m, const std::vector<std::string>& names) {
    std::string s;
    for (std::size_t i = 0; i < names.size(); ++i) {
      int e = m.e[i];
      if (e == 0) continue;
      if (!s.empty()) s += "*";
      s += names[i];
      if (e != 1) s += "^" + std::to_string(e);
    }
    return s;
  }

  static std::string laurent_string(const Laurent& a, const std::vector<std::string>& names) {
    std::string s;
    for (auto it = a.rbegin(); it != a.rend(); ++it) {
      const auto& [m, c] = *it;
      std::string body = mono_string(m, names);
      Rational ac = abs(c);
      if (s.empty()) {
        if (c < 0) s += "-";
      } else {
        s += c < 0 ? " - " : " + ";
      }
      if (body.empty()) {
        s += ac.get_str();
      } else if (ac == 1) {
        s += body;
      } else {
        s += ac.get_str() + "*" + body;
      }
    }
    return s;
  }

  void check_compatible(const ScalarExpr& o) const {
    if (n_ != o.n_ && !is_zero() && !o.is_zero() && n_ != 0 && o.n_ != 0)
      throw Error(ErrorCode::InvalidArgument, "mixing expressions over different variable sets");
  }

  void add(const TermKey& k, const Rational& c) {
    if (c == 0) return;
    auto [it, inserted] = terms_.emplace(k, c);
    if (!inserted) {
      it->second += c;
      if (it->second == 0) terms_.erase(it);
    }
  }

  int n_;
  Terms terms_;
};

/// Flattened double-precision evaluator for a ScalarExpr.
class CompiledExpr {
 public:
  CompiledExpr() = default;
  explicit CompiledExpr(const ScalarExpr& e) {
    for (const auto& [k, c] : e.terms()) {
      Term t;
      t.c = c.get_d();
      t.factors = factors_of(k.mono);
      if (!k.atom.empty()) {
        t.atom = static_cast<int>(atoms_.size());
        std::vector<Term> a;
        for (const auto& [m, rc] : k.atom) a.push_back(Term{rc.get_d(), factors_of(m), -1});
        atoms_.push_back(std::move(a));
      }
      terms_.push_back(std::move(t));
    }
  }

  bool is_zero() const { return terms_.empty(); }

  double operator()(std::span<const double> x) const {
    double sum = 0.0;
    for (const auto& t : terms_) {
      double v = t.c;
      if (t.atom >= 0) {
        double R = 0.0;
        for (const auto& a : atoms_[static_cast<std::size_t>(t.atom)]) R += a.c * factor_value(a, x);
        if (std::isnan(R) || R == -INFINITY) continue;
        v *= std::exp(R);
      }
      sum += v * factor_value(t, x);
    }
    return sum;
  }

 private:
  struct Term {
    double c = 0.0;
    std::vector<std::pair<int, int>> factors;  // (variable, exponent)
    int atom = -1;
  };

  static std::vector<std::pair<int, int>> factors_of(const Monomial& m) {
    std::vector<std::pair<int, int>> f;
    for (int i = 0; i < kMaxVars; ++i)
      if (m.e[static_cast<std::size_t>(i)] != 0) f.emplace_back(i, m.e[static_cast<std::size_t>(i)]);
    return f;
  }

  static double factor_value(const Term& t, std::span<const double> x) {
    double v = 1.0;
    for (auto [i, e] : t.factors) v *= detail::int_pow(x[static_cast<std::size_t>(i)], e);
    return v;
  }

  std::vector<Term> terms_;
  std::vector<std::vector<Term>> atoms_;
};

}  // namespace phasemetric
