#pragma once

// Symbol calculus on T*R^d. Phase-space functions are ScalarExprs in 2d
// variables ordered (x_1..x_d, xi_1..xi_d).
//
// Conventions:
//   H_f    = sum_n (df/dxi_n d/dx_n - df/dx_n d/dxi_n)
//   {f, g} = H_f(g)
//   sigma_(I', j) = {sigma_j, sigma_I'}

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "phasemetric/error.hpp"
#include "phasemetric/linalg.hpp"
#include "phasemetric/poly.hpp"

namespace phasemetric {

/// Conventional dual names: x -> xi, y -> eta, t -> tau, z -> zeta, else p_<name>.
inline std::vector<std::string> fiber_names(const std::vector<std::string>& base) {
  static const std::map<std::string, std::string> dual = {
      {"x", "xi"}, {"y", "eta"}, {"t", "tau"}, {"z", "zeta"}, {"s", "sigma"}, {"u", "mu"}};
  std::vector<std::string> out;
  for (const auto& b : base) {
    auto it = dual.find(b);
    std::string name = it != dual.end() ? it->second : "p_" + b;
    if (std::find(base.begin(), base.end(), name) != base.end()) name = "p_" + b;
    out.push_back(name);
  }
  return out;
}

inline std::vector<std::string> phase_names(const std::vector<std::string>& base) {
  auto out = base;
  for (auto& f : fiber_names(base)) out.push_back(f);
  return out;
}

struct PhasePoint {
  std::vector<double> x;
  std::vector<double> xi;

  PhasePoint() = default;
  PhasePoint(std::vector<double> x_, std::vector<double> xi_) : x(std::move(x_)), xi(std::move(xi_)) {
    if (x.size() != xi.size()) throw Error(ErrorCode::InvalidArgument, "base and fiber dimensions differ");
    if (std::all_of(xi.begin(), xi.end(), [](double v) { return v == 0.0; }))
      throw Error(ErrorCode::InvalidArgument, "phase point lies on the zero section");
  }

  static PhasePoint from_vector(std::span<const double> v) {
    const std::size_t d = v.size() / 2;
    return PhasePoint({v.begin(), v.begin() + static_cast<long>(d)},
                      {v.begin() + static_cast<long>(d), v.end()});
  }

  int dim() const { return static_cast<int>(x.size()); }
  std::vector<double> to_vector() const {
    auto v = x;
    v.insert(v.end(), xi.begin(), xi.end());
    return v;
  }
  double fiber_norm() const {
    double s = 0;
    for (double v : xi) s += v * v;
    return std::sqrt(s);
  }
};

struct BaseVectorField {
  int d = 0;
  std::vector<ScalarExpr> coeffs;  // coefficient of d/dx_k, over d variables

  BaseVectorField() = default;
  explicit BaseVectorField(std::vector<ScalarExpr> c) : d(static_cast<int>(c.size())), coeffs(std::move(c)) {
    for (auto& a : coeffs) {
      if (a.is_zero()) a = ScalarExpr(d);
      if (a.nvars() != d)
        throw Error(ErrorCode::InvalidArgument, "vector field coefficient over the wrong variable count");
    }
  }

  static BaseVectorField parse(const std::vector<std::string>& texts, const std::vector<std::string>& names) {
    if (texts.size() != names.size())
      throw Error(ErrorCode::Parse, "a vector field needs one coefficient per base variable");
    std::vector<ScalarExpr> c;
    for (const auto& t : texts) c.push_back(ScalarExpr::parse(t, names));
    return BaseVectorField(std::move(c));
  }
};

class PhaseSymbol {
 public:
  PhaseSymbol() = default;
  PhaseSymbol(int d, ScalarExpr e) : d_(d), e_(std::move(e)) {
    if (e_.is_zero()) e_ = ScalarExpr(2 * d);
    if (e_.nvars() != 2 * d) throw Error(ErrorCode::InvalidArgument, "phase symbol needs 2d variables");
    for (const auto& [k, c] : e_.terms()) {
      for (int i = d; i < 2 * d; ++i) {
        if (k.mono.e[static_cast<std::size_t>(i)] < 0)
          throw Error(ErrorCode::InvalidArgument, "phase symbol must be polynomial in the fiber variables");
        for (const auto& [m, rc] : k.atom)
          if (m.e[static_cast<std::size_t>(i)] != 0)
            throw Error(ErrorCode::InvalidArgument, "fiber variables may not appear inside exp");
      }
    }
    degree_ = e_.homogeneous_degree(d, 2 * d);
  }

  static PhaseSymbol parse(std::string_view text, const std::vector<std::string>& base_names) {
    const int d = static_cast<int>(base_names.size());
    return PhaseSymbol(d, ScalarExpr::parse(text, phase_names(base_names)));
  }

  int dim() const { return d_; }
  const ScalarExpr& expr() const { return e_; }
  std::optional<int> fiber_degree() const { return degree_; }
  bool is_zero() const { return e_.is_zero(); }
  double operator()(std::span<const double> p) const { return e_.eval(p); }

  PhaseSymbol operator+(const PhaseSymbol& o) const { return {d_, e_ + o.e_}; }
  PhaseSymbol operator-(const PhaseSymbol& o) const { return {d_, e_ - o.e_}; }
  PhaseSymbol operator*(const PhaseSymbol& o) const { return {d_, e_ * o.e_}; }
  PhaseSymbol operator-() const { return {d_, -e_}; }
  bool operator==(const PhaseSymbol& o) const { return d_ == o.d_ && e_ == o.e_; }

  std::string to_string(const std::vector<std::string>& base_names) const {
    return e_.to_string(phase_names(base_names));
  }

 private:
  int d_ = 0;
  ScalarExpr e_;
  std::optional<int> degree_;
};

struct PhaseVectorField {
  int d = 0;
  std::vector<ScalarExpr> comps;  // 2d components: d/dx_n then d/dxi_n

  /// Applies the field to a phase-space function.
  ScalarExpr apply(const ScalarExpr& g) const {
    ScalarExpr r(2 * d);
    for (int i = 0; i < 2 * d; ++i) {
      const auto& c = comps[static_cast<std::size_t>(i)];
      if (c.is_zero()) continue;
      r += c * g.derivative(i);
    }
    return r;
  }

  std::vector<double> eval(std::span<const double> p) const {
    std::vector<double> v;
    for (const auto& c : comps) v.push_back(c.eval(p));
    return v;
  }
};

inline PhaseSymbol principal_symbol(const BaseVectorField& X) {
  const int d = X.d;
  ScalarExpr s(2 * d);
  for (int k = 0; k < d; ++k)
    s += X.coeffs[static_cast<std::size_t>(k)].embed(2 * d, 0) * ScalarExpr::variable(2 * d, d + k);
  return {d, s};
}

inline PhaseVectorField hamiltonian_field(const PhaseSymbol& f) {
  const int d = f.dim();
  PhaseVectorField H{d, std::vector<ScalarExpr>(static_cast<std::size_t>(2 * d), ScalarExpr(2 * d))};
  for (int n = 0; n < d; ++n) {
    H.comps[static_cast<std::size_t>(n)] = f.expr().derivative(d + n);
    H.comps[static_cast<std::size_t>(d + n)] = -f.expr().derivative(n);
  }
  return H;
}

inline PhaseSymbol poisson_bracket(const PhaseSymbol& f, const PhaseSymbol& g) {
  if (f.dim() != g.dim()) throw Error(ErrorCode::InvalidArgument, "bracket of symbols in different dimensions");
  const int d = f.dim();
  ScalarExpr r(2 * d);
  for (int n = 0; n < d; ++n) {
    auto fxi = f.expr().derivative(d + n);
    auto gx = g.expr().derivative(n);
    if (!fxi.is_zero() && !gx.is_zero()) r += fxi * gx;
    auto fx = f.expr().derivative(n);
    auto gxi = g.expr().derivative(d + n);
    if (!fx.is_zero() && !gxi.is_zero()) r -= fx * gxi;
  }
  return {d, r};
}

enum class SymbolMode { Bracket, PrincipalOnly };

inline const char* to_string(SymbolMode m) { return m == SymbolMode::Bracket ? "BRACKET" : "PRINCIPAL_ONLY"; }

inline SymbolMode parse_symbol_mode(const std::string& s) {
  if (s == "BRACKET" || s == "bracket") return SymbolMode::Bracket;
  if (s == "PRINCIPAL_ONLY" || s == "principal_only") return SymbolMode::PrincipalOnly;
  throw Error(ErrorCode::Parse, "unknown symbol mode '" + s + "'");
}

/// One distinct (up to sign) bracket symbol of a given length.
struct BracketEntry {
  PhaseSymbol sigma;  // sign-normalized
  int length = 1;
  long long multiplicity = 0;                 // number of multi-indices producing +-sigma
  std::vector<std::vector<int>> indices;      // 0-based field indices, capped list
};

inline constexpr std::size_t kIndexRecordCap = 64;
inline constexpr std::size_t kDistinctPerLevelCap = 4096;

namespace detail {

// Distinct nonzero brackets of each length 1..m, built level by level.
// Returns false if a level exceeded kDistinctPerLevelCap.
template <class OnLevel>
bool bracket_levels(const std::vector<PhaseSymbol>& gens, int m, int sign, OnLevel&& on_level) {
  std::vector<BracketEntry> level;
  {
    std::map<ScalarExpr, std::size_t> seen;
    for (std::size_t j = 0; j < gens.size(); ++j) {
      if (gens[j].is_zero()) continue;
      auto norm = gens[j].expr().sign_normalized();
      auto [it, ins] = seen.emplace(norm, level.size());
      if (ins) level.push_back(BracketEntry{PhaseSymbol(gens[j].dim(), norm), 1, 0, {}});
      auto& e = level[it->second];
      e.multiplicity += 1;
      if (e.indices.size() < kIndexRecordCap) e.indices.push_back({static_cast<int>(j)});
    }
  }
  for (int len = 1;; ++len) {
    if (!on_level(len, level)) return true;
    if (len == m) return true;
    std::vector<BracketEntry> next;
    std::map<ScalarExpr, std::size_t> seen;
    for (const auto& prev : level) {
      for (std::size_t j = 0; j < gens.size(); ++j) {
        auto b = poisson_bracket(gens[j], prev.sigma);
        if (b.is_zero()) continue;
        if (sign < 0) b = -b;
        auto norm = b.expr().sign_normalized();
        auto [it, ins] = seen.emplace(norm, next.size());
        if (ins) {
          if (next.size() >= kDistinctPerLevelCap) return false;
          next.push_back(BracketEntry{PhaseSymbol(b.dim(), norm), len + 1, 0, {}});
        }
        auto& e = next[it->second];
        e.multiplicity += prev.multiplicity;
        for (const auto& idx : prev.indices) {
          if (e.indices.size() >= kIndexRecordCap) break;
          auto i2 = idx;
          i2.push_back(static_cast<int>(j));
          e.indices.push_back(std::move(i2));
        }
      }
    }
    level = std::move(next);
  }
}

}  // namespace detail

class EffectiveSymbol {
 public:
  EffectiveSymbol() = default;
  EffectiveSymbol(std::vector<PhaseSymbol> gens, int m, SymbolMode mode, std::vector<BracketEntry> entries)
      : gens_(std::move(gens)), m_(m), mode_(mode), entries_(std::move(entries)) {
    for (const auto& g : gens_) gen_compiled_.emplace_back(g.expr());
    for (const auto& e : entries_) compiled_.push_back({CompiledExpr(e.sigma.expr()), double(e.multiplicity), e.length});
  }

  int dim() const { return gens_.empty() ? 0 : gens_[0].dim(); }
  int order() const { return m_; }
  SymbolMode mode() const { return mode_; }
  const std::vector<PhaseSymbol>& generators() const { return gens_; }
  const std::vector<BracketEntry>& entries() const { return entries_; }

  /// sigma~ at a phase point given as a 2d vector.
  double operator()(std::span<const double> p) const {
    if (mode_ == SymbolMode::PrincipalOnly) {
      double s = 1.0;
      for (const auto& g : gen_compiled_) {
        double v = g(p);
        s += v * v;
      }
      return std::sqrt(s);
    }
    double s = 0.0;
    for (const auto& c : compiled_) {
      double v = std::fabs(c.expr(p));
      if (v == 0.0) continue;
      double w = c.length == 1 ? v * v : c.length == 2 ? v : std::pow(v, 2.0 / c.length);
      s += c.weight * w;
    }
    return std::sqrt(s);
  }

  double principal_value(std::span<const double> p, int j) const {
    return gen_compiled_[static_cast<std::size_t>(j)](p);
  }

 private:
  struct Compiled {
    CompiledExpr expr;
    double weight;
    int length;
  };
  std::vector<PhaseSymbol> gens_;
  int m_ = 1;
  SymbolMode mode_ = SymbolMode::Bracket;
  std::vector<BracketEntry> entries_;
  std::vector<CompiledExpr> gen_compiled_;
  std::vector<Compiled> compiled_;
};

/// All sigma_I with 1 <= |I| <= m (BRACKET mode). `sign` = -1 flips every
/// bracket, which must not change any evaluated quantity.
inline EffectiveSymbol iterated_brackets(const std::vector<PhaseSymbol>& symbols, int m, int sign = 1) {
  if (m < 1) throw Error(ErrorCode::InvalidArgument, "bracket order must be at least 1");
  if (symbols.empty()) throw Error(ErrorCode::InvalidArgument, "empty symbol family");
  std::vector<BracketEntry> all;
  bool ok = detail::bracket_levels(symbols, m, sign, [&](int, const std::vector<BracketEntry>& lvl) {
    all.insert(all.end(), lvl.begin(), lvl.end());
    return true;
  });
  if (!ok) throw Error(ErrorCode::InvalidArgument, "bracket family too large; lower the order m");
  return EffectiveSymbol(symbols, m, SymbolMode::Bracket, std::move(all));
}

inline EffectiveSymbol principal_only(const std::vector<PhaseSymbol>& symbols) {
  if (symbols.empty()) throw Error(ErrorCode::InvalidArgument, "empty symbol family");
  return EffectiveSymbol(symbols, 1, SymbolMode::PrincipalOnly, {});
}

inline EffectiveSymbol make_effective_symbol(const std::vector<PhaseSymbol>& symbols, int m, SymbolMode mode) {
  return mode == SymbolMode::Bracket ? iterated_brackets(symbols, m) : principal_only(symbols);
}

inline double effective_symbol_eval(const EffectiveSymbol& es, const PhasePoint& p) {
  auto v = p.to_vector();
  return es(v);
}

namespace detail {

// Coefficient vector (d sigma / d xi_k at (x, 0)) of a degree-1 symbol.
inline std::optional<std::vector<Rational>> exact_coefficients(const PhaseSymbol& s, std::span<const Rational> x) {
  const int d = s.dim();
  std::vector<Rational> pt(x.begin(), x.end());
  pt.resize(static_cast<std::size_t>(2 * d), Rational(0));
  std::vector<Rational> out;
  for (int k = 0; k < d; ++k) {
    auto v = s.expr().derivative(d + k).eval_exact(pt);
    if (!v) return std::nullopt;
    out.push_back(*v);
  }
  return out;
}

inline std::vector<double> numeric_coefficients(const PhaseSymbol& s, std::span<const double> x) {
  const int d = s.dim();
  std::vector<double> pt(x.begin(), x.end());
  pt.resize(static_cast<std::size_t>(2 * d), 0.0);
  std::vector<double> out;
  for (int k = 0; k < d; ++k) out.push_back(s.expr().derivative(d + k).eval(pt));
  return out;
}

}  // namespace detail

/// Smallest m such that brackets of length <= m span R^d at x; nullopt if
/// none up to `cap`. Exact rank when every symbol is atom-free.
inline std::optional<int> bracket_order_at(const std::vector<PhaseSymbol>& symbols, std::span<const double> x,
                                           int cap = 12) {
  if (symbols.empty()) return std::nullopt;
  const int d = symbols[0].dim();
  bool exact = std::none_of(symbols.begin(), symbols.end(), [](const PhaseSymbol& s) { return s.expr().has_atoms(); });
  std::vector<Rational> xr;
  for (double v : x) xr.emplace_back(v);

  linalg::RationalMatrix rows_exact;
  std::vector<std::vector<double>> rows_num;
  std::optional<int> result;
  detail::bracket_levels(symbols, cap, 1, [&](int len, const std::vector<BracketEntry>& lvl) {
    for (const auto& e : lvl) {
      if (exact) {
        auto c = detail::exact_coefficients(e.sigma, xr);
        if (c) {
          rows_exact.push_back(*c);
          continue;
        }
        exact = false;
        for (const auto& r : rows_exact) {
          std::vector<double> rd;
          for (const auto& q : r) rd.push_back(q.get_d());
          rows_num.push_back(rd);
        }
        rows_exact.clear();
      }
      rows_num.push_back(detail::numeric_coefficients(e.sigma, x));
    }
    int rank;
    if (exact) {
      rank = linalg::exact_rank(rows_exact);
    } else {
      linalg::Matrix m(static_cast<long>(rows_num.size()), d);
      for (std::size_t i = 0; i < rows_num.size(); ++i)
        for (int k = 0; k < d; ++k) m(static_cast<long>(i), k) = rows_num[i][static_cast<std::size_t>(k)];
      rank = linalg::numeric_rank(m);
    }
    if (rank == d) {
      result = len;
      return false;
    }
    return true;
  });
  return result;
}

inline std::optional<int> bracket_order_at(const std::vector<BaseVectorField>& fields, std::span<const double> x,
                                           int cap = 12) {
  std::vector<PhaseSymbol> s;
  for (const auto& f : fields) s.push_back(principal_symbol(f));
  return bracket_order_at(s, x, cap);
}

enum class NuMethod { Auto, Sphere, LineBundle };

namespace detail {

inline double sigma_at(const EffectiveSymbol& es, std::span<const double> x, const std::vector<double>& dir, double R) {
  const std::size_t d = x.size();
  std::vector<double> p(2 * d);
  for (std::size_t i = 0; i < d; ++i) {
    p[i] = x[i];
    p[d + i] = R * dir[i];
  }
  return es(p);
}

inline void normalize(std::vector<double>& v) {
  double s = 0;
  for (double a : v) s += a * a;
  s = std::sqrt(s);
  for (double& a : v) a /= s;
}

// Unit direction spanning the common kernel of the principal coefficient
// vectors at x, if that kernel is one-dimensional.
inline std::optional<std::vector<double>> line_bundle_direction(const EffectiveSymbol& es, std::span<const double> x) {
  const int d = es.dim();
  if (d < 2) return std::nullopt;
  linalg::Matrix m(static_cast<long>(es.generators().size()), d);
  for (std::size_t j = 0; j < es.generators().size(); ++j) {
    auto c = numeric_coefficients(es.generators()[j], x);
    for (int k = 0; k < d; ++k) m(static_cast<long>(j), k) = c[static_cast<std::size_t>(k)];
  }
  if (linalg::numeric_rank(m) != d - 1) return std::nullopt;
  auto ns = linalg::nullspace(m);
  std::vector<double> dir(static_cast<std::size_t>(d));
  for (int k = 0; k < d; ++k) dir[static_cast<std::size_t>(k)] = ns(k, 0);
  return dir;
}

}  // namespace detail

/// nu(x, R) = min over |xi| = R of sigma~(x, xi).
inline double nu(const EffectiveSymbol& es, std::span<const double> x, double R, NuMethod method = NuMethod::Auto) {
  if (!(R >= 1.0)) throw Error(ErrorCode::InvalidArgument, "nu requires R >= 1");
  const int d = es.dim();
  if (method != NuMethod::Sphere) {
    auto dir = detail::line_bundle_direction(es, x);
    if (dir) return detail::sigma_at(es, x, *dir, R);
    if (method == NuMethod::LineBundle)
      throw Error(ErrorCode::InvalidArgument, "fields are not d-1 independent at this point");
  }
  if (d == 1) return std::min(detail::sigma_at(es, x, {1.0}, R), detail::sigma_at(es, x, {-1.0}, R));

  // Coarse sample.
  std::vector<std::vector<double>> dirs;
  double spacing;
  if (d == 2) {
    const int n = 512;
    for (int i = 0; i < n; ++i) {
      double a = M_PI * i / n;  // sigma~ is even in xi
      dirs.push_back({std::cos(a), std::sin(a)});
    }
    spacing = M_PI / n;
  } else if (d == 3) {
    const int n = 2000;
    const double golden = M_PI * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < n; ++i) {
      double z = 1.0 - 2.0 * (i + 0.5) / n;
      double r = std::sqrt(1 - z * z);
      dirs.push_back({r * std::cos(golden * i), r * std::sin(golden * i), z});
    }
    spacing = std::sqrt(4 * M_PI / n);
  } else {
    std::mt19937_64 rng(12345);
    std::normal_distribution<double> g;
    const int n = 4000;
    for (int i = 0; i < n; ++i) {
      std::vector<double> v(static_cast<std::size_t>(d));
      for (auto& a : v) a = g(rng);
      detail::normalize(v);
      dirs.push_back(v);
    }
    spacing = std::pow(4.0 / n, 1.0 / (d - 1));
  }
  std::vector<std::pair<double, std::size_t>> vals;
  for (std::size_t i = 0; i < dirs.size(); ++i) vals.emplace_back(detail::sigma_at(es, x, dirs[i], R), i);
  std::partial_sort(vals.begin(), vals.begin() + 3, vals.end());

  // Pattern search on the sphere around the best three.
  double best = vals[0].first;
  for (int c = 0; c < 3; ++c) {
    auto u = dirs[vals[static_cast<std::size_t>(c)].second];
    double fu = vals[static_cast<std::size_t>(c)].first;
    double step = spacing;
    while (step > 1e-9) {
      linalg::Matrix um(1, d);
      for (int k = 0; k < d; ++k) um(0, k) = u[static_cast<std::size_t>(k)];
      auto tangent = linalg::nullspace(um);
      bool improved = false;
      for (int t = 0; t < tangent.cols(); ++t) {
        for (double sgn : {1.0, -1.0}) {
          auto v = u;
          for (int k = 0; k < d; ++k) v[static_cast<std::size_t>(k)] += sgn * step * tangent(k, t);
          detail::normalize(v);
          double fv = detail::sigma_at(es, x, v, R);
          if (fv < fu) {
            fu = fv;
            u = v;
            improved = true;
          }
        }
      }
      if (!improved) step *= 0.5;
    }
    best = std::min(best, fu);
  }
  return best;
}

enum class Verdict { False, True, ConstantRankUncertain };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::False: return "false";
    case Verdict::True: return "true";
    case Verdict::ConstantRankUncertain: return "CONSTANT_RANK_UNCERTAIN";
  }
  return "?";
}

struct SymplecticReport {
  Verdict verdict = Verdict::False;
  int gradient_rank = 0;
  int tangent_dim = 0;
  int restricted_rank = 0;  // rank of omega on T_p Sigma
};

namespace detail {

inline constexpr double kSigmaTol = 1e-8;

struct LocalGeometry {
  std::vector<double> q;  // rescaled point, |xi| = 1
  linalg::Matrix grads;   // k x 2d
  linalg::Matrix defining;  // k x 2d conormals of the defining functions, rows scaled to max 1
  linalg::Matrix hams;    // 2d x k, columns H_sigma_j(q)
  int rank = 0;
  bool constant_rank = true;
};

// Defining-function gradient of one symbol. A symbol P * exp(R) is replaced by
// its conormal direction grad P + P grad R (the exp factor divided out); where
// exp(R) vanishes flatly because R has a pole in a single variable, that
// variable is the defining function.
class DefiningGradient {
 public:
  explicit DefiningGradient(const PhaseSymbol& s) : n_(2 * s.dim()) {
    const auto& e = s.expr();
    if (auto split = e.split_common_atom()) {
      P_ = split->first;
      R_ = split->second;
      atom_ = true;
      for (int i = 0; i < n_; ++i) {
        dP_.push_back(P_.derivative(i));
        dR_.push_back(R_.derivative(i));
      }
    } else {
      for (int i = 0; i < n_; ++i) dP_.push_back(e.derivative(i));
    }
  }

  void eval(std::span<const double> q, std::span<double> out) const {
    if (!atom_) {
      for (int i = 0; i < n_; ++i) out[static_cast<std::size_t>(i)] = dP_[static_cast<std::size_t>(i)].eval(q);
      return;
    }
    double r = R_.eval(q);
    if (!std::isfinite(r) || std::fabs(r) > 1e300) {
      int pole = -1, npoles = 0;
      for (const auto& [k, c] : R_.terms())
        for (int i = 0; i < n_; ++i)
          if (k.mono.e[static_cast<std::size_t>(i)] < 0 && q[static_cast<std::size_t>(i)] == 0 && pole != i) {
            pole = i;
            ++npoles;
          }
      for (int i = 0; i < n_; ++i) out[static_cast<std::size_t>(i)] = (npoles == 1 && i == pole) ? 1.0 : 0.0;
      return;
    }
    double pv = P_.eval(q);
    for (int i = 0; i < n_; ++i)
      out[static_cast<std::size_t>(i)] =
          dP_[static_cast<std::size_t>(i)].eval(q) + pv * dR_[static_cast<std::size_t>(i)].eval(q);
  }

 private:
  int n_;
  bool atom_ = false;
  ScalarExpr P_, R_;
  std::vector<ScalarExpr> dP_, dR_;
};

inline linalg::Matrix gradient_matrix(const std::vector<PhaseSymbol>& symbols, std::span<const double> q) {
  const int d = symbols[0].dim();
  linalg::Matrix g(static_cast<long>(symbols.size()), 2 * d);
  for (std::size_t j = 0; j < symbols.size(); ++j)
    for (int i = 0; i < 2 * d; ++i) g(static_cast<long>(j), i) = symbols[j].expr().derivative(i).eval(q);
  return g;
}

inline linalg::Matrix defining_matrix(const std::vector<DefiningGradient>& defs, int d, std::span<const double> q) {
  linalg::Matrix g(static_cast<long>(defs.size()), 2 * d);
  std::vector<double> row(static_cast<std::size_t>(2 * d));
  for (std::size_t j = 0; j < defs.size(); ++j) {
    defs[j].eval(q, row);
    double nr = 0;
    for (double v : row) nr = std::max(nr, std::fabs(v));
    for (int i = 0; i < 2 * d; ++i) g(static_cast<long>(j), i) = nr > 0 ? row[static_cast<std::size_t>(i)] / nr : 0.0;
  }
  return g;
}

inline LocalGeometry local_geometry(const std::vector<PhaseSymbol>& symbols, const PhasePoint& p) {
  if (symbols.empty()) throw Error(ErrorCode::InvalidArgument, "empty symbol family");
  const int d = symbols[0].dim();
  if (p.dim() != d) throw Error(ErrorCode::InvalidArgument, "point dimension mismatch");
  LocalGeometry g;
  const double s = p.fiber_norm();
  g.q = p.to_vector();
  for (int i = d; i < 2 * d; ++i) g.q[static_cast<std::size_t>(i)] /= s;
  for (const auto& sym : symbols) {
    double v = sym(g.q);
    if (!(std::fabs(v) <= kSigmaTol))
      throw Error(ErrorCode::NotOnCharacteristicSet,
                  "symbol value " + std::to_string(v) + " at unit fiber scale exceeds tolerance");
  }
  std::vector<DefiningGradient> defs;
  for (const auto& sym : symbols) defs.emplace_back(sym);
  g.defining = defining_matrix(defs, d, g.q);
  g.rank = linalg::numeric_rank(g.defining);
  // Constant-rank probe: nearby phase-space points must not gain rank.
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 6; ++trial) {
    auto qq = g.q;
    for (auto& v : qq) v += 1e-4 * u(rng);
    if (linalg::numeric_rank(defining_matrix(defs, d, qq)) != g.rank) g.constant_rank = false;
  }
  g.grads = gradient_matrix(symbols, g.q);
  g.hams = linalg::Matrix(2 * d, static_cast<long>(symbols.size()));
  for (long j = 0; j < g.grads.rows(); ++j)
    for (int n = 0; n < d; ++n) {
      g.hams(n, j) = g.grads(j, d + n);
      g.hams(d + n, j) = -g.grads(j, n);
    }
  return g;
}

// omega(u, v) = u^T J v with omega = sum dxi_n ^ dx_n.
inline linalg::Matrix symplectic_matrix(int d) {
  linalg::Matrix J = linalg::Matrix::Zero(2 * d, 2 * d);
  for (int n = 0; n < d; ++n) {
    J(n, d + n) = -1.0;
    J(d + n, n) = 1.0;
  }
  return J;
}

}  // namespace detail

/// Whether omega restricted to T_p Sigma (kernel of the d sigma_j) is nondegenerate.
inline SymplecticReport is_symplectic_at(const std::vector<PhaseSymbol>& symbols, const PhasePoint& p) {
  auto g = detail::local_geometry(symbols, p);
  SymplecticReport r;
  r.gradient_rank = g.rank;
  if (!g.constant_rank) {
    r.verdict = Verdict::ConstantRankUncertain;
    return r;
  }
  auto T = linalg::nullspace(g.defining);
  auto J = detail::symplectic_matrix(p.dim());
  linalg::Matrix M = T.transpose() * J * T;
  r.tangent_dim = static_cast<int>(T.cols());
  r.restricted_rank = linalg::numeric_rank(M);
  r.verdict = r.restricted_rank == r.tangent_dim ? Verdict::True : Verdict::False;
  return r;
}

/// Whether span{H_sigma_j(p)} equals the omega-orthocomplement of T_p Sigma.
inline Verdict hamiltonian_span_equals_orthocomplement(const std::vector<PhaseSymbol>& symbols, const PhasePoint& p) {
  auto g = detail::local_geometry(symbols, p);
  if (!g.constant_rank) return Verdict::ConstantRankUncertain;
  auto T = linalg::nullspace(g.defining);
  auto J = detail::symplectic_matrix(p.dim());
  linalg::Matrix TJ = T.transpose() * J;
  auto O = linalg::nullspace(TJ);
  int rh = linalg::numeric_rank(g.hams);
  int ro = static_cast<int>(O.cols());
  linalg::Matrix both(g.hams.rows(), g.hams.cols() + O.cols());
  both << g.hams, O;
  int rb = linalg::numeric_rank(both);
  return (rh == ro && rb == ro) ? Verdict::True : Verdict::False;
}

}  // namespace phasemetric
