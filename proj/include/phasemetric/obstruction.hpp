#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "phasemetric/error.hpp"
#include "phasemetric/linalg.hpp"
#include "phasemetric/poly.hpp"
#include "phasemetric/rational.hpp"

namespace phasemetric {

/// Coefficient of x^i y^j in f or g.
struct TaylorUnknown {
  char fn = 'f';
  int i = 0, j = 0;
  std::string name() const { return std::string(1, fn) + "[" + std::to_string(i) + "," + std::to_string(j) + "]"; }
};

/// sum_k coeffs[k] * unknown_k = rhs, from the x^i y^j coefficient of (f lambda)_x + (g lambda)_y - lambda.
struct TaylorEquation {
  int i = 0, j = 0;
  std::vector<Rational> coeffs;
  Rational rhs;
};

struct LinearRelation {
  std::vector<Rational> coeffs;  // over the projected unknowns
  Rational rhs;
};

struct ObstructionSystem {
  std::string lambda;
  int degree_cap = 0;
  int order = 0;        // lowest degree present in lambda
  int ansatz_degree = 0;
  std::vector<TaylorUnknown> unknowns;
  std::vector<TaylorEquation> equations;
  bool consistent = false;
  std::vector<Rational> solution;     // a particular solution when consistent
  std::vector<bool> determined;       // unknown fixed by the system
  std::vector<Rational> certificate;  // one weight per equation; sums to 0 = 1 when inconsistent

  std::string verdict() const { return consistent ? "CONSISTENT" : "INCONSISTENT"; }

  int index(char fn, int i, int j) const {
    for (std::size_t k = 0; k < unknowns.size(); ++k)
      if (unknowns[k].fn == fn && unknowns[k].i == i && unknowns[k].j == j) return static_cast<int>(k);
    return -1;
  }
};

namespace detail {

struct Elimination {
  linalg::RationalMatrix rows;  // reduced rows over the unknowns, with rhs last
  linalg::RationalMatrix combo;  // rows of the original system producing each reduced row
  std::vector<int> pivot;  // pivot column per reduced row, -1 for a zero row
};

/// Gauss-Jordan elimination on [A | b], tracking row combinations.
inline Elimination eliminate(const linalg::RationalMatrix& a, const std::vector<Rational>& b) {
  const std::size_t m = a.size(), n = m ? a[0].size() : 0;
  Elimination e;
  for (std::size_t r = 0; r < m; ++r) {
    auto row = a[r];
    row.push_back(b[r]);
    e.rows.push_back(std::move(row));
    std::vector<Rational> c(m, Rational(0));
    c[r] = 1;
    e.combo.push_back(std::move(c));
  }
  e.pivot.assign(m, -1);
  std::size_t lead = 0;
  for (std::size_t col = 0; col < n && lead < m; ++col) {
    std::size_t sel = lead;
    while (sel < m && e.rows[sel][col] == 0) ++sel;
    if (sel == m) continue;
    std::swap(e.rows[sel], e.rows[lead]);
    std::swap(e.combo[sel], e.combo[lead]);
    Rational inv = 1 / e.rows[lead][col];
    for (auto& v : e.rows[lead]) v *= inv;
    for (auto& v : e.combo[lead]) v *= inv;
    for (std::size_t r = 0; r < m; ++r) {
      if (r == lead || e.rows[r][col] == 0) continue;
      Rational f = e.rows[r][col];
      for (std::size_t k = col; k <= n; ++k) e.rows[r][k] -= f * e.rows[lead][k];
      for (std::size_t k = 0; k < m; ++k) e.combo[r][k] -= f * e.combo[lead][k];
    }
    e.pivot[lead] = static_cast<int>(col);
    ++lead;
  }
  return e;
}

}  // namespace detail

/// Matches Taylor coefficients of (f lambda)_x + (g lambda)_y = lambda through total
/// degree D with polynomial f, g of degree <= D - ord(lambda) + 1, which is every
/// degree that can reach D.
inline ObstructionSystem taylor_obstruction(const std::string& lambda_text, int degree_cap) {
  const std::vector<std::string> xy = {"x", "y"};
  auto lam = ScalarExpr::parse(lambda_text, xy);
  if (!lam.is_polynomial() || lam.is_zero())
    throw Error(ErrorCode::InvalidArgument, "weight must be a nonzero polynomial in x, y");
  ObstructionSystem s;
  s.lambda = lambda_text;
  s.degree_cap = degree_cap;
  s.order = lam.min_degree();
  if (degree_cap < lam.max_degree())
    throw Error(ErrorCode::InvalidArgument, "degree cap must be at least deg lambda = " + std::to_string(lam.max_degree()));
  s.ansatz_degree = degree_cap - s.order + 1;
  if (s.ansatz_degree < 0) s.ansatz_degree = 0;
  for (char fn : {'f', 'g'})
    for (int deg = 0; deg <= s.ansatz_degree; ++deg)
      for (int i = deg; i >= 0; --i) s.unknowns.push_back({fn, i, deg - i});

  std::map<std::pair<int, int>, std::vector<Rational>> rows;
  std::map<std::pair<int, int>, Rational> rhs;
  auto row = [&](int i, int j) -> std::vector<Rational>& {
    auto it = rows.find({i, j});
    if (it == rows.end()) it = rows.emplace(std::make_pair(i, j), std::vector<Rational>(s.unknowns.size(), Rational(0))).first;
    return it->second;
  };
  for (int deg = 0; deg <= degree_cap; ++deg)
    for (int i = deg; i >= 0; --i) row(i, deg - i);
  for (const auto& [k, c] : lam.terms()) {
    const int a = k.mono.e[0], b = k.mono.e[1];
    if (a + b <= degree_cap) rhs[{a, b}] += c;
    for (std::size_t u = 0; u < s.unknowns.size(); ++u) {
      const auto& un = s.unknowns[u];
      const int px = un.i + a, py = un.j + b;  // monomial of (unknown monomial) * (lambda term)
      if (un.fn == 'f' && px > 0 && px - 1 + py <= degree_cap) row(px - 1, py)[u] += c * px;
      if (un.fn == 'g' && py > 0 && px + py - 1 <= degree_cap) row(px, py - 1)[u] += c * py;
    }
  }
  linalg::RationalMatrix a;
  std::vector<Rational> b;
  for (auto& [key, r] : rows) {
    Rational v = rhs.count(key) ? rhs[key] : Rational(0);
    s.equations.push_back({key.first, key.second, r, v});
  }
  // Ascending total degree, then descending x power.
  std::sort(s.equations.begin(), s.equations.end(), [](const TaylorEquation& p, const TaylorEquation& q) {
    if (p.i + p.j != q.i + q.j) return p.i + p.j < q.i + q.j;
    return p.i > q.i;
  });
  for (const auto& e : s.equations) {
    a.push_back(e.coeffs);
    b.push_back(e.rhs);
  }

  auto el = detail::eliminate(a, b);
  const std::size_t n = s.unknowns.size();
  s.consistent = true;
  for (std::size_t r = 0; r < el.rows.size(); ++r) {
    if (el.pivot[r] >= 0 || el.rows[r][n] == 0) continue;
    s.consistent = false;
    s.certificate = el.combo[r];
    for (auto& v : s.certificate) v /= el.rows[r][n];
    break;
  }
  if (s.consistent) {
    s.solution.assign(n, Rational(0));
    s.determined.assign(n, false);
    std::vector<bool> is_pivot(n, false);
    for (std::size_t r = 0; r < el.rows.size(); ++r)
      if (el.pivot[r] >= 0) is_pivot[static_cast<std::size_t>(el.pivot[r])] = true;
    for (std::size_t r = 0; r < el.rows.size(); ++r) {
      if (el.pivot[r] < 0) continue;
      const auto p = static_cast<std::size_t>(el.pivot[r]);
      s.solution[p] = el.rows[r][n];
      bool free_dep = false;
      for (std::size_t k = 0; k < n; ++k)
        if (k != p && el.rows[r][k] != 0 && !is_pivot[k]) free_dep = true;
      s.determined[p] = !free_dep;
    }
  }
  return s;
}

/// Exact check of an inconsistency certificate: weights combine the equations into 0 = 1.
inline bool certificate_valid(const ObstructionSystem& s) {
  if (s.consistent || s.certificate.size() != s.equations.size()) return false;
  std::vector<Rational> lhs(s.unknowns.size(), Rational(0));
  Rational r = 0;
  for (std::size_t e = 0; e < s.equations.size(); ++e) {
    for (std::size_t k = 0; k < lhs.size(); ++k) lhs[k] += s.certificate[e] * s.equations[e].coeffs[k];
    r += s.certificate[e] * s.equations[e].rhs;
  }
  return r == 1 && std::all_of(lhs.begin(), lhs.end(), [](const Rational& v) { return v == 0; });
}

/// Whether sum coeffs[k] * unknown_k = rhs (coeffs indexed like s.unknowns) is a
/// rational combination of the system's equations.
inline bool implies_equation(const ObstructionSystem& s, const std::vector<Rational>& coeffs, const Rational& rhs) {
  linalg::RationalMatrix m;
  for (const auto& e : s.equations) {
    auto r = e.coeffs;
    r.push_back(e.rhs);
    m.push_back(std::move(r));
  }
  const int before = linalg::exact_rank(m);
  auto r = coeffs;
  r.push_back(rhs);
  m.push_back(std::move(r));
  return linalg::exact_rank(m) == before;
}

/// Affine relations satisfied by the chosen unknowns on the solution set of a consistent system.
inline std::vector<LinearRelation> projected_relations(const ObstructionSystem& s, const std::vector<int>& chosen) {
  if (!s.consistent) throw Error(ErrorCode::InvalidArgument, "system is inconsistent");
  const std::size_t n = s.unknowns.size(), k = chosen.size();
  // Eliminate every other unknown: columns ordered (others..., chosen...), then keep
  // reduced rows whose support lies in the chosen block.
  std::vector<int> order;
  for (std::size_t u = 0; u < n; ++u)
    if (std::find(chosen.begin(), chosen.end(), static_cast<int>(u)) == chosen.end()) order.push_back(static_cast<int>(u));
  const std::size_t others = order.size();
  for (int c : chosen) order.push_back(c);
  linalg::RationalMatrix a;
  std::vector<Rational> b;
  for (const auto& e : s.equations) {
    std::vector<Rational> r;
    for (int c : order) r.push_back(e.coeffs[static_cast<std::size_t>(c)]);
    a.push_back(std::move(r));
    b.push_back(e.rhs);
  }
  auto el = detail::eliminate(a, b);
  std::vector<LinearRelation> out;
  for (std::size_t r = 0; r < el.rows.size(); ++r) {
    if (el.pivot[r] < static_cast<int>(others)) continue;
    LinearRelation rel;
    for (std::size_t c = 0; c < k; ++c) rel.coeffs.push_back(el.rows[r][others + c]);
    rel.rhs = el.rows[r][n];
    out.push_back(std::move(rel));
  }
  return out;
}

/// Equations whose support lies in the two diagonal linear coefficients f[1,0], g[0,1].
inline std::vector<TaylorEquation> decisive_equations(const ObstructionSystem& s) {
  const int c1 = s.index('f', 1, 0), c2 = s.index('g', 0, 1);
  std::vector<TaylorEquation> out;
  for (const auto& e : s.equations) {
    bool inside = true, any = false;
    for (std::size_t k = 0; k < e.coeffs.size(); ++k) {
      if (e.coeffs[k] == 0) continue;
      any = true;
      if (static_cast<int>(k) != c1 && static_cast<int>(k) != c2) inside = false;
    }
    if (inside && any) out.push_back(e);
  }
  return out;
}

inline std::string format_equation(const ObstructionSystem& s, const std::vector<Rational>& coeffs, const Rational& rhs) {
  std::string out;
  for (std::size_t k = 0; k < coeffs.size(); ++k) {
    if (coeffs[k] == 0) continue;
    Rational c = coeffs[k];
    if (!out.empty()) out += c < 0 ? " - " : " + ";
    else if (c < 0) out += "-";
    if (c < 0) c = -c;
    if (c != 1) out += c.get_str() + "*";
    out += s.unknowns[k].name();
  }
  if (out.empty()) out = "0";
  return out + " = " + rhs.get_str();
}

}  // namespace phasemetric
