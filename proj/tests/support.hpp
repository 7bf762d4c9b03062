#pragma once

#include <random>

#include "phasemetric/symcalc.hpp"

namespace phasemetric::testsupport {

/// Random polynomial in 2d phase variables, total degree <= max_degree,
/// small rational coefficients.
inline PhaseSymbol random_symbol(std::mt19937_64& rng, int d, int max_degree, int terms = 5) {
  std::uniform_int_distribution<int> var(0, 2 * d - 1);
  std::uniform_int_distribution<int> deg(0, max_degree);
  std::uniform_int_distribution<int> num(-9, 9);
  std::uniform_int_distribution<int> den(1, 4);
  ScalarExpr e(2 * d);
  for (int t = 0; t < terms; ++t) {
    Monomial m;
    int k = deg(rng);
    for (int i = 0; i < k; ++i) m.e[static_cast<std::size_t>(var(rng))] += 1;
    e += ScalarExpr::monomial(2 * d, m, make_rational(num(rng), den(rng)));
  }
  return {d, e};
}

/// Random degree-1 symbol sum_k a_k(x) xi_k with polynomial a_k.
inline PhaseSymbol random_linear_symbol(std::mt19937_64& rng, int d, int max_degree) {
  std::uniform_int_distribution<int> var(0, d - 1);
  std::uniform_int_distribution<int> deg(0, max_degree);
  std::uniform_int_distribution<int> num(-5, 5);
  ScalarExpr e(2 * d);
  for (int k = 0; k < d; ++k) {
    Monomial m;
    int n = deg(rng);
    for (int i = 0; i < n; ++i) m.e[static_cast<std::size_t>(var(rng))] += 1;
    m.e[static_cast<std::size_t>(d + k)] += 1;
    e += ScalarExpr::monomial(2 * d, m, make_rational(num(rng)));
  }
  return {d, e};
}

}  // namespace phasemetric::testsupport
