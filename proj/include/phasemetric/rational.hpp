#pragma once

#include <gmpxx.h>

#include <string>
#include <string_view>

#include "phasemetric/error.hpp"

namespace phasemetric {

using Rational = mpq_class;

inline Rational make_rational(long num, long den = 1) {
  Rational r(num, den);
  r.canonicalize();
  return r;
}

/// Parses "p", "p/q", or a finite decimal such as "-0.125" exactly.
inline Rational parse_rational(std::string_view text) {
  std::string s(text);
  auto fail = [&] { throw Error(ErrorCode::Parse, "not a rational literal: '" + s + "'"); };
  if (s.empty()) fail();
  auto dot = s.find('.');
  if (dot == std::string::npos) {
    Rational r;
    if (r.set_str(s, 10) != 0) fail();
    r.canonicalize();
    return r;
  }
  std::string digits = s.substr(0, dot) + s.substr(dot + 1);
  if (digits.empty() || digits == "-" || digits == "+") fail();
  mpz_class num;
  if (num.set_str(digits[0] == '+' ? digits.substr(1) : digits, 10) != 0) fail();
  mpz_class den = 1;
  for (std::size_t i = dot + 1; i < s.size(); ++i) den *= 10;
  Rational r(num, den);
  r.canonicalize();
  return r;
}

inline bool is_integer(const Rational& r) { return r.get_den() == 1; }

inline std::string to_string(const Rational& r) { return r.get_str(); }

}  // namespace phasemetric
