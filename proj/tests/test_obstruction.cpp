#include <gtest/gtest.h>

#include "phasemetric/obstruction.hpp"

using namespace phasemetric;

namespace {

std::vector<Rational> on_c1_c2(const ObstructionSystem& s, long a, long b) {
  std::vector<Rational> v(s.unknowns.size(), Rational(0));
  v[static_cast<std::size_t>(s.index('f', 1, 0))] = a;
  v[static_cast<std::size_t>(s.index('g', 0, 1))] = b;
  return v;
}

}  // namespace

TEST(Obstruction, FlagshipIsInconsistentWithCertificate) {
  auto s = taylor_obstruction("x^6 + y^6 + x^2*y^2", 6);
  EXPECT_EQ(s.verdict(), "INCONSISTENT");
  EXPECT_EQ(s.order, 4);
  EXPECT_EQ(s.ansatz_degree, 3);
  EXPECT_TRUE(certificate_valid(s));
  EXPECT_TRUE(implies_equation(s, on_c1_c2(s, 3, 3), 1));
  EXPECT_TRUE(implies_equation(s, on_c1_c2(s, 7, 1), 1));
  EXPECT_TRUE(implies_equation(s, on_c1_c2(s, 1, 7), 1));
  auto d = decisive_equations(s);
  ASSERT_EQ(d.size(), 3u);
  EXPECT_EQ(format_equation(s, d[0].coeffs, d[0].rhs), "3*f[1,0] + 3*g[0,1] = 1");
}

TEST(Obstruction, ConsistentSystemRejectsForeignEquation) {
  auto s = taylor_obstruction("x^4 + y^4 + x^2*y^2", 6);
  EXPECT_FALSE(implies_equation(s, on_c1_c2(s, 7, 1), 1));
  EXPECT_FALSE(certificate_valid(s));
}

TEST(Obstruction, HomogeneousWeightSolvedByEuler) {
  auto s = taylor_obstruction("x^2*y^2", 6);
  ASSERT_EQ(s.verdict(), "CONSISTENT");
  const int c1 = s.index('f', 1, 0), c2 = s.index('g', 0, 1);
  auto rel = projected_relations(s, {s.index('f', 0, 0), s.index('g', 0, 0), s.index('f', 0, 1), s.index('g', 1, 0), c1, c2});
  // f(0) = g(0) = 0, no cross terms, and c1 + c2 = 1/3 as the only constraint on (c1, c2).
  ASSERT_EQ(rel.size(), 5u);
  bool found = false;
  for (const auto& r : rel) {
    if (r.coeffs[4] != 0 && r.coeffs[5] != 0) {
      EXPECT_EQ(r.coeffs[4], r.coeffs[5]);
      EXPECT_EQ(r.rhs / r.coeffs[4], make_rational(1, 3));
      found = true;
    }
  }
  EXPECT_TRUE(found);
  EXPECT_FALSE(s.determined[static_cast<std::size_t>(c1)]);
  EXPECT_TRUE(implies_equation(s, on_c1_c2(s, 1, 1), make_rational(1, 3)));
}

TEST(Obstruction, PolyhomogeneousQuarticHasUniqueLinearPart) {
  auto s = taylor_obstruction("x^4 + y^4 + x^2*y^2", 6);
  ASSERT_EQ(s.verdict(), "CONSISTENT");
  auto rel = projected_relations(s, {s.index('f', 1, 0), s.index('g', 0, 1)});
  ASSERT_EQ(rel.size(), 2u);
  EXPECT_TRUE(implies_equation(s, on_c1_c2(s, 1, 0), make_rational(1, 6)));
  EXPECT_TRUE(implies_equation(s, on_c1_c2(s, 0, 1), make_rational(1, 6)));
  EXPECT_TRUE(implies_equation(s, on_c1_c2(s, 5, 1), 1));
  EXPECT_TRUE(implies_equation(s, on_c1_c2(s, 1, 5), 1));
  EXPECT_TRUE(s.determined[static_cast<std::size_t>(s.index('f', 1, 0))]);
  EXPECT_EQ(s.solution[static_cast<std::size_t>(s.index('f', 1, 0))], make_rational(1, 6));
  EXPECT_EQ(s.solution[static_cast<std::size_t>(s.index('g', 0, 1))], make_rational(1, 6));
}

TEST(Obstruction, ConstantTermsForcedToVanish) {
  auto s = taylor_obstruction("x^4 + y^4 + x^2*y^2", 6);
  auto rel = projected_relations(s, {s.index('f', 0, 0), s.index('g', 0, 0)});
  ASSERT_EQ(rel.size(), 2u);
  for (const auto& r : rel) EXPECT_EQ(r.rhs, 0);
}

TEST(Obstruction, VerdictInvariantUnderRescaling) {
  for (const char* base : {"x^6 + y^6 + x^2*y^2", "x^2*y^2", "x^4 + y^4 + x^2*y^2", "x^8 + y^8 + x^2*y^2"}) {
    auto s = taylor_obstruction(base, 8);
    for (const char* c : {"3", "2/7"}) {
      auto t = taylor_obstruction(std::string(c) + "*(" + base + ")", 8);
      EXPECT_EQ(s.verdict(), t.verdict()) << base;
      if (!t.consistent) EXPECT_TRUE(certificate_valid(t));
    }
  }
}

TEST(Obstruction, RejectsBadInput) {
  EXPECT_THROW(taylor_obstruction("x^6 + y^6", 4), Error);
  EXPECT_THROW(taylor_obstruction("exp(-1/x^2)", 6), Error);
  EXPECT_THROW(taylor_obstruction("0", 6), Error);
}
