#include <gtest/gtest.h>

#include <cmath>

#include "phasemetric/catalogue.hpp"
#include "phasemetric/lemma53.hpp"
#include "phasemetric/prop51.hpp"
#include "phasemetric/scan.hpp"

using namespace phasemetric;

namespace {

const char* kFlagship = "x^6 + y^6 + x^2*y^2";

const Lemma53Solution& reference() {
  static const Lemma53Solution s(kFlagship);
  return s;
}

const Lemma53Solution& refined() {
  static const Lemma53Solution s(kFlagship, Lemma53Grid{}.refined());
  return s;
}

}  // namespace

TEST(Lemma53, ReferenceResidualAndRefinement) {
  auto a = verify_lemma53(reference());
  auto b = verify_lemma53(refined());
  EXPECT_LE(a.residual, 0.02);
  EXPECT_LT(b.residual, a.residual);
  for (auto [x, y] : {std::pair{a.h_max, b.h_max}, {a.b_theta, b.b_theta}, {a.r_grad_h, b.r_grad_h}, {a.grad_f, b.grad_f}})
    EXPECT_NEAR(y / x, 1.0, 0.05);
  EXPECT_LT(a.tail_weight, 1e-12);
}

TEST(Lemma53, StructuralInvariants) {
  auto r = verify_lemma53(reference());
  EXPECT_GE(r.beta_min, 2.0);
  EXPECT_LT(r.b_max_inside, 0.0);
  EXPECT_LT(r.beta6_over_r, 10.0);
  EXPECT_LT(r.f_over_r, 1.0);
  EXPECT_LT(r.g_over_r, 1.0);
  EXPECT_LT(r.symmetry, 1e-12);
  ASSERT_TRUE(r.closed_form.has_value());
  EXPECT_LT(*r.closed_form, 1e-3);
}

TEST(Lemma53, BetaApproachesSixInTheCone) {
  const auto& s = reference();
  for (double r : {0.1, 0.01, 0.001}) {
    double worst = 0;
    for (int i = 0; i <= 20; ++i) {
      double t = std::atan(0.5) + (std::atan(2.0) - std::atan(0.5)) * i / 20;
      worst = std::max(worst, std::fabs(s.beta(r * std::cos(t), r * std::sin(t)) - 6));
    }
    EXPECT_LT(worst, 2 * r) << r;
  }
}

TEST(Lemma53, HSupportedInCone) {
  const auto& s = reference();
  const double edge = Lemma53Solution::kHalfWidth + 2 * s.dtheta();
  for (double r : {0.03, 0.2, 0.45})
    for (int k = 0; k < 4; ++k)
      for (double off : {edge, -edge, 0.6, -0.7}) {
        double t = M_PI / 4 + k * M_PI / 2 + off;
        EXPECT_EQ(s.h(r * std::cos(t), r * std::sin(t)), 0.0);
      }
  EXPECT_NE(s.h(0.1, 0.1), 0.0);
}

TEST(Lemma53, MatchesClosedFormAwayFromCone) {
  const auto& s = reference();
  for (auto [x, y] : {std::pair{0.01, 0.3}, {-0.05, 0.2}, {0.1, -0.4}}) {
    double want = (x * std::pow(y, 6) + x * x * x * y * y / 3 + std::pow(x, 7) / 7) /
                  (std::pow(y, 6) + x * x * y * y + std::pow(x, 6));
    EXPECT_NEAR(s.f(x, y), want, 1e-12 * std::fabs(want));
    EXPECT_DOUBLE_EQ(s.g(y, x), s.f(x, y));
  }
}

TEST(Lemma53, HigherEvenDegree) {
  Lemma53Solution s("x^8 + y^8 + x^2*y^2");
  auto r = verify_lemma53(s);
  EXPECT_LE(r.residual, 0.02);
  ASSERT_TRUE(r.closed_form.has_value());
  EXPECT_LT(*r.closed_form, 1e-3);
}

TEST(Lemma53, Errors) {
  Lemma53Grid g;
  g.tail = 0.5;
  try {
    Lemma53Solution s(kFlagship, g);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::QuadratureNonConvergence);
  }
  EXPECT_THROW(Lemma53Solution("x^2 - y^2"), Error);
  EXPECT_THROW(Lemma53Solution("x^2*y^2"), Error);  // vanishes on the axes
}

TEST(Lemma53, CsvDump) {
  Annulus a;
  a.n_r = 2;
  a.n_theta = 4;
  auto csv = lemma53_csv(reference(), a);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "r,theta,f,g,h,residual");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 9);
}

TEST(Prop51, IncrementIsExactlyT) {
  auto s = get_entry("example9");
  Operator op(s.op);
  auto factory = construction_factory();
  for (double T : {1024.0, 65536.0}) {
    ScenarioInstance inst(s, op, T);
    auto w = inst.witness(s.witnesses[0], factory);
    EXPECT_EQ(w->value(inst.q().to_vector()) - w->value(inst.p().to_vector()), T);
  }
}

TEST(Prop51, SingleRatioBoundAcrossT) {
  auto s = get_entry("example9");
  Operator op(s.op);
  auto factory = construction_factory();
  std::vector<double> r0, r1;
  for (double T : {1024.0, 65536.0}) {
    ScenarioInstance inst(s, op, T);
    auto w = inst.witness(s.witnesses[0], factory);
    r0.push_back(witness_ratios(op, *w, inst.witness_samples(0)).r_star());
    r1.push_back(witness_ratios(op, *w, inst.witness_samples(1)).r_star());
  }
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_LT(r0[i], 4.0);
    EXPECT_LE(r1[i], 1.1 * r0[i]);
  }
  EXPECT_NEAR(r0[1] / r0[0], 1.0, 0.1);
}

TEST(Prop51, ErrorTermsVanishOnTheSymbolZeroSet) {
  auto s = get_entry("example9");
  Operator op(s.op);
  auto sol = std::make_shared<const Lemma53Solution>(kFlagship);
  Prop51Witness w(kExample9B, sol);
  const std::vector<std::string> xy = {"x", "y"};
  auto b = ScalarExpr::parse(kExample9B, xy);
  for (auto [x, y] : {std::pair{0.1, 0.12}, {-0.2, 0.05}, {0.03, -0.04}}) {
    const double tau = 4096;
    std::vector<double> at = {x, y};
    State st = {x, y, 0.3, tau * b.derivative(1).eval(at), -tau * b.derivative(0).eval(at), tau};
    State g(6), H(6);
    w.gradient(st, g);
    for (int j = 0; j < 2; ++j) {
      op.hamiltonian(j, st, H);
      double v = 0;
      for (int i = 0; i < 6; ++i) v += H[static_cast<std::size_t>(i)] * g[static_cast<std::size_t>(i)];
      EXPECT_NEAR(v, 0.0, 1e-9 * tau);
    }
  }
}

TEST(Prop51, LoopsConsistentAndLaplacianChecked) {
  auto sol = std::make_shared<const Lemma53Solution>(kFlagship);
  Prop51Witness w(kExample9B, sol);
  EXPECT_LT(w.check_loops(0.25), Prop51Witness::kLoopTolerance);
  EXPECT_THROW(Prop51Witness("x^8/56", sol), Error);
}

TEST(Prop51, Example9LowerBoundIsLinear) {
  ScanOptions opt;
  opt.factory = construction_factory();
  auto r = scan_exponent(get_entry("example9"), dyadic_lambdas(1024, 1 << 16), opt);
  EXPECT_NEAR(r.lower_fit.slope, 1.0, 0.02);
  for (const auto& row : r.rows) EXPECT_LE(row.lower, row.upper);
}
