// One pass/fail line per acceptance criterion; exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "phasemetric/catalogue.hpp"
#include "phasemetric/lemma53.hpp"
#include "phasemetric/obstruction.hpp"
#include "phasemetric/prop51.hpp"
#include "phasemetric/scan.hpp"
#include "support.hpp"

using namespace phasemetric;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void check(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + std::string("FAILED ") + what;
    }
  }
  void note(const std::string& s) { detail += (detail.empty() ? "" : "; ") + s; }
};

std::string g(double v, int digits = 4) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

// ---------------------------------------------------------------- 1

Outcome check_bracket_algebra() {
  Outcome o;
  std::mt19937_64 rng(20240601);
  int anti = 0, jac = 0, leib = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int d = 1 + trial % 3;
    auto f = testsupport::random_symbol(rng, d, 4, 4);
    auto gs = testsupport::random_symbol(rng, d, 4, 4);
    auto h = testsupport::random_symbol(rng, d, 4, 4);
    anti += (poisson_bracket(f, gs) + poisson_bracket(gs, f)).is_zero();
    jac += (poisson_bracket(f, poisson_bracket(gs, h)) + poisson_bracket(gs, poisson_bracket(h, f)) +
            poisson_bracket(h, poisson_bracket(f, gs)))
               .is_zero();
    leib += poisson_bracket(f, gs * h) == poisson_bracket(f, gs) * h + gs * poisson_bracket(f, h);
  }
  o.check(anti == 100, "antisymmetry");
  o.check(jac == 100, "Jacobi");
  o.check(leib == 100, "Leibniz");
  o.note("exact identities on " + std::to_string(anti) + "/" + std::to_string(jac) + "/" + std::to_string(leib) +
         " of 100 triples");
  return o;
}

// ---------------------------------------------------------------- 2

Outcome check_example7_comparability() {
  Outcome o;
  Operator op(get_entry("example7(2,3)").op);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> base(-1, 1), expo(8, 20);
  std::normal_distribution<double> dir;
  double lo = INFINITY, hi = 0;
  for (int i = 0; i < 10000; ++i) {
    double x = base(rng), y = base(rng), t = base(rng);
    double a = dir(rng), b = dir(rng), c = dir(rng), n = std::sqrt(a * a + b * b + c * c);
    double r = std::exp2(expo(rng)) / n;
    double xi = a * r, eta = b * r, tau = c * r;
    std::vector<double> p = {x, y, t, xi, eta, tau};
    double closed = std::fabs(xi) + std::fabs(x * eta) + std::fabs(x * x * tau) + std::sqrt(std::fabs(eta)) +
                    std::cbrt(std::fabs(tau));
    double ratio = op.sigma_tilde(p) / closed;
    lo = std::min(lo, ratio);
    hi = std::max(hi, ratio);
  }
  o.check(lo >= 0.1 && hi <= 10, "ratio outside [1/10, 10]");
  o.note("ratio range [" + g(lo) + ", " + g(hi) + "] over 10^4 points");
  return o;
}

// ---------------------------------------------------------------- 3 and 10

struct ScanCase {
  const char* entry;
  double target;
};

std::vector<std::pair<std::string, ScanResult>> g_scans;  // shared with criterion 10

const ScanResult& scanned(const std::string& entry) {
  for (const auto& [n, r] : g_scans)
    if (n == entry) return r;
  ScanOptions opt;
  opt.floor_family = true;
  opt.factory = construction_factory();
  g_scans.emplace_back(entry, scan_exponent(get_entry(entry), dyadic_lambdas(1 << 10, 1 << 24), opt));
  return g_scans.back().second;
}

Outcome check_exponent_reproduction() {
  Outcome o;
  const std::vector<ScanCase> cases = {{"elliptic2d", 1.0},           {"baouendi_goulaouic(2)", 0.5},
                                       {"baouendi_goulaouic(3)", 1.0 / 3}, {"example7(2,3)", 2.0 / 3},
                                       {"example8(2,2)", 0.75},       {"example6_pair/L1", 1.0},
                                       {"example6_pair/L2", 0.5}};
  for (const auto& c : cases) {
    const auto& r = scanned(c.entry);
    double worst = 0;
    for (const auto& row : r.rows) worst = std::max(worst, row.lower / row.upper);
    const std::string n = c.entry;
    o.check(std::fabs(r.lower_fit.slope - c.target) <= 0.1, n + " lower slope");
    o.check(std::fabs(r.upper_fit.slope - c.target) <= 0.1, n + " upper slope");
    o.check(r.lower_fit.r2 >= 0.98 && r.upper_fit.r2 >= 0.98, n + " R^2");
    o.check(worst <= 1.1, n + " witness above 1.1 x certificate");
    o.note(n + " " + g(r.lower_fit.slope) + "/" + g(r.upper_fit.slope));
  }
  const auto& l1 = scanned("example6_pair/L1");
  const auto& l2 = scanned("example6_pair/L2");
  bool mono = true;
  for (std::size_t i = 1; i < l1.rows.size(); ++i) {
    mono = mono && l1.rows[i].upper / l2.rows[i].upper > l1.rows[i - 1].upper / l2.rows[i - 1].upper;
    mono = mono && l1.rows[i].lower / l2.rows[i].lower > l1.rows[i - 1].lower / l2.rows[i - 1].lower;
  }
  o.check(mono, "L1/L2 ratio not increasing");
  return o;
}

Outcome check_floor_family() {
  Outcome o;
  for (const char* n : {"grusin(2)", "metivier", "heisenberg"}) scanned(n);
  for (const auto& [n, r] : g_scans) {
    const int m = get_entry(n).bracket_order;
    if (m <= 0 || !r.floor_fit) continue;
    o.check(r.floor_fit->slope >= 1.0 / m - 0.05, n + " floor slope");
    o.note(n + " " + g(r.floor_fit->slope) + " (1/m = " + g(1.0 / m) + ")");
  }
  return o;
}

// ---------------------------------------------------------------- 4

Outcome check_grid_cross_check() {
  Outcome o;
  for (const char* n : {"example6_pair/L1", "example6_pair/L2", "example8(2,2)"}) {
    auto s = get_entry(n);
    Operator op(s.op);
    ScanOptions opt;
    opt.method = ScanMethod::Both;
    double worst = 0;
    for (double lam : {256.0, 1024.0, 4096.0}) {
      auto row = scan_row(s, op, lam, opt);
      double ratio = row.grid_upper / row.certificate_upper;
      worst = std::max({worst, ratio, 1 / ratio});
      o.check(ratio <= 4 && ratio >= 0.25, std::string(n) + " grid/certificate at " + g(lam));
      o.check(row.grid_upper >= row.lower, std::string(n) + " grid below witness at " + g(lam));
    }
    o.note(std::string(n) + " worst factor " + g(worst));
  }
  return o;
}

// ---------------------------------------------------------------- 5

Outcome check_varrho_family() {
  Outcome o;
  auto Rs = dyadic_lambdas(64, 65536);
  for (const char* n : {"heisenberg", "baouendi_goulaouic(2)"}) {
    auto r = varrho_scan(get_entry(n), Rs);
    o.check(std::fabs(r.fit.slope - 0.5) <= 0.05, std::string(n) + " slope");
    o.note(std::string(n) + " " + g(r.fit.slope));
  }
  return o;
}

// ---------------------------------------------------------------- 6

Outcome check_lemma53() {
  Outcome o;
  Lemma53Solution a(kExample9Lambda), b(kExample9Lambda, Lemma53Grid{}.refined());
  auto ra = verify_lemma53(a), rb = verify_lemma53(b);
  o.check(ra.residual <= 0.02, "reference residual");
  o.check(rb.residual < ra.residual, "residual does not decrease");
  auto stable = [&](double x, double y, const char* what) {
    o.check(std::fabs(y / x - 1) <= 0.05, std::string(what) + " not refinement-stable");
  };
  stable(ra.h_max, rb.h_max, "sup|h|");
  stable(ra.b_theta, rb.b_theta, "sup|b_theta|");
  stable(ra.r_grad_h, rb.r_grad_h, "sup r|grad h|");
  o.check(ra.closed_form && *ra.closed_form <= 1e-3, "closed form");
  o.note("residual " + g(ra.residual) + " -> " + g(rb.residual) + ", sup|h| " + g(ra.h_max) + ", sup|b_theta| " +
         g(ra.b_theta) + ", sup r|grad h| " + g(ra.r_grad_h) + ", closed-form error " +
         g(ra.closed_form.value_or(NAN)));
  return o;
}

// ---------------------------------------------------------------- 7

Outcome check_prop51() {
  Outcome o;
  auto s = get_entry("example9");
  Operator op(s.op);
  auto factory = construction_factory();
  double bound = 0;
  for (double T : {1024.0, 65536.0}) {
    ScenarioInstance inst(s, op, T);
    auto w = inst.witness(s.witnesses[0], factory);
    o.check(w->value(inst.q().to_vector()) - w->value(inst.p().to_vector()) == T, "increment at T = " + g(T));
    double r0 = witness_ratios(op, *w, inst.witness_samples(0)).r_star();
    double r1 = witness_ratios(op, *w, inst.witness_samples(1)).r_star();
    o.check(r1 <= 1.1 * r0, "ratio not refinement-stable at T = " + g(T));
    bound = std::max({bound, r0, r1});
    o.note("T " + g(T) + " r* " + g(r0) + " (refined " + g(r1) + ")");
  }
  o.check(bound < 4, "ratio bound");
  o.note("single bound " + g(bound));
  return o;
}

// ---------------------------------------------------------------- 8

Outcome check_obstruction() {
  Outcome o;
  auto coeffs = [](const ObstructionSystem& s, long a, long b) {
    std::vector<Rational> v(s.unknowns.size(), Rational(0));
    v[static_cast<std::size_t>(s.index('f', 1, 0))] = a;
    v[static_cast<std::size_t>(s.index('g', 0, 1))] = b;
    return v;
  };
  auto s = taylor_obstruction(kExample9Lambda, 6);
  o.check(!s.consistent, "flagship verdict");
  o.check(certificate_valid(s), "certificate");
  o.check(implies_equation(s, coeffs(s, 3, 3), 1), "3c1 + 3c2 = 1");
  o.check(implies_equation(s, coeffs(s, 7, 1), 1), "7c1 + c2 = 1");
  o.check(implies_equation(s, coeffs(s, 1, 7), 1), "c1 + 7c2 = 1");

  auto h = taylor_obstruction("x^2*y^2", 6);
  o.check(h.consistent, "x^2 y^2 verdict");
  o.check(implies_equation(h, coeffs(h, 1, 1), make_rational(1, 3)), "c1 + c2 = 1/3");
  o.check(!h.determined[static_cast<std::size_t>(h.index('f', 1, 0))], "c1 should be free");

  auto q = taylor_obstruction("x^4 + y^4 + x^2*y^2", 6);
  const auto c1 = static_cast<std::size_t>(q.index('f', 1, 0)), c2 = static_cast<std::size_t>(q.index('g', 0, 1));
  o.check(q.consistent && q.determined[c1] && q.determined[c2] && q.solution[c1] == make_rational(1, 6) &&
              q.solution[c2] == make_rational(1, 6),
          "quartic c1 = c2 = 1/6");
  o.note("flagship " + s.verdict() + " (" + std::to_string(s.equations.size()) + " equations), x^2y^2 " + h.verdict() +
         ", quartic " + q.verdict() + " c1 = " + to_string(q.solution[c1]));
  return o;
}

// ---------------------------------------------------------------- 9

Outcome check_symplectic() {
  Outcome o;
  int checks = 0;
  for (const char* n : {"heisenberg", "fedii", "baouendi_goulaouic(2)", "example9"}) {
    auto s = get_entry(n);
    Operator op(s.op);
    for (const auto& c : s.symplectic) {
      auto p = PhasePoint::from_vector(c.point);
      if (c.is_symplectic) {
        std::string got = to_string(is_symplectic_at(op.symbols(), p).verdict);
        o.check(got == *c.is_symplectic, std::string(n) + " is_symplectic " + got);
        ++checks;
      }
      if (c.span) {
        std::string got = to_string(hamiltonian_span_equals_orthocomplement(op.symbols(), p));
        o.check(got == *c.span, std::string(n) + " span " + got);
        ++checks;
      }
    }
  }
  o.note(std::to_string(checks) + " verdicts compared");
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double limit_s;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "bracket algebra", 10, check_bracket_algebra},
      {2, "effective-symbol comparability", 30, check_example7_comparability},
      {3, "exponent reproduction", 300, check_exponent_reproduction},
      {4, "grid cross-check", 1200, check_grid_cross_check},
      {5, "varrho_R family", 300, check_varrho_family},
      {6, "divergence equation", 120, check_lemma53},
      {7, "constructed witness", 120, check_prop51},
      {8, "Taylor obstruction", 5, check_obstruction},
      {9, "symplectic classifiers", 5, check_symplectic},
      {10, "floor witness family", 300, check_floor_family},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.note(std::string("exception: ") + e.what());
    }
    double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (dt > c.limit_s) {
      o.pass = false;
      o.note("over time limit");
    }
    failed += !o.pass;
    std::printf("criterion %2d %-32s %s  %.2fs (limit %gs)  %s\n", c.id, c.name, o.pass ? "PASS" : "FAIL", dt, c.limit_s,
                o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed ? 1 : 0;
}
