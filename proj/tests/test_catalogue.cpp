#include <gtest/gtest.h>

#include <cmath>

#include "phasemetric/catalogue.hpp"
#include "phasemetric/prop51.hpp"
#include "phasemetric/scan.hpp"

using namespace phasemetric;

namespace {

// Smallest L such that sum_{|I| <= L} sigma_I(x, xi)^2 has no zero on the unit xi-sphere;
// nullopt if none up to cap. Sphere sampling followed by a compass search from the lowest samples.
std::optional<int> brute_force_order(const Operator& op, std::span<const double> x, int cap) {
  const int d = op.dim();
  const auto ud = static_cast<std::size_t>(d);
  std::vector<std::vector<double>> dirs;
  if (d == 2) {
    for (int i = 0; i < 720; ++i) dirs.push_back({std::cos(M_PI * i / 720.0), std::sin(M_PI * i / 720.0)});
  } else {
    const int n = 4000;
    const double g = M_PI * (3 - std::sqrt(5.0));
    for (int i = 0; i < n; ++i) {
      double z = 1 - 2 * (i + 0.5) / n, r = std::sqrt(1 - z * z);
      dirs.push_back({r * std::cos(g * i), r * std::sin(g * i), z});
    }
  }
  for (int L = 1; L <= cap; ++L) {
    auto es = iterated_brackets(op.symbols(), L);
    std::vector<double> s(2 * ud);
    auto f = [&](std::vector<double> xi) {
      double n = 0;
      for (double v : xi) n += v * v;
      n = std::sqrt(n);
      for (std::size_t i = 0; i < ud; ++i) {
        s[i] = x[i];
        s[ud + i] = xi[i] / n;
      }
      double sum = 0;
      for (const auto& e : es.entries()) sum += e.sigma(s) * e.sigma(s);
      return sum;
    };
    std::vector<std::pair<double, std::size_t>> vals;
    double top = 0;
    for (std::size_t i = 0; i < dirs.size(); ++i) {
      vals.push_back({f(dirs[i]), i});
      top = std::max(top, vals.back().first);
    }
    std::sort(vals.begin(), vals.end());
    double low = vals[0].first;
    for (std::size_t k = 0; k < std::min<std::size_t>(8, vals.size()); ++k) {
      auto xi = dirs[vals[k].second];
      double v = vals[k].first;
      int budget = 600;
      for (double h = 0.05; h > 1e-10 && budget-- > 0;) {
        bool moved = false;
        for (std::size_t i = 0; i < ud && !moved; ++i)
          for (double sg : {1.0, -1.0}) {
            auto t = xi;
            t[i] += sg * h;
            double ft = f(t);
            if (ft < v) {
              double n = 0;
              for (double c : t) n += c * c;
              for (double& c : t) c /= std::sqrt(n);
              v = ft;
              xi = t;
              moved = true;
              break;
            }
          }
        if (!moved) h /= 2;
      }
      low = std::min(low, v);
    }
    if (low > 1e-14 * top) return L;
  }
  return std::nullopt;
}

}  // namespace

TEST(Catalogue, ListsRegistry) {
  auto names = catalogue_names();
  for (const char* n : {"elliptic2d", "grusin(m)", "metivier", "baouendi_goulaouic(m)", "fedii(a)", "example6_pair",
                        "example7(k,m)", "example8(m,r)", "example9", "heisenberg"})
    EXPECT_NE(std::find(names.begin(), names.end(), n), names.end()) << n;
}

TEST(Catalogue, UnknownNameListsRegistry) {
  try {
    get_entry("nope");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnknownEntry);
    EXPECT_NE(std::string(e.what()).find("example7(k,m)"), std::string::npos);
  }
}

TEST(Catalogue, ParametersByNameOrMap) {
  EXPECT_EQ(get_entry("example7(2,3)").name, get_entry("example7", {{"k", "2"}, {"m", "3"}}).name);
  EXPECT_EQ(*get_entry("example7", {{"k", "2"}, {"m", "3"}}).expected_exponent, "2/3");
  EXPECT_EQ(*get_entry("metivier").expected_gevrey, "2");
  for (int m = 2; m <= 4; ++m)
    for (int r = 2; r <= 4; ++r)
      EXPECT_EQ(parse_rational(*get_entry("example8", {{"m", std::to_string(m)}, {"r", std::to_string(r)}}).expected_exponent),
                make_rational(m * r - m + 1, m * r));
  EXPECT_EQ(*get_entry("baouendi_goulaouic(3)").expected_exponent, "1/3");
  EXPECT_THROW(get_entry("example7", {{"q", "1"}}), Error);
  EXPECT_THROW(get_entry("example7(3,2)"), Error);
}

TEST(Catalogue, Example6PairHasTwoMembers) {
  auto v = get_entries("example6_pair");
  ASSERT_EQ(v.size(), 2u);
  EXPECT_THROW(get_entry("example6_pair"), Error);
  EXPECT_EQ(get_entry("example6_pair/L2").op.fields.size(), 3u);
  EXPECT_EQ(get_entry("example6_pair/L1").p, get_entry("example6_pair/L2").p);
}

TEST(Catalogue, Example9LaplacianOfB) {
  const std::vector<std::string> xy = {"x", "y"};
  auto b = ScalarExpr::parse(kExample9B, xy);
  EXPECT_EQ(b.derivative(0).derivative(0) + b.derivative(1).derivative(1), ScalarExpr::parse(kExample9Lambda, xy));
}

TEST(Catalogue, PointsSeparatedAcrossScanRange) {
  for (const auto& s : catalogue_defaults()) {
    Operator op(s.op);
    for (double lam : {s.cert_range.lo, s.cert_range.hi, s.grid_range.lo}) {
      ScenarioInstance inst(s, op, lam);
      EXPECT_TRUE(is_separated(inst.p(), inst.q(), inst.separation())) << s.name << " lambda=" << lam;
    }
    if (s.expected_exponent) {
      double e = rational_value(*s.expected_exponent);
      EXPECT_GT(e, 0) << s.name;
      EXPECT_LE(e, 1) << s.name;
    }
  }
}

TEST(Catalogue, CertificateEndsAtQ) {
  for (const auto& s : catalogue_defaults()) {
    Operator op(s.op);
    for (double lam : {1024.0, 1048576.0}) {
      ScenarioInstance inst(s, op, lam);
      auto r = certificate_path_cost(op, inst.p().to_vector(), inst.certificate());
      auto q = inst.q().to_vector();
      // Chart tolerance: a hundredth of the smallest chart cell.
      for (const auto& a : inst.chart().axes) {
        double h = (a.hi - a.lo) / a.cells;
        EXPECT_NEAR(r.end[static_cast<std::size_t>(a.coord)], q[static_cast<std::size_t>(a.coord)], 1e-2 * h)
            << s.name << " coord " << a.coord;
      }
      for (std::size_t i = 0; i < q.size(); ++i) EXPECT_NEAR(r.end[i], q[i], 1e-6 * (1 + std::fabs(q[i]))) << s.name;
    }
  }
}

TEST(Catalogue, Example8EndpointTauGrowsByOrderLambda) {
  auto s = get_entry("example8(2,3)");
  Operator op(s.op);
  for (double lam : {1024.0, 65536.0}) {
    ScenarioInstance inst(s, op, lam);
    auto r = certificate_path_cost(op, inst.p().to_vector(), inst.certificate());
    double dtau = r.end[3] - lam;
    EXPECT_GT(dtau, 0.5 * lam);
    EXPECT_LT(dtau, 10 * lam);
  }
}

TEST(Catalogue, WitnessRatiosRefinementStable) {
  auto factory = construction_factory();
  for (const auto& s : catalogue_defaults()) {
    Operator op(s.op);
    for (double lam : {1024.0, 1048576.0}) {
      ScenarioInstance inst(s, op, lam);
      for (const auto& w : s.witnesses) {
        auto wit = inst.witness(w, factory);
        double r0 = witness_ratios(op, *wit, inst.witness_samples(0)).r_star();
        double r1 = witness_ratios(op, *wit, inst.witness_samples(1)).r_star();
        EXPECT_TRUE(std::isfinite(r0)) << s.name;
        EXPECT_LE(r1, 1.25 * r0 + 1e-12) << s.name << " " << w.id;
        EXPECT_LT(r0, 10.0) << s.name << " " << w.id;
      }
    }
  }
}

TEST(Catalogue, SymplecticExpectations) {
  for (const auto& s : catalogue_defaults()) {
    Operator op(s.op);
    for (const auto& c : s.symplectic) {
      auto p = PhasePoint::from_vector(c.point);
      if (c.is_symplectic) EXPECT_EQ(to_string(is_symplectic_at(op.symbols(), p).verdict), *c.is_symplectic) << s.name;
      if (c.span) EXPECT_EQ(to_string(hamiltonian_span_equals_orthocomplement(op.symbols(), p)), *c.span) << s.name;
    }
  }
}

TEST(Catalogue, BracketOrderMatchesBruteForce) {
  for (const auto& s : catalogue_defaults()) {
    Operator op(s.op);
    const int d = op.dim();
    const int cap = s.op.mode == SymbolMode::PrincipalOnly ? 4 : 6;
    std::vector<std::vector<double>> points = {std::vector<double>(static_cast<std::size_t>(d), 0.0)};
    std::vector<double> generic = {0.5, 0.3, 0.7};
    generic.resize(static_cast<std::size_t>(d));
    points.push_back(generic);
    for (const auto& x : points) {
      auto got = bracket_order_at(op.symbols(), x, cap);
      auto want = brute_force_order(op, x, cap);
      EXPECT_EQ(got.has_value(), want.has_value()) << s.name;
      if (got && want) EXPECT_EQ(*got, *want) << s.name << " at x0=" << x[0];
    }
  }
}

TEST(Catalogue, FlatFediiHasNoBracketOrderButLinearWitness) {
  auto s = get_entry("fedii");
  Operator op(s.op);
  std::vector<double> origin = {0, 0};
  EXPECT_FALSE(bracket_order_at(op.symbols(), origin, 6).has_value());
  for (double lam : {1024.0, 1048576.0}) {
    ScenarioInstance inst(s, op, lam);
    auto w = inst.witness(s.witnesses[0]);
    auto e = witness_lower_bound(op, *w, inst.p().to_vector(), inst.q().to_vector(), inst.witness_samples());
    EXPECT_GE(e.lower, lam / 2);
    EXPECT_GT(e.lower, 10 * std::log(rho0(inst.p(), inst.q())));
  }
}

TEST(Scenario, JsonRoundTripIsExact) {
  for (const auto& s : catalogue_defaults()) {
    json j = s;
    auto back = parse_scenario(j.dump(2));
    EXPECT_EQ(json(back).dump(), j.dump()) << s.name;
    ScanOptions opt;
    opt.factory = construction_factory();
    auto a = scan_exponent(s, {1024, 4096}, opt);
    auto b = scan_exponent(back, {1024, 4096}, opt);
    EXPECT_EQ(scan_csv(a), scan_csv(b)) << s.name;
  }
}

TEST(Scenario, ParseErrors) {
  EXPECT_THROW(parse_scenario("{"), Error);
  EXPECT_THROW(parse_scenario("{\"name\": \"x\"}"), Error);
  auto s = get_entry("elliptic2d");
  s.p = {"0", "0", "lambda"};
  Operator op(s.op);
  EXPECT_THROW(ScenarioInstance(s, op, 16), Error);
  s = get_entry("elliptic2d");
  s.witnesses[0].expr = "zeta";
  ScenarioInstance inst(s, op, 16);
  EXPECT_THROW(inst.witness(s.witnesses[0]), Error);
}

TEST(Scenario, DefinitionsChain) {
  auto s = get_entry("example8(2,2)");
  Operator op(s.op);
  ScenarioInstance inst(s, op, 65536);
  EXPECT_NEAR(inst.value("delta"), std::pow(65536.0, -0.25), 1e-15);
  EXPECT_NEAR(inst.value("tq"), std::pow(65536.0, -0.25) / 2, 1e-15);
  EXPECT_NEAR(inst.q().xi[1], 4 * 65536.0, 1e-6);
}

TEST(Scan, LeastSquaresExactLine) {
  auto f = least_squares({0, 1, 2, 3}, {1, 3, 5, 7});
  EXPECT_DOUBLE_EQ(f.slope, 2);
  EXPECT_DOUBLE_EQ(f.intercept, 1);
  EXPECT_DOUBLE_EQ(f.r2, 1);
}

TEST(Scan, DyadicLambdas) {
  auto v = dyadic_lambdas(1024, 16777216);
  EXPECT_EQ(v.size(), 15u);
  EXPECT_EQ(v.back(), 16777216.0);
  EXPECT_THROW(dyadic_lambdas(0, 4), Error);
}

TEST(Scan, EllipticSlopesAreOne) {
  auto r = scan_exponent(get_entry("elliptic2d"), dyadic_lambdas(1024, 1 << 20));
  EXPECT_NEAR(r.lower_fit.slope, 1.0, 0.05);
  EXPECT_NEAR(r.upper_fit.slope, 1.0, 0.05);
  for (const auto& row : r.rows) EXPECT_LE(row.lower, row.upper * 1.1);
}

TEST(Scan, CsvFormatAndOrdering) {
  ScanOptions opt;
  opt.jobs = 3;
  auto r = scan_exponent(get_entry("example7(2,3)"), {4096, 1024, 2048}, opt);
  auto csv = scan_csv(r);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "lambda,lower,upper,rho0,witness_id,method");
  EXPECT_EQ(r.rows[0].lambda, 1024);
  EXPECT_EQ(r.rows[2].lambda, 4096);
  ScanOptions one;
  EXPECT_EQ(csv, scan_csv(scan_exponent(get_entry("example7(2,3)"), {1024, 2048, 4096}, one)));
  auto j = scan_fit_json(r);
  for (const char* k : {"slope_lower", "slope_upper", "r2_lower", "r2_upper", "expected_exponent"})
    EXPECT_TRUE(j.contains(k)) << k;
  EXPECT_NEAR(j["expected_exponent"].get<double>(), 2.0 / 3, 1e-9);
}

TEST(Scan, Example6SeparationGrows) {
  auto l1 = scan_exponent(get_entry("example6_pair/L1"), dyadic_lambdas(1024, 1 << 16));
  auto l2 = scan_exponent(get_entry("example6_pair/L2"), dyadic_lambdas(1024, 1 << 16));
  double prev = 0;
  for (std::size_t i = 0; i < l1.rows.size(); ++i) {
    double ratio = l1.rows[i].lower / l2.rows[i].upper;
    EXPECT_GT(ratio, prev);
    prev = ratio;
  }
}

TEST(Scan, VarrhoHalfPowerAndDyadicStability) {
  for (const char* n : {"heisenberg", "baouendi_goulaouic(2)"}) {
    auto r = varrho_scan(get_entry(n), {64, 128, 256, 512, 1024});
    EXPECT_NEAR(r.fit.slope, 0.5, 0.05) << n;
    for (std::size_t i = 1; i < r.rows.size(); ++i) {
      double q = r.rows[i].value / r.rows[i - 1].value;
      EXPECT_GT(q, 1.0) << n;
      EXPECT_LT(q, 2.0) << n;
    }
  }
  EXPECT_THROW(varrho_scan(get_entry("elliptic2d"), {64}), Error);
}
