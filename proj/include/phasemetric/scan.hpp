#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "phasemetric/distance.hpp"
#include "phasemetric/scenario.hpp"

namespace phasemetric {

enum class ScanMethod { Certificate, Grid, Both };

inline const char* to_string(ScanMethod m) {
  switch (m) {
    case ScanMethod::Certificate: return "certificate";
    case ScanMethod::Grid: return "grid";
    case ScanMethod::Both: return "both";
  }
  return "?";
}

inline ScanMethod parse_scan_method(const std::string& s) {
  if (s == "certificate") return ScanMethod::Certificate;
  if (s == "grid") return ScanMethod::Grid;
  if (s == "both") return ScanMethod::Both;
  throw Error(ErrorCode::Parse, "unknown scan method '" + s + "' (certificate|grid|both)");
}

struct ScanRow {
  double lambda = 0;
  double lower = 0;
  double upper = 0;
  double rho0 = 0;
  std::string witness_id;
  std::string method;
  double certificate_upper = NAN;
  double grid_upper = NAN;
  double grid_slack = 0;
  double floor_lower = NAN;  // best of the lambda^{1/m} x_j, lambda^{-(m-1)/m} xi_j family
  double r_star = 0;         // sampled ratio of the winning witness
  bool separated = false;
};

struct LinearFit {
  double slope = NAN, intercept = NAN, r2 = NAN;
  std::size_t points = 0;
};

struct ScanResult {
  std::string scenario;
  ScanMethod method = ScanMethod::Certificate;
  std::vector<ScanRow> rows;
  LinearFit lower_fit, upper_fit;
  std::optional<LinearFit> floor_fit;
  std::optional<LinearFit> log_fit;  // lower against log rho0
  std::optional<double> expected;
};

struct ScanOptions {
  ScanMethod method = ScanMethod::Certificate;
  int jobs = 1;
  int sample_refine = 0;
  bool floor_family = false;
  WitnessFactory factory;
  std::optional<GridOptions> grid;
};

/// Least squares y = a + b x.
inline LinearFit least_squares(const std::vector<double>& x, const std::vector<double>& y) {
  LinearFit f;
  const std::size_t n = x.size();
  f.points = n;
  if (n < 2) return f;
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ssr = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double r = y[i] - (f.intercept + f.slope * x[i]);
    ssr += r * r;
  }
  f.r2 = syy > 0 ? 1 - ssr / syy : 1.0;
  return f;
}

/// Log-log fit; the two smallest lambdas are dropped when at least five remain.
inline LinearFit loglog_fit(const std::vector<double>& lambda, const std::vector<double>& v) {
  std::vector<double> x, y;
  const std::size_t skip = lambda.size() >= 7 ? 2 : 0;
  for (std::size_t i = skip; i < lambda.size(); ++i) {
    if (!(v[i] > 0) || !std::isfinite(v[i])) continue;
    x.push_back(std::log(lambda[i]));
    y.push_back(std::log(v[i]));
  }
  return least_squares(x, y);
}

inline std::vector<double> dyadic_lambdas(double lo, double hi) {
  if (!(lo > 0) || !(hi >= lo)) throw Error(ErrorCode::InvalidArgument, "bad lambda range");
  std::vector<double> v;
  for (double l = lo; l <= hi * (1 + 1e-12); l *= 2) v.push_back(l);
  return v;
}

/// Witnesses lambda^{1/m} x_j and lambda^{-(m-1)/m} xi_j for bracket order m.
inline std::vector<WitnessSpec> floor_family(const Operator& op, int m) {
  std::vector<WitnessSpec> out;
  auto names = op.phase_variable_names();
  const int d = op.dim();
  const std::string a = "lambda^(1/" + std::to_string(m) + ")";
  const std::string b = "lambda^(-" + std::to_string(m - 1) + "/" + std::to_string(m) + ")";
  for (int i = 0; i < d; ++i) out.push_back({"floor:" + names[static_cast<std::size_t>(i)], "expr", a + "*" + names[static_cast<std::size_t>(i)]});
  for (int i = 0; i < d; ++i)
    out.push_back({"floor:" + names[static_cast<std::size_t>(d + i)], "expr", b + "*" + names[static_cast<std::size_t>(d + i)]});
  return out;
}

/// Runs fn(0..n-1) on up to `jobs` threads; the first failure (by index) is rethrown.
template <class F>
void parallel_for(std::size_t n, int jobs, F&& fn) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next++) < n;) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  jobs = std::max(1, std::min<int>(jobs, static_cast<int>(n)));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

struct WitnessBest {
  double lower = 0;
  std::string id;
  double r_star = 0;
};

inline WitnessBest best_witness(const ScenarioInstance& inst, const std::vector<WitnessSpec>& ws,
                                const std::vector<State>& samples, const WitnessFactory& factory) {
  WitnessBest best;
  auto p = inst.p().to_vector(), q = inst.q().to_vector();
  for (const auto& w : ws) {
    auto wit = inst.witness(w, factory);
    auto e = witness_lower_bound(inst.op(), *wit, p, q, samples);
    if (best.id.empty() || e.lower > best.lower) best = {e.lower, w.id, e.ratios.r_star()};
  }
  return best;
}

inline ScanRow scan_row(const ScenarioSpec& spec, const Operator& op, double lambda, const ScanOptions& opt) {
  ScenarioInstance inst(spec, op, lambda);
  ScanRow row;
  row.lambda = lambda;
  row.rho0 = rho0(inst.p(), inst.q());
  row.separated = is_separated(inst.p(), inst.q(), inst.separation());
  auto samples = inst.witness_samples(opt.sample_refine);
  if (!spec.witnesses.empty()) {
    auto b = best_witness(inst, spec.witnesses, samples, opt.factory);
    row.lower = b.lower;
    row.witness_id = b.id;
    row.r_star = b.r_star;
  }
  if (opt.floor_family && spec.bracket_order > 0)
    row.floor_lower = best_witness(inst, floor_family(op, spec.bracket_order), samples, opt.factory).lower;
  auto p = inst.p().to_vector();
  if (opt.method != ScanMethod::Grid) {
    if (spec.certificate.empty()) throw Error(ErrorCode::InvalidArgument, "scenario has no certificate path");
    row.certificate_upper = certificate_path_cost(op, p, inst.certificate()).cost;
  }
  if (opt.method != ScanMethod::Certificate) {
    auto e = upper_bound_distance(op, inst.chart(), inst.p(), inst.q(), opt.grid.value_or(spec.grid));
    row.grid_upper = e.upper;
    row.grid_slack = e.slack;
  }
  switch (opt.method) {
    case ScanMethod::Certificate: row.upper = row.certificate_upper; break;
    case ScanMethod::Grid: row.upper = row.grid_upper; break;
    case ScanMethod::Both: row.upper = std::min(row.certificate_upper, row.grid_upper); break;
  }
  row.method = to_string(opt.method);
  return row;
}

/// Lower (witness) and upper (certificate and/or grid) bounds over lambdas,
/// computed on up to opt.jobs threads; rows come back ordered by lambda.
inline ScanResult scan_exponent(const ScenarioSpec& spec, std::vector<double> lambdas, const ScanOptions& opt = {}) {
  std::sort(lambdas.begin(), lambdas.end());
  for (std::size_t i = 1; i < lambdas.size(); ++i)
    if (!(lambdas[i] > lambdas[i - 1])) throw Error(ErrorCode::InvalidArgument, "lambda values must be distinct");
  Operator op(spec.op);
  ScanResult res;
  res.scenario = spec.name;
  res.method = opt.method;
  res.rows.resize(lambdas.size());
  parallel_for(lambdas.size(), opt.jobs, [&](std::size_t i) { res.rows[i] = scan_row(spec, op, lambdas[i], opt); });

  std::vector<double> lam, lo, up, fl;
  for (const auto& r : res.rows) {
    lam.push_back(r.lambda);
    lo.push_back(r.lower);
    up.push_back(r.upper);
    fl.push_back(r.floor_lower);
  }
  res.lower_fit = loglog_fit(lam, lo);
  res.upper_fit = loglog_fit(lam, up);
  if (opt.floor_family && spec.bracket_order > 0) res.floor_fit = loglog_fit(lam, fl);
  if (spec.fit == "log") {
    std::vector<double> x;
    for (const auto& r : res.rows) x.push_back(std::log(r.rho0));
    res.log_fit = least_squares(x, lo);
  }
  if (spec.expected_exponent) res.expected = rational_value(*spec.expected_exponent);
  return res;
}

inline std::string format_g9(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

inline std::string scan_csv(const ScanResult& r) {
  std::string s = "lambda,lower,upper,rho0,witness_id,method\n";
  for (const auto& row : r.rows)
    s += format_g9(row.lambda) + "," + format_g9(row.lower) + "," + format_g9(row.upper) + "," + format_g9(row.rho0) +
         "," + row.witness_id + "," + row.method + "\n";
  return s;
}

inline json fit_number(double v) { return std::isfinite(v) ? json(std::stod(format_g9(v))) : json(nullptr); }

inline json scan_fit_json(const ScanResult& r) {
  json j = json::object();
  j["slope_lower"] = fit_number(r.lower_fit.slope);
  j["slope_upper"] = fit_number(r.upper_fit.slope);
  j["r2_lower"] = fit_number(r.lower_fit.r2);
  j["r2_upper"] = fit_number(r.upper_fit.r2);
  j["expected_exponent"] = r.expected ? fit_number(*r.expected) : json(nullptr);
  j["scenario"] = r.scenario;
  j["method"] = to_string(r.method);
  if (r.floor_fit) j["slope_floor"] = fit_number(r.floor_fit->slope);
  if (r.log_fit) j["log_fit"] = json{{"slope", fit_number(r.log_fit->slope)}, {"r2", fit_number(r.log_fit->r2)}};
  return j;
}

struct VarrhoRow {
  double R = 0;
  double value = 0;
};

struct VarrhoResult {
  std::string scenario;
  std::vector<VarrhoRow> rows;
  LinearFit fit;
};

inline std::vector<LatticeAxis> varrho_box(const ScenarioSpec& spec, const Operator& op) {
  if (!spec.varrho) throw Error(ErrorCode::InvalidArgument, "scenario '" + spec.name + "' has no varrho block");
  const auto& names = op.spec().variables;
  std::vector<LatticeAxis> box;
  for (const auto& a : spec.varrho->axes) {
    auto it = std::find(names.begin(), names.end(), a.coord);
    if (it == names.end()) throw Error(ErrorCode::Parse, "varrho axis '" + a.coord + "' is not a base variable");
    box.push_back({static_cast<int>(it - names.begin()), rational_value(a.lo), rational_value(a.hi), a.cells});
  }
  return box;
}

/// varrho_R between the scenario's base pair over the given R values.
inline VarrhoResult varrho_scan(const ScenarioSpec& spec, std::vector<double> Rs, int jobs = 1,
                                const GridOptions& grid = {}) {
  std::sort(Rs.begin(), Rs.end());
  Operator op(spec.op);
  auto box = varrho_box(spec, op);
  VarrhoResult res;
  res.scenario = spec.name;
  res.rows.resize(Rs.size());
  parallel_for(Rs.size(), jobs, [&](std::size_t i) {
    res.rows[i] = {Rs[i], varrho_R(op, box, spec.varrho->x, spec.varrho->y, Rs[i], grid)};
  });
  std::vector<double> r, v;
  for (const auto& row : res.rows) {
    r.push_back(row.R);
    v.push_back(row.value);
  }
  res.fit = loglog_fit(r, v);
  return res;
}

}  // namespace phasemetric
