#pragma once

#include <CLI11.hpp>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "phasemetric/catalogue.hpp"
#include "phasemetric/lemma53.hpp"
#include "phasemetric/obstruction.hpp"
#include "phasemetric/prop51.hpp"
#include "phasemetric/scan.hpp"

namespace phasemetric::cli {

enum ExitCode { kOk = 0, kComputation = 1, kUsage = 2 };

namespace detail {

struct Source {
  std::string entry, spec_file;
  std::map<std::string, std::string> params;  // filled from --k, --m, --r, --a
};

inline void add_source(CLI::App* sub, Source& src) {
  auto* g = sub->add_option_group("operator", "catalogue entry or spec file");
  g->add_option("--entry", src.entry, "catalogue entry, e.g. example7 or example6_pair/L1");
  g->add_option("--spec", src.spec_file, "JSON spec file")->check(CLI::ExistingFile);
  g->require_option(1);
  for (const char* p : {"k", "m", "r", "a"})
    sub->add_option(std::string("--") + p, src.params[p], std::string("entry parameter ") + p);
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::InvalidArgument, "cannot read '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << text)) throw std::runtime_error("cannot write '" + path + "'");
}

inline ScenarioSpec load(const Source& src) {
  std::map<std::string, std::string> params;
  for (const auto& [k, v] : src.params)
    if (!v.empty()) params[k] = v;
  if (!src.spec_file.empty()) {
    if (!params.empty()) throw Error(ErrorCode::InvalidArgument, "entry parameters do not apply to --spec");
    return parse_scenario(read_file(src.spec_file));
  }
  return get_entry(src.entry, params);
}

/// Plain decimal (including exponent notation) or a constant expression such as 2^12.
inline double number(const std::string& text) {
  char* end = nullptr;
  double v = std::strtod(text.c_str(), &end);
  if (text.empty() || *end != '\0') v = expr::NumExpr::parse(text, {}).eval({});
  if (!std::isfinite(v)) throw Error(ErrorCode::InvalidArgument, "'" + text + "' is not a finite number");
  return v;
}

/// Comma/semicolon/space separated numeric expressions.
inline std::vector<double> numbers(const std::string& text, std::size_t want, const char* what) {
  std::vector<double> v;
  std::string cur;
  int depth = 0;
  auto flush = [&] {
    if (!cur.empty()) v.push_back(number(cur));
    cur.clear();
  };
  for (char c : text) {
    if (c == '(') ++depth;
    if (c == ')') --depth;
    if (depth == 0 && (c == ',' || c == ';' || c == ' ')) flush();
    else cur += c;
  }
  flush();
  if (v.size() != want)
    throw Error(ErrorCode::InvalidArgument,
                std::string(what) + " needs " + std::to_string(want) + " numbers, got " + std::to_string(v.size()));
  return v;
}

inline int default_jobs() {
  if (const char* e = std::getenv("PHASEMETRIC_JOBS")) {
    char* end = nullptr;
    long v = std::strtol(e, &end, 10);
    if (end != e && *end == '\0' && v > 0) return static_cast<int>(v);
  }
  return 1;
}

inline std::string plot_data(const std::vector<double>& x, const std::vector<double>& y) {
  std::string s;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (x[i] > 0 && y[i] > 0 && std::isfinite(y[i])) s += format_g9(std::log2(x[i])) + " " + format_g9(std::log2(y[i])) + "\n";
  return s;
}

/// Fitted slopes that miss `expected` by more than `tol`.
inline std::vector<std::string> misses(const std::vector<std::pair<const char*, double>>& slopes, double expected,
                                       double tol) {
  std::vector<std::string> out;
  for (const auto& [name, s] : slopes)
    if (!(std::fabs(s - expected) <= tol))
      out.push_back(std::string(name) + " " + format_g9(s) + " differs from " + format_g9(expected) + " by more than " +
                    format_g9(tol));
  return out;
}

/// Rounds every floating-point value to 9 significant digits.
template <class J>
void round9(J& j) {
  if (j.is_number_float()) j = fit_number(j.template get<double>());
  else if (j.is_structured())
    for (auto& v : j) round9(v);
}

}  // namespace detail

/// Runs one subcommand; args exclude the program name.
inline int run_command(const std::vector<std::string>& args, std::ostream& out = std::cout,
                       std::ostream& err = std::cerr) {
  using namespace detail;
  CLI::App app("Phase-space geometry of sums of squares of vector fields", "phasemetric");
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  // Shared state; each subcommand binds what it uses.
  Source src;
  std::string point, at, method = "certificate", poly, out_prefix, csv_file, nu_method = "auto";
  double R = 1, lambda_min = 0, lambda_max = 0, R_min = 0, R_max = 0, tol = 0.05;
  std::string lambda_text = "1";
  std::optional<double> expect;
  int order = 0, cap = 12, refine = 0, degree = 0, jobs = default_jobs();
  bool plotdata = false, floor = false;
  std::string name;

  auto* symbols = app.add_subcommand("symbols", "principal symbols of the fields");
  add_source(symbols, src);

  auto* brackets = app.add_subcommand("brackets", "distinct iterated Poisson brackets");
  add_source(brackets, src);
  brackets->add_option("--order", order, "longest bracket (default: operator m)")->check(CLI::Range(1, 12));

  auto* sigma = app.add_subcommand("sigma", "effective symbol at a phase point");
  add_source(sigma, src);
  sigma->add_option("--point", point, "x1,..,xd,xi1,..,xid")->required();

  auto* ord = app.add_subcommand("order", "bracket order at a base point");
  add_source(ord, src);
  ord->add_option("--at", at, "x1,..,xd")->required();
  ord->add_option("--cap", cap, "largest order tried")->check(CLI::Range(1, 24));

  auto* nu_cmd = app.add_subcommand("nu", "nu(x, R) = min of sigma~ on the fiber sphere of radius R");
  add_source(nu_cmd, src);
  nu_cmd->add_option("--at", at, "x1,..,xd")->required();
  nu_cmd->add_option("--R", R, "fiber radius")->required()->check(CLI::PositiveNumber);
  nu_cmd->add_option("--method", nu_method, "auto|sphere|line")->check(CLI::IsMember({"auto", "sphere", "line"}));

  auto* sympl = app.add_subcommand("symplectic", "symplectic tests on the characteristic set");
  add_source(sympl, src);
  sympl->add_option("--point", point, "x1,..,xd,xi1,..,xid")->required();

  auto* dist = app.add_subcommand("dist", "distance bounds between the scenario points at one lambda");
  add_source(dist, src);
  dist->add_option("--lambda", lambda_text, "lambda (numeric expression)")->required();
  dist->add_option("--method", method, "certificate|grid|both")->check(CLI::IsMember({"certificate", "grid", "both"}));

  auto* scan = app.add_subcommand("scan", "lower/upper bounds over dyadic lambdas and their log-log fit");
  add_source(scan, src);
  scan->add_option("--method", method, "certificate|grid|both")->check(CLI::IsMember({"certificate", "grid", "both"}));
  scan->add_option("--lambda-min", lambda_min, "smallest lambda (default: scenario range)")->check(CLI::PositiveNumber);
  scan->add_option("--lambda-max", lambda_max, "largest lambda (default: scenario range)")->check(CLI::PositiveNumber);
  scan->add_option("--refine", refine, "witness sample refinement")->check(CLI::Range(0, 4));
  scan->add_flag("--floor", floor, "also fit the lambda^(1/m) floor witnesses");
  scan->add_option("--jobs", jobs, "worker threads (default: PHASEMETRIC_JOBS or 1)")->check(CLI::PositiveNumber);
  scan->add_option("--expect", expect, "expected exponent; mismatch exits 1");
  scan->add_option("--tol", tol, "tolerance for --expect")->check(CLI::NonNegativeNumber);
  auto* scan_out = scan->add_option("--out", out_prefix, "write PREFIX.csv and PREFIX.fit.json");
  scan->add_flag("--plotdata", plotdata, "also write PREFIX.lower.dat and PREFIX.upper.dat")->needs(scan_out);

  auto* wit = app.add_subcommand("witness", "witness ratios and lower bounds at one lambda");
  add_source(wit, src);
  wit->add_option("--lambda", lambda_text, "lambda (numeric expression)")->required();
  wit->add_option("--refine", refine, "sample refinement")->check(CLI::Range(0, 4));

  auto* varrho = app.add_subcommand("varrho", "varrho_R between the scenario base points over dyadic R");
  add_source(varrho, src);
  varrho->add_option("--R-min", R_min, "smallest R (default: scenario range)")->check(CLI::PositiveNumber);
  varrho->add_option("--R-max", R_max, "largest R (default: scenario range)")->check(CLI::PositiveNumber);
  varrho->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
  varrho->add_option("--expect", expect, "expected exponent; mismatch exits 1");
  varrho->add_option("--tol", tol, "tolerance for --expect")->check(CLI::NonNegativeNumber);
  auto* varrho_out = varrho->add_option("--out", out_prefix, "write PREFIX.csv and PREFIX.fit.json");
  varrho->add_flag("--plotdata", plotdata, "also write PREFIX.dat")->needs(varrho_out);

  auto* l53 = app.add_subcommand("lemma53", "solve and verify the divergence equation for a weight");
  l53->add_option("--lambda", poly, "weight polynomial in x, y")->required();
  l53->add_option("--refine", refine, "grid refinements")->check(CLI::Range(0, 3));
  l53->add_option("--csv", csv_file, "annulus dump r,theta,f,g,h,residual");

  auto* obs = app.add_subcommand("obstruction", "exact Taylor-coefficient system for a polynomial weight");
  obs->add_option("--lambda", poly, "weight polynomial in x, y")->required();
  obs->add_option("--degree", degree, "Taylor degree cap")->required()->check(CLI::Range(1, 40));

  auto* cat = app.add_subcommand("catalogue", "registered scenarios");
  cat->require_subcommand(1);
  auto* cat_list = cat->add_subcommand("list", "registry names");
  auto* cat_show = cat->add_subcommand("show", "summary of one entry");
  cat_show->add_option("name", name, "entry")->required();
  auto* cat_export = cat->add_subcommand("export", "entry as a JSON spec file");
  cat_export->add_option("name", name, "entry")->required();
  cat_export->add_option("--out", out_prefix, "output file (default: stdout)");
  for (auto* c : {cat_show, cat_export})
    for (const char* p : {"k", "m", "r", "a"})
      c->add_option(std::string("--") + p, src.params[p], std::string("entry parameter ") + p);

  std::vector<const char*> argv = {"phasemetric"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (symbols->parsed()) {
      Operator op(load(src).op);
      const auto& vars = op.variables();
      out << "mode " << to_string(op.spec().mode) << ", m = " << op.spec().m << "\n";
      for (int j = 0; j < op.nfields(); ++j)
        out << "sigma_" << j + 1 << " = " << op.symbols()[static_cast<std::size_t>(j)].to_string(vars) << "\n";
    } else if (brackets->parsed()) {
      Operator op(load(src).op);
      int L = order > 0 ? order : std::max(1, op.spec().m);
      auto es = iterated_brackets(op.symbols(), L);
      out << "length,multiplicity,index,symbol\n";
      for (const auto& e : es.entries()) {
        std::string idx;
        for (int i : e.indices.front()) idx += (idx.empty() ? "" : ".") + std::to_string(i + 1);
        out << e.length << "," << e.multiplicity << "," << idx << "," << e.sigma.to_string(op.variables()) << "\n";
      }
    } else if (sigma->parsed()) {
      Operator op(load(src).op);
      auto p = numbers(point, static_cast<std::size_t>(2 * op.dim()), "--point");
      out << format_g9(op.sigma_tilde(p)) << "\n";
    } else if (ord->parsed()) {
      Operator op(load(src).op);
      auto x = numbers(at, static_cast<std::size_t>(op.dim()), "--at");
      auto m = bracket_order_at(op.symbols(), x, cap);
      out << (m ? std::to_string(*m) : std::string("none")) << "\n";
    } else if (nu_cmd->parsed()) {
      Operator op(load(src).op);
      auto x = numbers(at, static_cast<std::size_t>(op.dim()), "--at");
      NuMethod nm = nu_method == "sphere" ? NuMethod::Sphere : nu_method == "line" ? NuMethod::LineBundle : NuMethod::Auto;
      out << format_g9(nu(op.effective_symbol(), x, R, nm)) << "\n";
    } else if (sympl->parsed()) {
      Operator op(load(src).op);
      auto v = numbers(point, static_cast<std::size_t>(2 * op.dim()), "--point");
      auto p = PhasePoint::from_vector(v);
      auto rep = is_symplectic_at(op.symbols(), p);
      out << "is_symplectic " << to_string(rep.verdict) << "\n";
      out << "span " << to_string(hamiltonian_span_equals_orthocomplement(op.symbols(), p)) << "\n";
    } else if (dist->parsed()) {
      auto spec = load(src);
      Operator op(spec.op);
      ScanOptions opt;
      opt.method = parse_scan_method(method);
      opt.factory = construction_factory();
      ScanResult r;
      r.method = opt.method;
      r.rows.push_back(scan_row(spec, op, number(lambda_text), opt));
      out << scan_csv(r);
    } else if (scan->parsed()) {
      auto spec = load(src);
      ScanOptions opt;
      opt.method = parse_scan_method(method);
      opt.jobs = jobs;
      opt.sample_refine = refine;
      opt.floor_family = floor;
      opt.factory = construction_factory();
      const auto& range = opt.method == ScanMethod::Grid ? spec.grid_range : spec.cert_range;
      double lo = lambda_min > 0 ? lambda_min : range.lo, hi = lambda_max > 0 ? lambda_max : range.hi;
      auto res = scan_exponent(spec, dyadic_lambdas(lo, hi), opt);
      if (expect) res.expected = *expect;
      const auto csv = scan_csv(res);
      const auto fit = scan_fit_json(res).dump(2) + "\n";
      if (out_prefix.empty()) {
        out << csv << "\n" << fit;
      } else {
        write_file(out_prefix + ".csv", csv);
        write_file(out_prefix + ".fit.json", fit);
        if (plotdata) {
          std::vector<double> lam, lower, upper;
          for (const auto& row : res.rows) {
            lam.push_back(row.lambda);
            lower.push_back(row.lower);
            upper.push_back(row.upper);
          }
          write_file(out_prefix + ".lower.dat", plot_data(lam, lower));
          write_file(out_prefix + ".upper.dat", plot_data(lam, upper));
        }
        out << fit;
      }
      if (expect) {
        auto bad = misses({{"slope_lower", res.lower_fit.slope}, {"slope_upper", res.upper_fit.slope}}, *expect, tol);
        for (const auto& b : bad) err << "expectation failed: " << b << "\n";
        if (!bad.empty()) return kComputation;
      }
    } else if (wit->parsed()) {
      auto spec = load(src);
      Operator op(spec.op);
      ScenarioInstance inst(spec, op, number(lambda_text));
      auto samples = inst.witness_samples(refine);
      auto factory = construction_factory();
      auto p = inst.p().to_vector(), q = inst.q().to_vector();
      out << "witness_id,lower,r_ham,r_amb,r_star,samples\n";
      for (const auto& w : spec.witnesses) {
        auto e = witness_lower_bound(op, *inst.witness(w, factory), p, q, samples);
        out << w.id << "," << format_g9(e.lower) << "," << format_g9(e.ratios.r_ham) << "," << format_g9(e.ratios.r_amb)
            << "," << format_g9(e.ratios.r_star()) << "," << samples.size() << "\n";
      }
    } else if (varrho->parsed()) {
      auto spec = load(src);
      if (!spec.varrho) throw Error(ErrorCode::InvalidArgument, "scenario '" + spec.name + "' has no varrho block");
      double lo = R_min > 0 ? R_min : spec.varrho->r_min, hi = R_max > 0 ? R_max : spec.varrho->r_max;
      auto res = varrho_scan(spec, dyadic_lambdas(lo, hi), jobs);
      std::string csv = "R,varrho\n";
      std::vector<double> Rs, vs;
      for (const auto& row : res.rows) {
        csv += format_g9(row.R) + "," + format_g9(row.value) + "\n";
        Rs.push_back(row.R);
        vs.push_back(row.value);
      }
      json fit = {{"scenario", res.scenario}, {"slope", fit_number(res.fit.slope)}, {"r2", fit_number(res.fit.r2)},
                  {"expected_exponent", expect ? fit_number(*expect) : json(nullptr)}};
      const auto fit_text = fit.dump(2) + "\n";
      if (out_prefix.empty()) {
        out << csv << "\n" << fit_text;
      } else {
        write_file(out_prefix + ".csv", csv);
        write_file(out_prefix + ".fit.json", fit_text);
        if (plotdata) write_file(out_prefix + ".dat", plot_data(Rs, vs));
        out << fit_text;
      }
      if (expect) {
        auto bad = misses({{"slope", res.fit.slope}}, *expect, tol);
        for (const auto& b : bad) err << "expectation failed: " << b << "\n";
        if (!bad.empty()) return kComputation;
      }
    } else if (l53->parsed()) {
      Lemma53Grid g;
      for (int i = 0; i < refine; ++i) g = g.refined();
      Lemma53Solution s(poly, g);
      Annulus a;
      auto rep = verify_lemma53(s, a);
      auto j = lemma53_json(s, rep, a);
      round9(j);
      out << j.dump(2) << "\n";
      if (!csv_file.empty()) write_file(csv_file, lemma53_csv(s, a));
    } else if (obs->parsed()) {
      auto s = taylor_obstruction(poly, degree);
      out << "verdict " << s.verdict() << "\n";
      out << "order " << s.order << ", ansatz degree " << s.ansatz_degree << ", " << s.unknowns.size() << " unknowns, "
          << s.equations.size() << " equations\n";
      auto d = decisive_equations(s);
      out << "decisive equations (" << d.size() << "):\n";
      for (const auto& e : d)
        out << "  x^" << e.i << "*y^" << e.j << ": " << format_equation(s, e.coeffs, e.rhs) << "\n";
      if (s.consistent) {
        for (const char* u : {"f[1,0]", "g[0,1]"}) {
          int k = s.index(u[0], u[2] - '0', u[4] - '0');
          if (k >= 0 && s.determined[static_cast<std::size_t>(k)])
            out << u << " = " << to_string(s.solution[static_cast<std::size_t>(k)]) << "\n";
        }
      } else {
        out << "certificate " << (certificate_valid(s) ? "valid" : "INVALID") << "\n";
      }
    } else if (cat_list->parsed()) {
      for (const auto& n : catalogue_names()) out << n << "\n";
    } else if (cat_show->parsed() || cat_export->parsed()) {
      Source s2 = src;
      s2.entry = name;
      auto spec = load(s2);
      if (cat_export->parsed()) {
        json j = spec;
        if (out_prefix.empty()) out << j.dump(2) << "\n";
        else write_file(out_prefix, j.dump(2) + "\n");
      } else {
        Operator op(spec.op);
        auto list = [](const std::vector<std::string>& v) {
          std::string s;
          for (const auto& x : v) s += (s.empty() ? "" : ", ") + x;
          return s;
        };
        out << "name " << spec.name << "\n";
        out << "variables " << list(spec.op.variables) << "\n";
        for (std::size_t j = 0; j < spec.op.fields.size(); ++j) out << "X_" << j + 1 << " = (" << list(spec.op.fields[j]) << ")\n";
        out << "mode " << to_string(spec.op.mode) << ", m = " << spec.op.m << "\n";
        if (!spec.p.empty()) out << "p = (" << list(spec.p) << ")\nq = (" << list(spec.q) << ")\n";
        if (spec.expected_exponent) out << "expected exponent " << *spec.expected_exponent << "\n";
        if (spec.bracket_order) out << "bracket order " << spec.bracket_order << "\n";
        for (const auto& w : spec.witnesses) out << "witness " << w.id << ": " << w.expr << "\n";
        if (!spec.notes.empty()) out << "notes " << spec.notes << "\n";
      }
    }
  } catch (const Error& e) {
    err << e.what() << "\n";
    switch (e.code()) {
      case ErrorCode::Parse:
      case ErrorCode::InvalidArgument:
      case ErrorCode::UnknownEntry: return kUsage;
      default: return kComputation;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kComputation;
  }
  return kOk;
}

inline int run_command(int argc, char** argv) {
  return run_command(std::vector<std::string>(argv + 1, argv + argc));
}

}  // namespace phasemetric::cli
