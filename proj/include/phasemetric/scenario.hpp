#pragma once

// Scenarios: an operator, a lambda-parametrised point pair, a chart, witness
// functions and a certificate path, all given as expression strings in lambda
// and named definitions. The JSON form is the operator-spec file format.

#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "phasemetric/distance.hpp"
#include "phasemetric/expr.hpp"
#include "phasemetric/metric.hpp"
#include "phasemetric/operator.hpp"
#include "phasemetric/rational.hpp"

namespace phasemetric {

using json = nlohmann::ordered_json;

struct AxisSpec {
  std::string coord;  // phase variable name
  std::string lo, hi;
  int cells = 4;
  int samples = 0;  // witness samples along this axis; 0 means cells + 1
};

struct ChartSpec {
  std::vector<AxisSpec> axes;
  std::string shell_scale = "lambda";  // empty disables the fiber shell
  double shell_lo = 0.25, shell_hi = 4.0;
};

struct WitnessSpec {
  std::string id;
  std::string kind = "expr";
  std::string expr;
};

struct SegmentSpec {
  MoveKind kind = MoveKind::Ambient;
  int field = 1;  // 1-based
  int direction = 1;
  std::string duration = "0";
  std::vector<std::string> displacement;
};

struct SymplecticCheck {
  std::vector<double> point;  // 2d phase coordinates
  std::optional<std::string> is_symplectic;
  std::optional<std::string> span;
};

struct VarrhoSpec {
  std::vector<double> x, y;
  std::vector<AxisSpec> axes;  // base variable names; lo/hi are plain numbers
  double r_min = 64, r_max = 65536;
};

struct ScanRange {
  double lo = 1024, hi = 16777216;
};

struct ScenarioSpec {
  std::string name;
  std::map<std::string, std::string> params;  // display only
  OperatorSpec op;
  std::vector<std::pair<std::string, std::string>> definitions;
  std::vector<std::string> p, q;
  ChartSpec chart;
  GridOptions grid;
  std::vector<WitnessSpec> witnesses;
  std::vector<SegmentSpec> certificate;
  std::optional<std::string> expected_exponent;
  std::optional<std::string> expected_gevrey;
  std::string separation = "1/2";
  std::string fit = "power";  // "power" or "log"
  int bracket_order = 0;      // declared order m on the chart region; 0 = none
  ScanRange cert_range;
  ScanRange grid_range{256, 16384};
  std::vector<SymplecticCheck> symplectic;
  std::optional<VarrhoSpec> varrho;
  std::string notes;
};

inline double rational_value(const std::string& s) { return parse_rational(s).get_d(); }

// ---------------------------------------------------------------- JSON

inline void to_json(json& j, const AxisSpec& a) {
  j = json{{"coord", a.coord}, {"lo", a.lo}, {"hi", a.hi}, {"cells", a.cells}};
  if (a.samples) j["samples"] = a.samples;
}

inline std::string json_text(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_number()) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v.get<double>());
    return buf;
  }
  throw Error(ErrorCode::Parse, "expected a string or number, got " + v.dump());
}

inline void from_json(const json& j, AxisSpec& a) {
  a.coord = j.at("coord").get<std::string>();
  a.lo = json_text(j.at("lo"));
  a.hi = json_text(j.at("hi"));
  a.cells = j.value("cells", 4);
  a.samples = j.value("samples", 0);
}

inline void to_json(json& j, const ChartSpec& c) {
  j = json{{"axes", c.axes}};
  if (c.shell_scale.empty())
    j["shell"] = nullptr;
  else
    j["shell"] = json{{"scale", c.shell_scale}, {"lo", c.shell_lo}, {"hi", c.shell_hi}};
}

inline void from_json(const json& j, ChartSpec& c) {
  c.axes = j.at("axes").get<std::vector<AxisSpec>>();
  c.shell_scale.clear();
  if (j.contains("shell") && !j["shell"].is_null()) {
    const auto& s = j["shell"];
    c.shell_scale = json_text(s.at("scale"));
    c.shell_lo = s.value("lo", 0.25);
    c.shell_hi = s.value("hi", 4.0);
  }
}

inline void to_json(json& j, const WitnessSpec& w) { j = json{{"id", w.id}, {"kind", w.kind}, {"expr", w.expr}}; }
inline void from_json(const json& j, WitnessSpec& w) {
  w.id = j.at("id").get<std::string>();
  w.kind = j.value("kind", std::string("expr"));
  w.expr = j.value("expr", std::string());
}

inline void to_json(json& j, const SegmentSpec& s) {
  if (s.kind == MoveKind::Hamiltonian)
    j = json{{"kind", "hamiltonian"}, {"field", s.field}, {"direction", s.direction}, {"duration", s.duration}};
  else
    j = json{{"kind", "ambient"}, {"displacement", s.displacement}};
}

inline void from_json(const json& j, SegmentSpec& s) {
  auto kind = j.at("kind").get<std::string>();
  if (kind == "hamiltonian") {
    s.kind = MoveKind::Hamiltonian;
    s.field = j.at("field").get<int>();
    s.direction = j.value("direction", 1);
    s.duration = json_text(j.at("duration"));
  } else if (kind == "ambient") {
    s.kind = MoveKind::Ambient;
    s.displacement.clear();
    for (const auto& v : j.at("displacement")) s.displacement.push_back(json_text(v));
  } else {
    throw Error(ErrorCode::Parse, "unknown segment kind '" + kind + "'");
  }
}

inline void to_json(json& j, const SymplecticCheck& c) {
  j = json{{"point", c.point}};
  j["is_symplectic"] = c.is_symplectic ? json(*c.is_symplectic) : json(nullptr);
  j["span"] = c.span ? json(*c.span) : json(nullptr);
}

inline void from_json(const json& j, SymplecticCheck& c) {
  c.point = j.at("point").get<std::vector<double>>();
  c.is_symplectic.reset();
  c.span.reset();
  if (j.contains("is_symplectic") && !j["is_symplectic"].is_null()) c.is_symplectic = j["is_symplectic"].get<std::string>();
  if (j.contains("span") && !j["span"].is_null()) c.span = j["span"].get<std::string>();
}

inline void to_json(json& j, const VarrhoSpec& v) {
  j = json{{"x", v.x}, {"y", v.y}, {"axes", v.axes}, {"R", {v.r_min, v.r_max}}};
}
inline void from_json(const json& j, VarrhoSpec& v) {
  v.x = j.at("x").get<std::vector<double>>();
  v.y = j.at("y").get<std::vector<double>>();
  v.axes = j.at("axes").get<std::vector<AxisSpec>>();
  if (j.contains("R")) {
    v.r_min = j["R"].at(0).get<double>();
    v.r_max = j["R"].at(1).get<double>();
  }
}

inline void to_json(json& j, const ScenarioSpec& s) {
  j = json::object();
  j["name"] = s.name;
  if (!s.params.empty()) j["params"] = s.params;
  j["variables"] = s.op.variables;
  j["fields"] = s.op.fields;
  j["mode"] = to_string(s.op.mode);
  j["m"] = s.op.m;
  json defs = json::array();
  for (const auto& [n, e] : s.definitions) defs.push_back(json{{"name", n}, {"expr", e}});
  j["definitions"] = defs;
  j["p"] = s.p;
  j["q"] = s.q;
  j["chart"] = s.chart;
  j["grid"] = json{{"levels", s.grid.levels}, {"multipliers", s.grid.multipliers}, {"substeps", s.grid.substeps}};
  j["witnesses"] = s.witnesses;
  j["certificate"] = s.certificate;
  j["expected_exponent"] = s.expected_exponent ? json(*s.expected_exponent) : json(nullptr);
  j["expected_gevrey"] = s.expected_gevrey ? json(*s.expected_gevrey) : json(nullptr);
  j["separation"] = s.separation;
  j["fit"] = s.fit;
  j["bracket_order"] = s.bracket_order;
  j["lambda_certificate"] = {s.cert_range.lo, s.cert_range.hi};
  j["lambda_grid"] = {s.grid_range.lo, s.grid_range.hi};
  j["symplectic"] = s.symplectic;
  j["varrho"] = s.varrho ? json(*s.varrho) : json(nullptr);
  j["notes"] = s.notes;
}

inline void from_json(const json& j, ScenarioSpec& s) {
  s = ScenarioSpec{};
  s.name = j.at("name").get<std::string>();
  s.op.name = s.name;
  if (j.contains("params")) s.params = j["params"].get<std::map<std::string, std::string>>();
  s.op.variables = j.at("variables").get<std::vector<std::string>>();
  for (const auto& f : j.at("fields")) {
    std::vector<std::string> row;
    for (const auto& c : f) row.push_back(json_text(c));
    s.op.fields.push_back(std::move(row));
  }
  s.op.mode = parse_symbol_mode(j.value("mode", std::string("BRACKET")));
  s.op.m = j.value("m", 1);
  if (j.contains("definitions"))
    for (const auto& d : j["definitions"]) s.definitions.emplace_back(d.at("name").get<std::string>(), json_text(d.at("expr")));
  if (j.contains("p"))
    for (const auto& v : j["p"]) s.p.push_back(json_text(v));
  if (j.contains("q"))
    for (const auto& v : j["q"]) s.q.push_back(json_text(v));
  if (j.contains("chart")) s.chart = j["chart"].get<ChartSpec>();
  if (j.contains("grid")) {
    const auto& g = j["grid"];
    s.grid.levels = g.value("levels", 1);
    if (g.contains("multipliers")) s.grid.multipliers = g["multipliers"].get<std::vector<int>>();
    s.grid.substeps = g.value("substeps", 8);
  }
  if (j.contains("witnesses")) s.witnesses = j["witnesses"].get<std::vector<WitnessSpec>>();
  if (j.contains("certificate")) s.certificate = j["certificate"].get<std::vector<SegmentSpec>>();
  if (j.contains("expected_exponent") && !j["expected_exponent"].is_null())
    s.expected_exponent = json_text(j["expected_exponent"]);
  if (j.contains("expected_gevrey") && !j["expected_gevrey"].is_null())
    s.expected_gevrey = json_text(j["expected_gevrey"]);
  if (j.contains("separation")) s.separation = json_text(j["separation"]);
  s.fit = j.value("fit", std::string("power"));
  s.bracket_order = j.value("bracket_order", 0);
  if (j.contains("lambda_certificate"))
    s.cert_range = {j["lambda_certificate"].at(0).get<double>(), j["lambda_certificate"].at(1).get<double>()};
  if (j.contains("lambda_grid"))
    s.grid_range = {j["lambda_grid"].at(0).get<double>(), j["lambda_grid"].at(1).get<double>()};
  if (j.contains("symplectic")) s.symplectic = j["symplectic"].get<std::vector<SymplecticCheck>>();
  if (j.contains("varrho") && !j["varrho"].is_null()) s.varrho = j["varrho"].get<VarrhoSpec>();
  s.notes = j.value("notes", std::string());
}

/// Parses a spec file's text; JSON and structural errors become PARSE errors.
inline ScenarioSpec parse_scenario(const std::string& text) {
  try {
    return json::parse(text).get<ScenarioSpec>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Parse, std::string("spec file: ") + e.what());
  }
}

// ---------------------------------------------------------------- instances

class ScenarioInstance;
using WitnessFactory =
    std::function<std::unique_ptr<Witness>(const WitnessSpec&, const Operator&, const ScenarioInstance&)>;

/// A scenario evaluated at one lambda.
class ScenarioInstance {
 public:
  ScenarioInstance(const ScenarioSpec& spec, const Operator& op, double lambda) : spec_(&spec), op_(&op), lambda_(lambda) {
    if (!(lambda > 0)) throw Error(ErrorCode::InvalidArgument, "lambda must be positive");
    names_ = {"lambda"};
    values_ = {lambda};
    for (const auto& [n, e] : spec.definitions) {
      values_.push_back(value(e));
      names_.push_back(n);
    }
    const std::size_t d = static_cast<std::size_t>(op.dim());
    auto point = [&](const std::vector<std::string>& v, const char* which) {
      if (v.size() != 2 * d) throw Error(ErrorCode::Parse, std::string("point ") + which + " needs 2d coordinates");
      std::vector<double> s;
      for (const auto& e : v) s.push_back(value(e));
      return PhasePoint::from_vector(s);
    };
    p_ = point(spec.p, "p");
    q_ = point(spec.q, "q");
    auto pnames = op.phase_variable_names();
    for (const auto& a : spec.chart.axes) {
      LatticeAxis ax;
      ax.coord = coord_index(pnames, a.coord);
      ax.lo = value(a.lo);
      ax.hi = value(a.hi);
      ax.cells = a.cells;
      chart_.axes.push_back(ax);
    }
    if (!spec.chart.shell_scale.empty()) {
      chart_.shell_scale = value(spec.chart.shell_scale);
      chart_.shell_lo = spec.chart.shell_lo;
      chart_.shell_hi = spec.chart.shell_hi;
    }
    for (const auto& s : spec.certificate) {
      Move m;
      m.kind = s.kind;
      if (s.kind == MoveKind::Hamiltonian) {
        if (s.field < 1 || s.field > op.nfields()) throw Error(ErrorCode::InvalidArgument, "certificate field out of range");
        m.field = s.field - 1;
        m.direction = s.direction < 0 ? -1.0 : 1.0;
        m.duration = value(s.duration);
      } else {
        if (s.displacement.size() != 2 * d) throw Error(ErrorCode::Parse, "ambient displacement needs 2d entries");
        for (const auto& e : s.displacement) m.displacement.push_back(value(e));
      }
      certificate_.push_back(std::move(m));
    }
  }

  static int coord_index(const std::vector<std::string>& names, const std::string& n) {
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == n) return static_cast<int>(i);
    throw Error(ErrorCode::Parse, "unknown coordinate '" + n + "'");
  }

  /// Value of an expression in lambda and the definitions made so far.
  double value(const std::string& e) const {
    auto ex = expr::NumExpr::parse(e, names_);
    double v = ex.eval(values_);
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFinite, "expression '" + e + "' is not finite");
    return v;
  }

  const ScenarioSpec& spec() const { return *spec_; }
  const Operator& op() const { return *op_; }
  double lambda() const { return lambda_; }
  const PhasePoint& p() const { return p_; }
  const PhasePoint& q() const { return q_; }
  const Chart& chart() const { return chart_; }
  const std::vector<Move>& certificate() const { return certificate_; }
  const std::vector<std::string>& parameter_names() const { return names_; }
  const std::vector<double>& parameter_values() const { return values_; }

  /// Expression witness in the phase variables with lambda and definitions bound.
  std::unique_ptr<Witness> expr_witness(const std::string& id, const std::string& text) const {
    auto names = op_->phase_variable_names();
    const int n = static_cast<int>(names.size());
    names.insert(names.end(), names_.begin(), names_.end());
    auto e = expr::NumExpr::parse(text, names);
    for (std::size_t i = 0; i < values_.size(); ++i) e = e.bind(n + static_cast<int>(i), values_[i]);
    return std::make_unique<ExprWitness>(id, std::move(e), n);
  }

  std::unique_ptr<Witness> witness(const WitnessSpec& w, const WitnessFactory& factory = nullptr) const {
    if (w.kind == "expr") return expr_witness(w.id, w.expr);
    if (factory)
      if (auto r = factory(w, *op_, *this)) return r;
    throw Error(ErrorCode::InvalidArgument, "no constructor for witness kind '" + w.kind + "'");
  }

  /// Product grid over the chart axes (frozen coordinates at p), shell-filtered.
  /// refine > 0 replaces n samples per axis by 2^refine (n - 1) + 1.
  std::vector<State> chart_samples(int refine = 0) const {
    auto base = p_.to_vector();
    std::vector<State> out;
    std::vector<int> counts;
    for (std::size_t i = 0; i < chart_.axes.size(); ++i) {
      int n = spec_->chart.axes[i].samples > 0 ? spec_->chart.axes[i].samples : chart_.axes[i].cells + 1;
      n = std::max(n, 2);
      for (int r = 0; r < refine; ++r) n = 2 * n - 1;
      counts.push_back(n);
    }
    std::vector<int> idx(counts.size(), 0);
    const std::size_t d = static_cast<std::size_t>(op_->dim());
    while (true) {
      auto s = base;
      for (std::size_t i = 0; i < idx.size(); ++i) {
        const auto& a = chart_.axes[i];
        s[static_cast<std::size_t>(a.coord)] = a.lo + (a.hi - a.lo) * idx[i] / (counts[i] - 1);
      }
      bool ok = norm2(std::span<const double>(s).subspan(d)) > 0;
      if (ok && chart_.shell_scale > 0) {
        double r = norm2(std::span<const double>(s).subspan(d)) / chart_.shell_scale;
        ok = r >= chart_.shell_lo * (1 - 1e-12) && r <= chart_.shell_hi * (1 + 1e-12);
      }
      if (ok) out.push_back(std::move(s));
      std::size_t i = 0;
      while (i < idx.size() && ++idx[i] == counts[i]) idx[i++] = 0;
      if (i == idx.size()) break;
    }
    return out;
  }

  /// Witness samples: chart grid plus p, q and the states along the certificate.
  std::vector<State> witness_samples(int refine = 0) const {
    auto s = chart_samples(refine);
    s.push_back(p_.to_vector());
    s.push_back(q_.to_vector());
    if (!certificate_.empty()) {
      auto path = certificate_path_cost(*op_, p_.to_vector(), certificate_);
      s.insert(s.end(), path.trace.begin(), path.trace.end());
    }
    return s;
  }

  double separation() const { return rational_value(spec_->separation); }

 private:
  const ScenarioSpec* spec_;
  const Operator* op_;
  double lambda_;
  std::vector<std::string> names_;
  std::vector<double> values_;
  PhasePoint p_, q_;
  Chart chart_;
  std::vector<Move> certificate_;
};

}  // namespace phasemetric
