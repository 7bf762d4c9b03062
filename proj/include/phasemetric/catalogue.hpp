#pragma once

// Built-in scenarios. Parametrised families take their parameters either from
// the name ("example7(2,3)") or from a parameter map ({"k": "2", "m": "3"}).

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "phasemetric/poly.hpp"
#include "phasemetric/scenario.hpp"

namespace phasemetric {

inline constexpr const char* kExample9B = "x^8/56 + y^8/56 + x^4*y^2/12 - x^6/180";
inline constexpr const char* kExample9Lambda = "x^6 + y^6 + x^2*y^2";

namespace catalogue_detail {

inline std::string str(int v) { return std::to_string(v); }

inline std::string frac(long a, long b) {
  return to_string(make_rational(a, b));
}

inline AxisSpec axis(std::string c, std::string lo, std::string hi, int cells, int samples = 0) {
  return AxisSpec{std::move(c), std::move(lo), std::move(hi), cells, samples};
}

inline SegmentSpec flow(int field, int dir, std::string duration) {
  SegmentSpec s;
  s.kind = MoveKind::Hamiltonian;
  s.field = field;
  s.direction = dir;
  s.duration = std::move(duration);
  return s;
}

inline SegmentSpec ambient(std::vector<std::string> disp) {
  SegmentSpec s;
  s.kind = MoveKind::Ambient;
  s.displacement = std::move(disp);
  return s;
}

inline std::string power(const std::string& v, int e) {
  if (e == 0) return "1";
  if (e == 1) return v;
  return v + "^" + str(e);
}

inline int int_param(const std::map<std::string, std::string>& p, const std::string& k, int def) {
  auto it = p.find(k);
  if (it == p.end()) return def;
  try {
    std::size_t pos = 0;
    int v = std::stoi(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorCode::InvalidArgument, "parameter " + k + " must be an integer, got '" + it->second + "'");
  }
}

inline ScenarioSpec elliptic2d() {
  ScenarioSpec s;
  s.name = "elliptic2d";
  s.op = {s.name, {"x", "y"}, {{"1", "0"}, {"0", "1"}}, SymbolMode::Bracket, 1};
  s.p = {"0", "0", "-lambda/2", "lambda/4"};
  s.q = {"0", "0", "lambda/2", "lambda/4"};
  s.chart.axes = {axis("x", "-1", "1", 2), axis("y", "-1", "1", 2), axis("xi", "-lambda", "lambda", 8),
                  axis("eta", "0", "lambda/2", 4)};
  s.witnesses = {{"xi", "expr", "xi"}};
  s.certificate = {ambient({"0", "0", "lambda", "0"})};
  s.expected_exponent = "1";
  s.expected_gevrey = "1";
  s.bracket_order = 1;
  s.notes = "Laplacian in the plane; rho_L is comparable to rho_0.";
  return s;
}

inline ScenarioSpec grusin(int m) {
  if (m < 2) throw Error(ErrorCode::InvalidArgument, "grusin needs m >= 2");
  ScenarioSpec s;
  s.name = "grusin(" + str(m) + ")";
  s.params = {{"m", str(m)}};
  s.op = {s.name, {"x", "t"}, {{"1", "0"}, {"0", power("x", m - 1)}}, SymbolMode::Bracket, m};
  s.p = {"0", "0", "0", "lambda"};
  s.q = {"0", "1", "0", "lambda"};
  s.chart.axes = {axis("x", "-1/2", "1/2", 4), axis("t", "-1/4", "5/4", 6), axis("xi", "-lambda/2", "lambda/2", 4),
                  axis("tau", "lambda/2", "3*lambda/2", 4)};
  s.witnesses = {{"t*tau", "expr", "t*tau"}};
  s.certificate = {ambient({"0", "1", "0", "0"})};
  s.expected_exponent = "1";
  s.expected_gevrey = "1";
  s.bracket_order = m;
  if (m == 2) s.symplectic = {{{0, 0, 0, 1}, "true", std::nullopt}};
  s.notes = "d/dx^2 + (x^(m-1) d/dt)^2; t*tau is annihilated up to sigma_2, so rho_L grows like lambda.";
  return s;
}

inline ScenarioSpec metivier_like(const std::string& name) {
  ScenarioSpec s;
  s.name = name;
  s.op = {s.name, {"x", "t"}, {{"1", "0"}, {"0", "x"}, {"0", "t"}}, SymbolMode::Bracket, 2};
  s.p = {"0", "0", "0", "lambda"};
  s.q = {"0", "0", "0", "2*lambda"};
  s.separation = "1/4";
  s.chart.axes = {axis("x", "-1/2", "1/2", 4), axis("t", "-1/2", "1/2", 4), axis("xi", "-lambda/2", "lambda/2", 4),
                  axis("tau", "lambda/2", "5*lambda/2", 8)};
  s.witnesses = {{"lambda^(1/2)*log(tau)", "expr", "lambda^(1/2)*log(tau)"}};
  s.certificate = {flow(3, -1, "log(2)")};
  s.expected_exponent = "1/2";
  s.expected_gevrey = "2";
  s.bracket_order = 2;
  s.notes = "d/dx^2 + (x d/dt)^2 + (t d/dt)^2; t d/dt - tau d/dtau joins p to q inside Sigma.";
  return s;
}

inline ScenarioSpec example6_l1() {
  ScenarioSpec s;
  s.name = "example6_pair/L1";
  s.op = {s.name, {"x", "t"}, {{"1", "0"}, {"0", "x"}}, SymbolMode::Bracket, 2};
  s.p = {"0", "0", "0", "lambda"};
  s.q = {"0", "0", "0", "2*lambda"};
  s.separation = "1/4";
  s.chart.axes = {axis("x", "-1/2", "1/2", 4), axis("t", "-1/2", "1/2", 4), axis("xi", "-lambda/2", "lambda/2", 4),
                  axis("tau", "lambda/2", "5*lambda/2", 8)};
  s.witnesses = {{"tau", "expr", "tau"}};
  s.certificate = {ambient({"0", "0", "0", "lambda"})};
  s.expected_exponent = "1";
  s.expected_gevrey = "1";
  s.bracket_order = 2;
  s.notes = "d/dx^2 + (x d/dt)^2 on the pair shared with L2; tau is annihilated by both Hamiltonian fields.";
  return s;
}

inline ScenarioSpec example6_l2() {
  auto s = metivier_like("example6_pair/L2");
  return s;
}

inline ScenarioSpec metivier() {
  auto s = metivier_like("metivier");
  return s;
}

inline ScenarioSpec baouendi_goulaouic(int m) {
  if (m < 2) throw Error(ErrorCode::InvalidArgument, "baouendi_goulaouic needs m >= 2");
  ScenarioSpec s;
  s.name = "baouendi_goulaouic(" + str(m) + ")";
  s.params = {{"m", str(m)}};
  s.op = {s.name, {"x", "y", "t"}, {{"1", "0", "0"}, {"0", "1", "0"}, {"0", "0", power("x", m - 1)}}, SymbolMode::Bracket, m};
  s.p = {"0", "0", "0", "0", "0", "lambda"};
  s.q = {"0", "1", "0", "0", "0", "lambda"};
  s.chart.axes = {axis("y", "-1/4", "5/4", 6), axis("eta", "-lambda/4", "lambda/4", 4)};
  s.witnesses = {{"lambda^(1/" + str(m) + ")*y", "expr", "lambda^(1/" + str(m) + ")*y"}};
  s.certificate = {flow(2, 1, "1")};
  s.expected_exponent = frac(1, m);
  s.expected_gevrey = str(m);
  s.bracket_order = m;
  if (m == 2) s.symplectic = {{{0, 0, 0, 0, 0, 1}, "false", "true"}};
  VarrhoSpec v;
  v.x = {0, 0, 0};
  v.y = {0, 1, 0};
  v.axes = {axis("x", "-1/2", "1/2", 4), axis("y", "-1/4", "5/4", 6), axis("t", "-1/2", "1/2", 4)};
  s.varrho = v;
  s.notes = "d/dx^2 + d/dy^2 + (x^(m-1) d/dt)^2; V = d/dy moves p to q inside Sigma.";
  return s;
}

inline ScenarioSpec fedii(const std::string& a) {
  ScenarioSpec s;
  s.name = a == "exp(-1/x^2)" ? "fedii" : "fedii(" + a + ")";
  s.params = {{"a", a}};
  s.op = {s.name, {"x", "t"}, {{"1", "0"}, {"0", a}}, SymbolMode::PrincipalOnly, 1};
  s.p = {"0", "0", "0", "lambda"};
  s.q = {"0", "1", "0", "lambda"};
  s.chart.axes = {axis("x", "-1/2", "1/2", 4), axis("t", "-1/4", "5/4", 6), axis("xi", "-lambda/2", "lambda/2", 4),
                  axis("tau", "lambda/2", "3*lambda/2", 4)};
  s.witnesses = {{"t*tau", "expr", "t*tau"}};
  s.certificate = {ambient({"0", "1", "0", "0"})};
  s.fit = "log";
  s.symplectic = {{{0, 0, 0, 1}, "true", std::nullopt}, {{0, 0.5, 0, 2}, "true", std::nullopt}};
  s.notes = "d/dx^2 + (a(x) d/dt)^2 with a vanishing only at 0, possibly to infinite order.";
  return s;
}

inline ScenarioSpec example7(int k, int m) {
  if (k < 2 || m < k) throw Error(ErrorCode::InvalidArgument, "example7 needs 2 <= k <= m");
  ScenarioSpec s;
  s.name = "example7(" + str(k) + "," + str(m) + ")";
  s.params = {{"k", str(k)}, {"m", str(m)}};
  s.op = {s.name,
          {"x", "y", "t"},
          {{"1", "0", "0"}, {"0", power("x", k - 1), "0"}, {"0", "0", power("x", m - 1)}},
          SymbolMode::Bracket,
          m};
  s.definitions = {{"delta", "lambda^(-1/" + str(m) + ")"}};
  s.p = {"delta", "0", "0", "0", "0", "lambda"};
  s.q = {"delta", "1", "0", "0", "0", "lambda"};
  s.chart.axes = {axis("x", "0", "2*delta", 4), axis("y", "-1/4", "5/4", 6), axis("xi", "-lambda/4", "lambda/4", 4),
                  axis("eta", "-lambda/4", "lambda/4", 4)};
  const std::string e = frac(k, m);
  s.witnesses = {{"lambda^(" + e + ")*y", "expr", "lambda^(" + e + ")*y"}};
  s.certificate = {flow(2, 1, "delta^(1-" + str(k) + ")")};
  s.expected_exponent = e;
  s.expected_gevrey = frac(m, k);
  s.bracket_order = m;
  s.notes = "d/dx^2 + (x^(k-1) d/dy)^2 + (x^(m-1) d/dt)^2 with p at x = delta = lambda^(-1/m).";
  return s;
}

inline ScenarioSpec example8(int m, int r) {
  if (m < 2 || r < 2) throw Error(ErrorCode::InvalidArgument, "example8 needs m, r >= 2");
  ScenarioSpec s;
  s.name = "example8(" + str(m) + "," + str(r) + ")";
  s.params = {{"m", str(m)}, {"r", str(r)}};
  s.op = {s.name, {"x", "t"}, {{"1", "0"}, {"0", power("x", m - 1)}, {"0", power("t", r)}}, SymbolMode::Bracket, m};
  const std::string rr = str(r);
  s.definitions = {{"delta", "lambda^(-" + frac(m - 1, static_cast<long>(m) * r) + ")"},
                   {"tq", "delta*" + rr + "^(-1/(" + rr + "-1))"},
                   {"tauq", "lambda*" + rr + "^(" + rr + "/(" + rr + "-1))"},
                   {"ht", "(delta-tq)/2"},
                   {"htau", "(tauq-lambda)/4"}};
  s.p = {"0", "delta", "0", "lambda"};
  s.q = {"0", "tq", "0", "tauq"};
  s.chart.axes = {axis("x", "-delta", "delta", 2), axis("t", "tq-2*ht", "delta+2*ht", 6),
                  axis("xi", "-lambda/4", "lambda/4", 2), axis("tau", "lambda-htau", "tauq+htau", 6)};
  const long num = static_cast<long>(m) * r - m + 1, den = static_cast<long>(m) * r;
  s.witnesses = {{"lambda^(" + frac(num - den, den) + ")*tau", "expr", "lambda^(" + frac(num - den, den) + ")*tau"}};
  s.certificate = {flow(3, -1, "delta^(1-" + rr + ")")};
  s.expected_exponent = frac(num, den);
  s.expected_gevrey = frac(den, num);
  s.bracket_order = m;
  s.notes = "d/dx^2 + (x^(m-1) d/dt)^2 + (t^r d/dt)^2; q = exp(-T V)(p) with T = delta^(1-r).";
  return s;
}

inline ScenarioSpec example9() {
  ScenarioSpec s;
  s.name = "example9";
  const std::vector<std::string> xy = {"x", "y"};
  auto b = ScalarExpr::parse(kExample9B, xy);
  auto bx = b.derivative(0), by = b.derivative(1);
  s.op = {s.name, {"x", "y", "t"}, {{"1", "0", (-by).to_string(xy)}, {"0", "1", bx.to_string(xy)}}, SymbolMode::Bracket, 6};
  s.params = {{"b", kExample9B}};
  s.p = {"0", "0", "0", "0", "0", "lambda"};
  s.q = {"0", "0", "1", "0", "0", "lambda"};
  s.chart.axes = {axis("x", "-1/4", "1/4", 4, 9), axis("y", "-1/4", "1/4", 4, 9), axis("t", "0", "1", 2, 2),
                  axis("xi", "-lambda/8", "lambda/8", 2, 5), axis("eta", "-lambda/8", "lambda/8", 2, 5)};
  s.witnesses = {{"prop51", "prop51", kExample9B}};  // expr carries b
  s.certificate = {ambient({"0", "0", "1", "0", "0", "0"})};
  s.expected_exponent = "1";
  s.bracket_order = 6;
  std::vector<double> at = {0.5, 0.3};
  double vx = bx.eval(at), vy = by.eval(at);
  s.symplectic = {{{0, 0, 0, 0, 0, 1}, "false", std::nullopt}, {{0.5, 0.3, 0.7, vy, -vx, 1}, "true", "true"}};
  s.notes = "X = d/dx - b_y d/dt, Y = d/dy + b_x d/dt with Laplacian of b equal to x^6 + y^6 + x^2 y^2.";
  return s;
}

inline ScenarioSpec heisenberg() {
  ScenarioSpec s;
  s.name = "heisenberg";
  s.op = {s.name, {"x", "y", "t"}, {{"1", "0", "0"}, {"0", "1", "x"}}, SymbolMode::Bracket, 2};
  s.p = {"0", "0", "0", "0", "0", "lambda"};
  s.q = {"0", "0", "1", "0", "0", "lambda"};
  s.chart.axes = {axis("x", "-1/2", "1/2", 4), axis("y", "-1/2", "1/2", 4), axis("t", "-1/4", "5/4", 6),
                  axis("xi", "-lambda/4", "lambda/4", 2), axis("eta", "-lambda/4", "lambda/4", 2)};
  s.witnesses = {{"t*tau+x*xi", "expr", "t*tau + x*xi"}};
  s.certificate = {ambient({"0", "0", "1", "0", "0", "0"})};
  s.expected_exponent = "1";
  s.expected_gevrey = "1";
  s.bracket_order = 2;
  s.symplectic = {{{0, 0, 0, 0, 0, 1}, "true", "true"}};
  VarrhoSpec v;
  v.x = {0, 0, 0};
  v.y = {0, 1, 0};
  v.axes = {axis("x", "-1/2", "1/2", 4), axis("y", "-1/4", "5/4", 6), axis("t", "-1/2", "1/2", 4)};
  s.varrho = v;
  s.notes = "d/dx^2 + (d/dy + x d/dt)^2; Sigma is symplectic and t*tau + x*xi is annihilated by H_Y.";
  return s;
}

struct Family {
  const char* name;
  std::vector<const char*> params;
  const char* signature;
};

inline const std::vector<Family>& families() {
  static const std::vector<Family> f = {
      {"elliptic2d", {}, "elliptic2d"},
      {"grusin", {"m"}, "grusin(m)"},
      {"metivier", {}, "metivier"},
      {"baouendi_goulaouic", {"m"}, "baouendi_goulaouic(m)"},
      {"fedii", {"a"}, "fedii(a)"},
      {"example6_pair", {}, "example6_pair"},
      {"example7", {"k", "m"}, "example7(k,m)"},
      {"example8", {"m", "r"}, "example8(m,r)"},
      {"example9", {}, "example9"},
      {"heisenberg", {}, "heisenberg"},
  };
  return f;
}

}  // namespace catalogue_detail

/// Registry names, one per family (parametrised ones with their signature).
inline std::vector<std::string> catalogue_names() {
  std::vector<std::string> out;
  for (const auto& f : catalogue_detail::families()) out.push_back(f.signature);
  return out;
}

/// All scenarios registered under `name`; "base(a,b)" fills parameters positionally.
inline std::vector<ScenarioSpec> get_entries(std::string name, std::map<std::string, std::string> params = {}) {
  using namespace catalogue_detail;
  std::string sub;
  if (auto slash = name.find('/'); slash != std::string::npos) {
    sub = name.substr(slash + 1);
    name = name.substr(0, slash);
  }
  std::vector<std::string> args;
  if (auto open = name.find('('); open != std::string::npos) {
    if (name.back() != ')') throw Error(ErrorCode::UnknownEntry, "malformed entry name '" + name + "'");
    std::string inner = name.substr(open + 1, name.size() - open - 2);
    name = name.substr(0, open);
    // Split on top-level commas so expressions like exp(-1/x^2) survive.
    int depth = 0;
    std::string cur;
    for (char c : inner) {
      if (c == '(') ++depth;
      if (c == ')') --depth;
      if (c == ',' && depth == 0) {
        args.push_back(cur);
        cur.clear();
      } else {
        cur += c;
      }
    }
    if (!cur.empty() || !args.empty()) args.push_back(cur);
  }
  const Family* fam = nullptr;
  for (const auto& f : families())
    if (name == f.name) fam = &f;
  if (!fam) {
    std::string list;
    for (const auto& n : catalogue_names()) list += (list.empty() ? "" : ", ") + n;
    throw Error(ErrorCode::UnknownEntry, "unknown catalogue entry '" + name + "'; registry: " + list);
  }
  if (args.size() > fam->params.size())
    throw Error(ErrorCode::InvalidArgument, std::string("too many parameters for ") + fam->signature);
  for (std::size_t i = 0; i < args.size(); ++i) params[fam->params[i]] = args[i];
  for (const auto& [k, v] : params) {
    bool known = false;
    for (const char* p : fam->params) known = known || k == p;
    if (!known) throw Error(ErrorCode::InvalidArgument, "parameter '" + k + "' does not apply to " + fam->signature);
  }

  std::vector<ScenarioSpec> out;
  if (name == "elliptic2d") out = {elliptic2d()};
  else if (name == "grusin") out = {grusin(int_param(params, "m", 2))};
  else if (name == "metivier") out = {metivier()};
  else if (name == "baouendi_goulaouic") out = {baouendi_goulaouic(int_param(params, "m", 2))};
  else if (name == "fedii") out = {fedii(params.count("a") ? params["a"] : std::string("exp(-1/x^2)"))};
  else if (name == "example6_pair") out = {example6_l1(), example6_l2()};
  else if (name == "example7") out = {example7(int_param(params, "k", 2), int_param(params, "m", 3))};
  else if (name == "example8") out = {example8(int_param(params, "m", 2), int_param(params, "r", 2))};
  else if (name == "example9") out = {example9()};
  else if (name == "heisenberg") out = {heisenberg()};
  if (!sub.empty()) {
    std::vector<ScenarioSpec> sel;
    for (auto& s : out)
      if (s.name.size() > sub.size() && s.name.compare(s.name.size() - sub.size(), sub.size(), sub) == 0 &&
          s.name[s.name.size() - sub.size() - 1] == '/')
        sel.push_back(std::move(s));
    if (sel.empty()) throw Error(ErrorCode::UnknownEntry, "entry " + name + " has no member '" + sub + "'");
    out = std::move(sel);
  }
  return out;
}

/// The single scenario named; multi-member entries need "name/member".
inline ScenarioSpec get_entry(const std::string& name, const std::map<std::string, std::string>& params = {}) {
  auto v = get_entries(name, params);
  if (v.size() != 1) {
    std::string members;
    for (const auto& s : v) members += (members.empty() ? "" : ", ") + s.name;
    throw Error(ErrorCode::InvalidArgument, "entry '" + name + "' has several members: " + members);
  }
  return v.front();
}

/// Every registered scenario at default parameters.
inline std::vector<ScenarioSpec> catalogue_defaults() {
  std::vector<ScenarioSpec> out;
  for (const auto& f : catalogue_detail::families())
    for (auto& s : get_entries(f.name)) out.push_back(std::move(s));
  return out;
}

}  // namespace phasemetric
