#pragma once

#include <cmath>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "phasemetric/lattice.hpp"
#include "phasemetric/metric.hpp"

namespace phasemetric {

/// Box over active phase coordinates; inactive coordinates are frozen at p.
/// Nodes outside the fiber shell shell_lo <= |xi| / shell_scale <= shell_hi
/// are dropped when shell_scale > 0.
struct Chart {
  std::vector<LatticeAxis> axes;
  double shell_scale = 0;
  double shell_lo = 0.25, shell_hi = 4.0;
};

struct GridOptions {
  int levels = 1;
  std::vector<int> multipliers = {1, 2, 4, 8};
  int substeps = 8;
};

/// Fields whose Hamiltonian flow leaves every frozen coordinate fixed
/// (component identically zero).
inline std::vector<bool> chart_compatible_fields(const Operator& op, const Chart& chart) {
  const int n = 2 * op.dim();
  std::vector<bool> active(static_cast<std::size_t>(n), false);
  for (const auto& a : chart.axes) active[static_cast<std::size_t>(a.coord)] = true;
  std::vector<bool> ok;
  for (int j = 0; j < op.nfields(); ++j) {
    bool good = true;
    for (int i = 0; i < n; ++i)
      if (!active[static_cast<std::size_t>(i)] && !op.hamiltonian_component_zero(j, i)) good = false;
    ok.push_back(good);
  }
  return ok;
}

inline std::string describe_grid(const Chart& chart, const GridOptions& g) {
  std::string s = "cells=";
  for (std::size_t i = 0; i < chart.axes.size(); ++i) s += (i ? "x" : "") + std::to_string(chart.axes[i].cells);
  s += ";levels=" + std::to_string(g.levels);
  return s;
}

/// Lattice upper bound for rho_L(p, q) on the chart.
inline DistanceEstimate upper_bound_distance(const Operator& op, const Chart& chart, const PhasePoint& p,
                                             const PhasePoint& q, const GridOptions& opt = {}) {
  auto ps = p.to_vector(), qs = q.to_vector();
  LatticeProblem pb;
  pb.base_state = ps;
  pb.axes = chart.axes;
  pb.nflows = op.nfields();
  pb.flow_enabled = chart_compatible_fields(op, chart);
  pb.velocity = [&op](int j, std::span<const double> s, std::span<double> v) { op.hamiltonian(j, s, v); };
  pb.rate = [&op](std::span<const double> s) { return op.sigma_tilde(s); };
  pb.ambient = [](std::span<const double> a, std::span<const double> b) { return ambient_cost(a, b); };
  if (chart.shell_scale > 0) {
    const std::size_t d = static_cast<std::size_t>(op.dim());
    pb.admissible = [d, &chart](std::span<const double> s) {
      double r = norm2(s.subspan(d)) / chart.shell_scale;
      return r >= chart.shell_lo * (1 - 1e-12) && r <= chart.shell_hi * (1 + 1e-12);
    };
  }
  pb.levels = opt.levels;
  pb.multipliers = opt.multipliers;
  pb.substeps = opt.substeps;
  auto res = lattice_shortest_path(pb, ps, qs);
  DistanceEstimate e;
  e.lower = 0;
  e.upper = res.value;
  e.upper_description = "lattice path with " + std::to_string(res.path.size()) + " nodes";
  e.grid = describe_grid(chart, opt) + ";settled=" + std::to_string(res.settled);
  e.slack = res.snap_cost;
  return e;
}

/// Base-space lattice distance for {nu(x, R)^{-1} X_j} and {R^{-1} d/dx_k}:
/// X_j-flow edges cost time * nu (max over samples), axis steps cost R * length.
inline double varrho_R(const Operator& op, const std::vector<LatticeAxis>& box, std::span<const double> x,
                       std::span<const double> y, double R, const GridOptions& opt = {},
                       NuMethod method = NuMethod::Auto) {
  if (!(R >= 1)) throw Error(ErrorCode::InvalidArgument, "varrho_R requires R >= 1");
  bool same = true;
  for (std::size_t i = 0; i < x.size(); ++i) same = same && x[i] == y[i];
  if (same) return 0.0;
  const auto& es = op.effective_symbol();
  LatticeProblem pb;
  pb.base_state.assign(x.begin(), x.end());
  pb.axes = box;
  pb.nflows = op.nfields();
  pb.velocity = [&op](int j, std::span<const double> s, std::span<double> v) { op.base_field(j, s, v); };
  // Edge costs revisit the same nodes; the sphere search behind nu is the expensive part.
  auto cache = std::make_shared<std::map<std::vector<double>, double>>();
  pb.rate = [&es, R, method, cache](std::span<const double> s) {
    std::vector<double> key(s.begin(), s.end());
    auto it = cache->find(key);
    if (it != cache->end()) return it->second;
    double v = nu(es, s, R, method);
    cache->emplace(std::move(key), v);
    return v;
  };
  pb.ambient = [R](std::span<const double> a, std::span<const double> b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return R * std::sqrt(s);
  };
  pb.levels = opt.levels;
  pb.multipliers = opt.multipliers;
  pb.substeps = opt.substeps;
  return lattice_shortest_path(pb, x, y).value;
}

}  // namespace phasemetric
