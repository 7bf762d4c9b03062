#pragma once

// Lattice shortest paths with flow edges and axis edges.
//
// Nodes sit on a product grid over the active axes; inactive coordinates are
// frozen at the value carried by base_state. From a node, each flow field
// (both orientations) is integrated until the dominant active coordinate
// reaches a lattice plane `mult` steps away; the endpoint is then snapped to
// the nearest node, paying the ambient cost of the snap. Flow cost is
// time * rate, with the rate maxed over substep samples, so every edge cost
// bounds the cost of an actual continuous path.
//
// Levels: edges of level l start at nodes whose indices are multiples of 2^l
// and use that sublattice throughout. The lattice with N cells and L levels
// is then a subgraph of the lattice with 2N cells and L+1 levels, which makes
// refinement monotone.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <queue>
#include <span>
#include <string>
#include <vector>

#include "phasemetric/error.hpp"

namespace phasemetric {

struct LatticeAxis {
  int coord = 0;
  double lo = 0, hi = 1;
  int cells = 8;
};

struct LatticeProblem {
  std::vector<double> base_state;  // full state; inactive coordinates frozen here
  std::vector<LatticeAxis> axes;
  int nflows = 0;
  std::vector<bool> flow_enabled;  // optional per-flow mask
  std::function<void(int, std::span<const double>, std::span<double>)> velocity;
  std::function<double(std::span<const double>)> rate;
  std::function<double(std::span<const double>, std::span<const double>)> ambient;
  std::function<bool(std::span<const double>)> admissible;  // optional node filter
  int levels = 1;
  std::vector<int> multipliers = {1, 4};
  int substeps = 8;
  double frozen_tol = 1e-9;
  std::size_t max_nodes = 40'000'000;
};

struct LatticeResult {
  double value = 0;
  double snap_cost = 0;  // cost of snapping p and q onto the lattice
  std::vector<std::vector<double>> path;
  std::size_t settled = 0;
  std::size_t nodes = 0;
};

namespace detail {

class LatticeSearch {
 public:
  explicit LatticeSearch(const LatticeProblem& pb) : pb_(pb), n_(pb.base_state.size()) {
    if (pb_.axes.empty()) throw Error(ErrorCode::InvalidArgument, "lattice needs at least one active axis");
    std::size_t total = 1;
    for (const auto& a : pb_.axes) {
      if (a.cells < 1 || !(a.hi > a.lo)) throw Error(ErrorCode::InvalidArgument, "bad lattice axis");
      stride_.push_back(total);
      total *= static_cast<std::size_t>(a.cells + 1);
      if (total > pb_.max_nodes) throw Error(ErrorCode::InvalidArgument, "lattice too large");
    }
    total_ = total;
    is_active_.assign(n_, false);
    for (const auto& a : pb_.axes) is_active_[static_cast<std::size_t>(a.coord)] = true;
  }

  std::size_t total() const { return total_; }

  double coord(std::size_t axis, long k) const {
    const auto& a = pb_.axes[axis];
    return a.lo + (a.hi - a.lo) * (static_cast<double>(k) / static_cast<double>(a.cells));
  }

  std::vector<long> indices(std::size_t id) const {
    std::vector<long> k(pb_.axes.size());
    for (std::size_t i = 0; i < k.size(); ++i)
      k[i] = static_cast<long>((id / stride_[i]) % static_cast<std::size_t>(pb_.axes[i].cells + 1));
    return k;
  }

  std::size_t id_of(const std::vector<long>& k) const {
    std::size_t id = 0;
    for (std::size_t i = 0; i < k.size(); ++i) id += static_cast<std::size_t>(k[i]) * stride_[i];
    return id;
  }

  std::vector<double> state_of(const std::vector<long>& k) const {
    auto s = pb_.base_state;
    for (std::size_t i = 0; i < k.size(); ++i) s[static_cast<std::size_t>(pb_.axes[i].coord)] = coord(i, k[i]);
    return s;
  }

  bool admissible(std::span<const double> s) const { return !pb_.admissible || pb_.admissible(s); }

  // Nearest node on the sublattice of spacing `unit` (in index units).
  std::vector<long> snap(std::span<const double> s, long unit) const {
    std::vector<long> k(pb_.axes.size());
    for (std::size_t i = 0; i < k.size(); ++i) {
      const auto& a = pb_.axes[i];
      double h = (a.hi - a.lo) / a.cells * static_cast<double>(unit);
      long r = std::lround((s[static_cast<std::size_t>(a.coord)] - a.lo) / h);
      long maxr = a.cells / unit;
      k[i] = std::clamp(r, 0L, maxr) * unit;
    }
    return k;
  }

  struct Edge {
    std::size_t to;
    double cost;
  };

  void edges(std::size_t id, std::vector<Edge>& out) const {
    out.clear();
    auto k = indices(id);
    auto s = state_of(k);
    for (int level = 0; level < pb_.levels; ++level) {
      const long unit = 1L << level;
      if (std::any_of(k.begin(), k.end(), [&](long v) { return v % unit != 0; })) break;
      // Axis edges.
      for (std::size_t a = 0; a < k.size(); ++a) {
        for (long sg : {-1L, 1L}) {
          long nk = k[a] + sg * unit;
          if (nk < 0 || nk > pb_.axes[a].cells) continue;
          auto k2 = k;
          k2[a] = nk;
          auto s2 = state_of(k2);
          if (!admissible(s2)) continue;
          out.push_back({id_of(k2), pb_.ambient(s, s2)});
        }
      }
      // Flow edges.
      for (int f = 0; f < pb_.nflows; ++f) {
        if (!pb_.flow_enabled.empty() && !pb_.flow_enabled[static_cast<std::size_t>(f)]) continue;
        for (double dir : {1.0, -1.0})
          for (int mult : pb_.multipliers) flow_edge(k, s, f, dir, unit, mult, out);
      }
    }
  }

 private:
  void flow_edge(const std::vector<long>& k, const std::vector<double>& s, int f, double dir, long unit, int mult,
                 std::vector<Edge>& out) const {
    std::vector<double> v(n_);
    pb_.velocity(f, s, v);
    for (auto& c : v) c *= dir;
    // Dominant axis in units of the level step.
    std::size_t dom = 0;
    double best = 0;
    for (std::size_t i = 0; i < pb_.axes.size(); ++i) {
      const auto& a = pb_.axes[i];
      double h = (a.hi - a.lo) / a.cells * static_cast<double>(unit);
      double r = std::fabs(v[static_cast<std::size_t>(a.coord)]) / h;
      if (r > best) {
        best = r;
        dom = i;
      }
    }
    if (!(best > 0) || !std::isfinite(best)) return;
    const auto& ax = pb_.axes[dom];
    const std::size_t dc = static_cast<std::size_t>(ax.coord);
    long target = k[dom] + (v[dc] > 0 ? 1 : -1) * mult * unit;
    if (target < 0 || target > ax.cells) return;
    const double plane = coord(dom, target);
    const double h_dom = (ax.hi - ax.lo) / ax.cells * static_cast<double>(unit) * mult;
    const double dt = h_dom / std::fabs(v[dc]) / pb_.substeps;

    std::vector<double> cur = s, k1(n_), k2(n_), k3(n_), k4(n_), tmp(n_), nxt(n_);
    double cost = 0;
    double rate_prev = pb_.rate(cur);
    const int max_steps = 8 * pb_.substeps;
    for (int step = 0; step < max_steps; ++step) {
      auto rhs = [&](const std::vector<double>& x, std::vector<double>& o) {
        pb_.velocity(f, x, o);
        for (auto& c : o) c *= dir;
      };
      rhs(cur, k1);
      for (std::size_t c = 0; c < n_; ++c) tmp[c] = cur[c] + 0.5 * dt * k1[c];
      double rate_mid = pb_.rate(tmp);
      rhs(tmp, k2);
      for (std::size_t c = 0; c < n_; ++c) tmp[c] = cur[c] + 0.5 * dt * k2[c];
      rhs(tmp, k3);
      for (std::size_t c = 0; c < n_; ++c) tmp[c] = cur[c] + dt * k3[c];
      rhs(tmp, k4);
      for (std::size_t c = 0; c < n_; ++c) nxt[c] = cur[c] + dt / 6.0 * (k1[c] + 2 * k2[c] + 2 * k3[c] + k4[c]);
      double rate_next = pb_.rate(nxt);
      double rmax = std::max({rate_prev, rate_mid, rate_next});
      if (!std::isfinite(rmax)) return;
      // Frozen coordinates must stay put; active ones must stay in the box.
      for (std::size_t c = 0; c < n_; ++c) {
        if (!std::isfinite(nxt[c])) return;
        if (!is_active_[c] && std::fabs(nxt[c] - s[c]) > pb_.frozen_tol * (1 + std::fabs(s[c]))) return;
      }
      double a0 = cur[dc] - plane, a1 = nxt[dc] - plane;
      if (a0 == 0 || (a0 < 0) != (a1 < 0) || a1 == 0) {
        double theta = a1 == a0 ? 1.0 : a0 / (a0 - a1);
        for (std::size_t c = 0; c < n_; ++c) nxt[c] = cur[c] + theta * (nxt[c] - cur[c]);
        cost += theta * dt * rmax;
        finish(nxt, cost, unit, k, out);
        return;
      }
      cost += dt * rmax;
      for (std::size_t i = 0; i < pb_.axes.size(); ++i) {
        const auto& a = pb_.axes[i];
        double x = nxt[static_cast<std::size_t>(a.coord)];
        double pad = 0.5 * (a.hi - a.lo) / a.cells;
        if (x < a.lo - pad || x > a.hi + pad) return;
      }
      cur.swap(nxt);
      rate_prev = rate_next;
    }
  }

  void finish(const std::vector<double>& end, double cost, long unit, const std::vector<long>& from,
              std::vector<Edge>& out) const {
    auto k2 = snap(end, unit);
    if (k2 == from) return;
    auto node = state_of(k2);
    if (!admissible(node)) return;
    cost += pb_.ambient(end, node);
    if (!std::isfinite(cost)) return;
    out.push_back({id_of(k2), cost});
  }

  const LatticeProblem& pb_;
  std::size_t n_;
  std::vector<std::size_t> stride_;
  std::vector<bool> is_active_;
  std::size_t total_ = 0;
};

}  // namespace detail

/// Dijkstra from the node nearest p to the node nearest q; p and q are
/// connected to their nodes by ambient snaps. Throws UNREACHABLE.
inline LatticeResult lattice_shortest_path(const LatticeProblem& pb, std::span<const double> p,
                                           std::span<const double> q) {
  detail::LatticeSearch g(pb);
  const std::size_t n = pb.base_state.size();
  std::vector<bool> active(n, false);
  for (const auto& a : pb.axes) active[static_cast<std::size_t>(a.coord)] = true;
  for (std::size_t c = 0; c < n; ++c) {
    if (active[c]) continue;
    double tol = 1e-9 * (1 + std::fabs(pb.base_state[c]));
    if (std::fabs(p[c] - pb.base_state[c]) > tol || std::fabs(q[c] - pb.base_state[c]) > tol)
      throw Error(ErrorCode::InvalidArgument, "endpoints differ in a frozen chart coordinate");
  }
  for (const auto& a : pb.axes) {
    for (double v : {p[static_cast<std::size_t>(a.coord)], q[static_cast<std::size_t>(a.coord)]}) {
      double pad = 1e-9 * (a.hi - a.lo);
      if (v < a.lo - pad || v > a.hi + pad) throw Error(ErrorCode::InvalidArgument, "endpoint outside chart box");
    }
  }
  auto kp = g.snap(p, 1), kq = g.snap(q, 1);
  auto sp = g.state_of(kp), sq = g.state_of(kq);
  LatticeResult res;
  res.nodes = g.total();
  res.snap_cost = pb.ambient(p, sp) + pb.ambient(sq, q);
  const std::size_t src = g.id_of(kp), dst = g.id_of(kq);

  std::vector<double> dist(g.total(), INFINITY);
  std::vector<std::int64_t> prev(g.total(), -1);
  std::vector<bool> done(g.total(), false);
  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  dist[src] = 0;
  pq.push({0.0, src});
  std::vector<detail::LatticeSearch::Edge> es;
  while (!pq.empty()) {
    auto [dcur, u] = pq.top();
    pq.pop();
    if (done[u]) continue;
    done[u] = true;
    ++res.settled;
    if (u == dst) break;
    g.edges(u, es);
    for (const auto& e : es) {
      double nd = dcur + e.cost;
      if (nd < dist[e.to]) {
        dist[e.to] = nd;
        prev[e.to] = static_cast<std::int64_t>(u);
        pq.push({nd, e.to});
      }
    }
  }
  if (!std::isfinite(dist[dst])) throw Error(ErrorCode::Unreachable, "q is not reachable within the chart box");
  res.value = dist[dst] + res.snap_cost;
  for (std::int64_t v = static_cast<std::int64_t>(dst); v >= 0; v = prev[static_cast<std::size_t>(v)])
    res.path.push_back(g.state_of(g.indices(static_cast<std::size_t>(v))));
  std::reverse(res.path.begin(), res.path.end());
  return res;
}

}  // namespace phasemetric
