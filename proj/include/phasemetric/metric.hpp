#pragma once

// Two-sided estimation of rho_L.
//
// Upper bounds are path costs: a flow of time s along +-H_{sigma_j} costs
// s * sigma~ (max over substep samples), a straight ambient step costs its
// rho_0 length sqrt(<xi>^2 |dx|^2 + |dxi|^2) with <xi> maxed over the
// endpoints (|xi| is convex along a segment). Lower bounds come from witness
// functions psi: with
//   r_ham = max_j |H_{sigma_j} psi| / sigma~,
//   r_amb = sqrt(<xi>^{-2} |grad_x psi|^2 + |grad_xi psi|^2),
// psi changes by at most max(r_ham, r_amb) times the cost of any step, so
// |psi(p) - psi(q)| / max(1, r*) is a lower bound wherever the samples
// cover the competing paths.

#include <algorithm>
#include <cmath>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "phasemetric/error.hpp"
#include "phasemetric/expr.hpp"
#include "phasemetric/operator.hpp"

namespace phasemetric {

using State = std::vector<double>;

inline double japanese(std::span<const double> xi) {
  double s = 1.0;
  for (double v : xi) s += v * v;
  return std::sqrt(s);
}

inline double norm2(std::span<const double> v) {
  double s = 0;
  for (double a : v) s += a * a;
  return std::sqrt(s);
}

/// Quantity comparable to the rho_0 path distance. Minimum of the dip
/// family (radial descent to |xi| = u, rotation and base motion at level u,
/// radial ascent) over u in (0, min(|xi|, |xi'|)], and the direct value.
inline double rho0(const PhasePoint& p, const PhasePoint& q) {
  const std::size_t d = p.x.size();
  double dx = 0, dxi = 0;
  for (std::size_t i = 0; i < d; ++i) {
    dx += (p.x[i] - q.x[i]) * (p.x[i] - q.x[i]);
    dxi += (p.xi[i] - q.xi[i]) * (p.xi[i] - q.xi[i]);
  }
  dx = std::sqrt(dx);
  dxi = std::sqrt(dxi);
  if (dx == 0 && dxi == 0) return 0.0;
  const double a = p.fiber_norm(), b = q.fiber_norm(), mn = std::min(a, b);
  double ang = 0;
  for (std::size_t i = 0; i < d; ++i) {
    double u = p.xi[i] / a - q.xi[i] / b;
    ang += u * u;
  }
  ang = std::sqrt(ang);
  auto dip = [&](double u) { return (a - u) + (b - u) + (1 + u) * dx + u * ang; };
  // Linear in u: the infimum sits at an end of the interval.
  double best = std::min(dip(0.0), dip(mn));
  double direct = (1 + mn) * dx + dxi;
  return std::min(best, direct);
}

/// |x - x'| + |xi - xi'| / (1 + |xi| + |xi'|) > c.
inline bool is_separated(const PhasePoint& p, const PhasePoint& q, double c) {
  double dx = 0, dxi = 0;
  for (std::size_t i = 0; i < p.x.size(); ++i) {
    dx += (p.x[i] - q.x[i]) * (p.x[i] - q.x[i]);
    dxi += (p.xi[i] - q.xi[i]) * (p.xi[i] - q.xi[i]);
  }
  return std::sqrt(dx) + std::sqrt(dxi) / (1 + p.fiber_norm() + q.fiber_norm()) > c;
}

/// rho_0 length of the straight segment a -> b (2d states).
inline double ambient_cost(std::span<const double> a, std::span<const double> b) {
  const std::size_t d = a.size() / 2;
  double dx = 0, dxi = 0;
  for (std::size_t i = 0; i < d; ++i) {
    dx += (a[i] - b[i]) * (a[i] - b[i]);
    dxi += (a[d + i] - b[d + i]) * (a[d + i] - b[d + i]);
  }
  double jb = std::max(japanese(a.subspan(d)), japanese(b.subspan(d)));
  return std::sqrt(jb * jb * dx + dxi);
}

enum class MoveKind { Hamiltonian, Ambient };

struct Move {
  MoveKind kind = MoveKind::Ambient;
  int field = 0;          // Hamiltonian: 0-based field index
  double direction = 1;   // Hamiltonian: +1 follows H_{sigma_j}, -1 reverses it
  double duration = 0;    // Hamiltonian: flow time
  State displacement;     // Ambient: 2d displacement
};

struct FlowResult {
  State end;
  double cost = 0;
  double time = 0;
  int steps = 0;
  std::vector<State> trace;  // states at step boundaries, start included
};

namespace detail {

inline void ham_rhs(const Operator& op, int j, double dir, std::span<const double> s, std::span<double> out) {
  op.hamiltonian(j, s, out);
  for (auto& v : out) v *= dir;
}

// n fixed RK4 steps; cost uses sigma~ at step start, RK midpoint, step end.
inline FlowResult rk4_flow(const Operator& op, int j, double dir, std::span<const double> p0, double T, int n,
                           bool keep_trace) {
  const std::size_t N = p0.size();
  FlowResult r;
  State s(p0.begin(), p0.end()), k1(N), k2(N), k3(N), k4(N), tmp(N);
  const double h = T / n;
  double sig_prev = op.sigma_tilde(s);
  if (keep_trace) r.trace.push_back(s);
  for (int i = 0; i < n; ++i) {
    ham_rhs(op, j, dir, s, k1);
    for (std::size_t c = 0; c < N; ++c) tmp[c] = s[c] + 0.5 * h * k1[c];
    double sig_mid = op.sigma_tilde(tmp);
    ham_rhs(op, j, dir, tmp, k2);
    for (std::size_t c = 0; c < N; ++c) tmp[c] = s[c] + 0.5 * h * k2[c];
    ham_rhs(op, j, dir, tmp, k3);
    for (std::size_t c = 0; c < N; ++c) tmp[c] = s[c] + h * k3[c];
    ham_rhs(op, j, dir, tmp, k4);
    for (std::size_t c = 0; c < N; ++c) s[c] += h / 6.0 * (k1[c] + 2 * k2[c] + 2 * k3[c] + k4[c]);
    double sig_end = op.sigma_tilde(s);
    r.cost += std::fabs(h) * std::max({sig_prev, sig_mid, sig_end});
    sig_prev = sig_end;
    if (keep_trace) r.trace.push_back(s);
  }
  r.end = s;
  r.time = T;
  r.steps = n;
  return r;
}

inline bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double a) { return std::isfinite(a); });
}

}  // namespace detail

/// Integrates +-H_{sigma_j} for time T from p0, doubling the step count until
/// the endpoint and the cost are stable and sigma_j (conserved along its own
/// flow) drifts by less than 1%.
inline FlowResult flow_hamiltonian(const Operator& op, int j, double dir, std::span<const double> p0, double T,
                                   bool keep_trace = false) {
  if (j < 0 || j >= op.nfields()) throw Error(ErrorCode::InvalidArgument, "field index out of range");
  const std::size_t d = p0.size() / 2;
  const double s0 = op.symbol(j, p0);
  FlowResult prev = detail::rk4_flow(op, j, dir, p0, T, 16, false);
  for (int n = 32; n <= (1 << 18); n *= 2) {
    FlowResult cur = detail::rk4_flow(op, j, dir, p0, T, n, keep_trace);
    if (!detail::all_finite(cur.end) || !std::isfinite(cur.cost))
      throw Error(ErrorCode::FlowEscaped, "non-finite state along Hamiltonian flow");
    double err = 0;
    double fib = 1 + norm2(std::span<const double>(cur.end).subspan(d));
    for (std::size_t c = 0; c < p0.size(); ++c) {
      double scale = c < d ? 1 + std::fabs(cur.end[c]) : fib;
      err = std::max(err, std::fabs(cur.end[c] - prev.end[c]) / scale);
    }
    double drift = std::fabs(op.symbol(j, cur.end) - s0);
    bool cost_ok = std::fabs(cur.cost - prev.cost) <= 1e-3 * std::max(cur.cost, 1e-300);
    if (err < 1e-10 && cost_ok && drift <= 0.01 * std::max(std::fabs(s0), 1.0)) return cur;
    prev = std::move(cur);
  }
  throw Error(ErrorCode::FlowEscaped, "Hamiltonian flow did not converge within step budget");
}

/// Cost of a single pure move from p (Hamiltonian or ambient).
inline double finsler_cost(const Operator& op, std::span<const double> p, const Move& m) {
  if (m.kind == MoveKind::Ambient) {
    State e(p.begin(), p.end());
    for (std::size_t i = 0; i < e.size(); ++i) e[i] += m.displacement[i];
    return ambient_cost(p, e);
  }
  return flow_hamiltonian(op, m.field, m.direction, p, m.duration).cost;
}

struct PathResult {
  State end;
  double cost = 0;
  std::vector<State> trace;
};

/// Chains moves from `start`; returns total cost, endpoint, and sampled states.
inline PathResult certificate_path_cost(const Operator& op, std::span<const double> start,
                                        const std::vector<Move>& path) {
  PathResult r;
  r.end.assign(start.begin(), start.end());
  r.trace.push_back(r.end);
  for (const auto& m : path) {
    if (m.kind == MoveKind::Ambient) {
      if (m.displacement.size() != r.end.size())
        throw Error(ErrorCode::InvalidArgument, "ambient displacement has wrong dimension");
      State e = r.end;
      for (std::size_t i = 0; i < e.size(); ++i) e[i] += m.displacement[i];
      r.cost += ambient_cost(r.end, e);
      const int n = 8;
      for (int k = 1; k <= n; ++k) {
        State s = r.end;
        for (std::size_t i = 0; i < s.size(); ++i) s[i] += m.displacement[i] * k / n;
        r.trace.push_back(s);
      }
      r.end = e;
    } else {
      auto f = flow_hamiltonian(op, m.field, m.direction, r.end, m.duration, true);
      r.cost += f.cost;
      // Keep a bounded number of trace samples per segment.
      const std::size_t stride = std::max<std::size_t>(1, f.trace.size() / 64);
      for (std::size_t i = stride; i < f.trace.size(); i += stride) r.trace.push_back(f.trace[i]);
      r.trace.push_back(f.end);
      r.end = f.end;
    }
  }
  return r;
}

/// A candidate function psi on T*R^d with gradient.
class Witness {
 public:
  virtual ~Witness() = default;
  virtual std::string id() const = 0;
  virtual double value(std::span<const double> p) const = 0;
  virtual void gradient(std::span<const double> p, std::span<double> g) const = 0;
};

/// Witness given by an expression in the phase variables (parameters bound).
class ExprWitness : public Witness {
 public:
  ExprWitness(std::string id, expr::NumExpr e, int nphase) : id_(std::move(id)), e_(std::move(e)) {
    for (int i = 0; i < nphase; ++i) grad_.push_back(e_.derivative(i));
  }
  std::string id() const override { return id_; }
  double value(std::span<const double> p) const override { return e_.eval(p); }
  void gradient(std::span<const double> p, std::span<double> g) const override {
    for (std::size_t i = 0; i < grad_.size(); ++i) g[i] = grad_[i].eval(p);
  }

 private:
  std::string id_;
  expr::NumExpr e_;
  std::vector<expr::NumExpr> grad_;
};

struct RatioReport {
  double r_ham = 0;  // max_j |H_j psi| / sigma~
  double r_amb = 0;  // sqrt(|grad_x psi|^2 / <xi>^2 + |grad_xi psi|^2)
  std::size_t samples = 0;
  State argmax;  // sample attaining max(r_ham, r_amb)
  double r_star() const { return std::max(r_ham, r_amb); }
};

inline RatioReport witness_ratios(const Operator& op, const Witness& w, const std::vector<State>& samples) {
  RatioReport r;
  const int d = op.dim();
  State g(static_cast<std::size_t>(2 * d)), H(static_cast<std::size_t>(2 * d));
  double best = -1;
  for (const auto& s : samples) {
    w.gradient(s, g);
    if (!detail::all_finite(g)) throw Error(ErrorCode::NonFinite, "non-finite witness derivative at a sample point");
    double sig = op.sigma_tilde(s);
    double rh = 0;
    for (int j = 0; j < op.nfields(); ++j) {
      op.hamiltonian(j, s, H);
      double v = 0;
      for (std::size_t i = 0; i < g.size(); ++i) v += H[i] * g[i];
      rh = std::max(rh, std::fabs(v) / sig);
    }
    double jb = japanese(std::span<const double>(s).subspan(static_cast<std::size_t>(d)));
    double gx = 0, gxi = 0;
    for (int i = 0; i < d; ++i) {
      gx += g[static_cast<std::size_t>(i)] * g[static_cast<std::size_t>(i)];
      gxi += g[static_cast<std::size_t>(d + i)] * g[static_cast<std::size_t>(d + i)];
    }
    double ra = std::sqrt(gx / (jb * jb) + gxi);
    if (!std::isfinite(rh) || !std::isfinite(ra)) throw Error(ErrorCode::NonFinite, "non-finite witness ratio");
    r.r_ham = std::max(r.r_ham, rh);
    r.r_amb = std::max(r.r_amb, ra);
    if (std::max(rh, ra) > best) {
      best = std::max(rh, ra);
      r.argmax = s;
    }
  }
  r.samples = samples.size();
  return r;
}

struct DistanceEstimate {
  double lower = 0;
  double upper = INFINITY;
  std::string lower_witness;
  std::string upper_description;
  RatioReport ratios;
  double slack = 0;  // discretization allowance on the upper side
  std::string grid;  // lattice metadata, if any
};

/// Lower bound |psi(p) - psi(q)| / max(1, r*) with r* sampled on `samples`.
inline DistanceEstimate witness_lower_bound(const Operator& op, const Witness& w, std::span<const double> p,
                                            std::span<const double> q, const std::vector<State>& samples) {
  DistanceEstimate e;
  e.ratios = witness_ratios(op, w, samples);
  double diff = std::fabs(w.value(p) - w.value(q));
  if (!std::isfinite(diff)) throw Error(ErrorCode::NonFinite, "non-finite witness value");
  e.lower = diff / std::max(1.0, e.ratios.r_star());
  e.lower_witness = w.id();
  return e;
}

}  // namespace phasemetric
