#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "phasemetric/error.hpp"
#include "phasemetric/poly.hpp"

namespace phasemetric {

/// Polar grid for the radial quadrature of h. Rays cover the four components of
/// {|y|/2 <= |x| <= 2|y|}; radii are log-spaced.
struct Lemma53Grid {
  double r_min = 1e-3;
  double r_max = 1.0;
  int n_u = 480;      // radial nodes on [r_min, r_max]
  int n_theta = 96;   // rays per component
  double tail = 8;    // log-radius integrated below r_min before the first node
  int substeps = 2;   // RK4 steps per radial cell

  Lemma53Grid refined() const {
    Lemma53Grid g = *this;
    g.n_u = 2 * n_u - 1;
    g.n_theta = 2 * n_theta - 1;
    return g;
  }
};

namespace detail {

// 1 for u <= 1/2, 0 for u >= 1, septic smoothstep between.
inline double cutoff(double u) {
  if (u <= 0.5) return 1.0;
  if (u >= 1.0) return 0.0;
  double t = 2 * u - 1;
  return 1 - t * t * t * t * (35 + t * (-84 + t * (70 - 20 * t)));
}

inline double cutoff_prime(double u) {
  if (u <= 0.5 || u >= 1.0) return 0.0;
  double t = 2 * u - 1, s = 1 - t;
  return -2 * 140 * t * t * t * s * s * s;
}

inline double catmull_rom(double p0, double p1, double p2, double p3, double t) {
  return p1 + 0.5 * t * (p2 - p0 + t * (2 * p0 - 5 * p1 + 4 * p2 - p3 + t * (3 * (p1 - p2) + p3 - p0)));
}

}  // namespace detail

/// Lipschitz f, g with lambda = (f lambda)_x + (g lambda)_y near 0: regional
/// antiderivative solutions glued by a homogeneous cutoff, corrected by
/// (F, G) = (x h, y h) where h_r + h beta / r = r^{-1} lambda~ / lambda.
class Lemma53Solution {
 public:
  static constexpr double kHalfWidth = 0.32175055439664219;  // atan(2) - pi/4

  Lemma53Solution(const std::string& lambda_text, const Lemma53Grid& grid = {}) : text_(lambda_text), grid_(grid) {
    const std::vector<std::string> xy = {"x", "y"};
    lam_ = ScalarExpr::parse(lambda_text, xy);
    if (!lam_.is_polynomial()) throw Error(ErrorCode::InvalidArgument, "weight must be a polynomial in x, y");
    if (grid.r_min <= 0 || grid.r_max <= grid.r_min || grid.n_u < 4 || grid.n_theta < 4 || grid.substeps < 1)
      throw Error(ErrorCode::InvalidArgument, "bad polar grid");
    l_ = CompiledExpr(lam_);
    lx_ = CompiledExpr(lam_.derivative(0));
    ly_ = CompiledExpr(lam_.derivative(1));
    ax_ = CompiledExpr(lam_.antiderivative(0));
    ay_ = CompiledExpr(lam_.antiderivative(1));
    lxx_ = CompiledExpr(lam_.derivative(0).derivative(0));
    lxy_ = CompiledExpr(lam_.derivative(0).derivative(1));
    lyy_ = CompiledExpr(lam_.derivative(1).derivative(1));
    check_positive();
    solve();
  }

  const std::string& lambda_text() const { return text_; }
  const ScalarExpr& lambda_expr() const { return lam_; }
  const Lemma53Grid& grid() const { return grid_; }
  double du() const { return (std::log(grid_.r_max) - std::log(grid_.r_min)) / (grid_.n_u - 1); }
  double dtheta() const { return 2 * theta_span() / (grid_.n_theta - 1); }
  double theta_span() const { return 1.1 * kHalfWidth; }

  double lambda(double x, double y) const { return l_(xy(x, y)); }
  double beta(double x, double y) const { return 2 + (x * lx_(xy(x, y)) + y * ly_(xy(x, y))) / lambda(x, y); }

  /// Regional solutions before the cutoff: f1 = lambda^{-1} int_0^x lambda(s, y) ds, g1 likewise in y.
  double f_regional(double x, double y) const { return ax_(xy(x, y)) / lambda(x, y); }
  double g_regional(double x, double y) const { return ay_(xy(x, y)) / lambda(x, y); }

  double phi(double x, double y) const { return y == 0 ? (x == 0 ? 1.0 : 0.0) : detail::cutoff(std::fabs(x / y)); }
  double psi(double x, double y) const { return phi(y, x); }

  double f_tilde(double x, double y) const {
    double c = phi(x, y);
    return c == 0 || (x == 0 && y == 0) ? 0.0 : c * f_regional(x, y);
  }
  double g_tilde(double x, double y) const {
    double c = psi(x, y);
    return c == 0 || (x == 0 && y == 0) ? 0.0 : c * g_regional(x, y);
  }

  /// lambda~ / lambda, supported where |y|/2 <= |x| <= 2|y|.
  double source(double x, double y) const {
    if (x == 0 || y == 0) return 0.0;
    const double ux = std::fabs(x / y), uy = std::fabs(y / x);
    const double p = detail::cutoff(ux), q = detail::cutoff(uy);
    const double px = detail::cutoff_prime(ux) * (x > 0 ? 1 : -1) / std::fabs(y);
    const double qy = detail::cutoff_prime(uy) * (y > 0 ? 1 : -1) / std::fabs(x);
    if (px == 0 && qy == 0 && p + q == 1) return 0.0;
    const double l = lambda(x, y);
    return (l * (1 - p - q) - px * ax_(xy(x, y)) - qy * ay_(xy(x, y))) / l;
  }

  double h(double x, double y) const { return interpolate(hgrid_, x, y); }
  /// b(r, theta) = int_1^r beta d rho / rho, tabulated on the rays.
  double b(double x, double y) const { return interpolate(bgrid_, x, y); }

  double f(double x, double y) const { return f_tilde(x, y) + x * h(x, y); }
  double g(double x, double y) const { return g_tilde(x, y) + y * h(x, y); }

  /// Finite-difference step tied to the radial resolution and to the local length
  /// scale of lambda, which is much shorter than r near the axes (y ~ x^2 there).
  double fd_step(double x, double y) const {
    const auto p = xy(x, y);
    const double hess = std::sqrt(lxx_(p) * lxx_(p) + 2 * lxy_(p) * lxy_(p) + lyy_(p) * lyy_(p));
    double len = std::max(std::hypot(x, y), grid_.r_min);
    if (hess > 0) len = std::min(len, std::sqrt(std::fabs(l_(p)) / hess));
    return 0.5 * du() * len;
  }

  // Tabulated rays: component k in 0..3 is centred on pi/4 + k pi/2.
  double ray_angle(int k, int i) const { return M_PI / 4 + k * M_PI / 2 - theta_span() + i * dtheta(); }
  double node_radius(int j) const { return grid_.r_min * std::exp(j * du()); }
  double h_node(int k, int i, int j) const { return hgrid_[index(k, i, j)]; }
  double b_node(int k, int i, int j) const { return bgrid_[index(k, i, j)]; }
  /// r h_r at a node, exact from the ray equation.
  double rh_r_node(int k, int i, int j) const {
    double r = node_radius(j), a = ray_angle(k, i), x = r * std::cos(a), y = r * std::sin(a);
    return source(x, y) - beta(x, y) * h_node(k, i, j);
  }
  /// Weight of the truncated part of the ray integral at r_min; tiny when converged.
  double max_tail_weight() const { return tail_weight_; }

 private:
  static std::array<double, 2> xy(double x, double y) { return {x, y}; }

  std::size_t index(int k, int i, int j) const {
    return (static_cast<std::size_t>(k) * static_cast<std::size_t>(grid_.n_theta) + static_cast<std::size_t>(i)) *
               static_cast<std::size_t>(grid_.n_u) +
           static_cast<std::size_t>(j);
  }

  void check_positive() const {
    for (double r : {1e-3, 1e-2, 0.1, 0.5, 1.0})
      for (int i = 0; i < 720; ++i) {
        double a = 2 * M_PI * i / 720;
        if (!(lambda(r * std::cos(a), r * std::sin(a)) > 0))
          throw Error(ErrorCode::InvalidArgument, "weight is not positive away from the origin");
      }
  }

  void solve() {
    const int nt = grid_.n_theta, nu = grid_.n_u, ns = grid_.substeps;
    hgrid_.assign(4 * static_cast<std::size_t>(nt) * static_cast<std::size_t>(nu), 0.0);
    bgrid_ = hgrid_;
    const double step = du() / ns;
    const double u_min = std::log(grid_.r_min), u_top = std::max(std::log(grid_.r_max), 0.0);
    const int pre = static_cast<int>(std::ceil(grid_.tail / step));
    const int total = pre + (nu - 1) * ns + static_cast<int>(std::ceil((u_top - std::log(grid_.r_max)) / step));
    tail_weight_ = 0;
    for (int k = 0; k < 4; ++k)
      for (int i = 0; i < nt; ++i) {
        const double a = ray_angle(k, i), c = std::cos(a), s = std::sin(a);
        auto rhs = [&](double u, double hv, double& dh, double& db) {
          const double r = std::exp(u), be = beta(r * c, r * s);
          dh = source(r * c, r * s) - be * hv;
          db = be;
        };
        // u runs from u_min - pre*step; B accumulates int beta du, h solves h' = q - beta h.
        double u = u_min - pre * step, hv = 0, B = 0, B_at_min = 0, B_at_zero = 0;
        std::vector<double> Bnode(static_cast<std::size_t>(nu));
        for (int n = 0; n <= total; ++n) {
          const int off = n - pre;
          if (off >= 0 && off % ns == 0 && off / ns < nu) {
            hgrid_[index(k, i, off / ns)] = hv;
            Bnode[static_cast<std::size_t>(off / ns)] = B;
            if (off == 0) B_at_min = B;
          }
          if (std::fabs(u) < 0.5 * step) B_at_zero = B;
          if (n == total) break;
          double k1h, k1b, k2h, k2b, k3h, k3b, k4h, k4b;
          rhs(u, hv, k1h, k1b);
          rhs(u + step / 2, hv + step / 2 * k1h, k2h, k2b);
          rhs(u + step / 2, hv + step / 2 * k2h, k3h, k3b);
          rhs(u + step, hv + step * k3h, k4h, k4b);
          hv += step / 6 * (k1h + 2 * k2h + 2 * k3h + k4h);
          B += step / 6 * (k1b + 2 * k2b + 2 * k3b + k4b);
          u += step;
          if (!std::isfinite(hv)) throw Error(ErrorCode::NonFinite, "ray integration diverged");
        }
        if (u_top > 0 && std::fabs(u) < 0.5 * step) B_at_zero = B;
        for (int j = 0; j < nu; ++j) bgrid_[index(k, i, j)] = Bnode[static_cast<std::size_t>(j)] - B_at_zero;
        // e^{b(r0) - b(r_min)}: what the ray start ignores relative to the first node.
        tail_weight_ = std::max(tail_weight_, std::exp(-B_at_min));
      }
    if (tail_weight_ > 1e-12) {
      char buf[200];
      std::snprintf(buf, sizeof buf,
                    "radial quadrature did not converge near r = 0: truncated weight %.3g (e^b must decay like rho^2; "
                    "increase tail)",
                    tail_weight_);
      throw Error(ErrorCode::QuadratureNonConvergence, buf);
    }
  }

  double interpolate(const std::vector<double>& grid, double x, double y) const {
    if (x == 0 && y == 0) return 0.0;
    const double theta = std::atan2(y, x);
    double rel = std::remainder(theta - M_PI / 4, M_PI / 2);
    if (std::fabs(rel) >= theta_span()) return 0.0;
    int k = static_cast<int>(std::lround((theta - M_PI / 4 - rel) / (M_PI / 2)));
    k = ((k % 4) + 4) % 4;
    const double ti = (rel + theta_span()) / dtheta();
    const double u = std::clamp(std::log(std::hypot(x, y)), std::log(grid_.r_min), std::log(grid_.r_max));
    const double uj = (u - std::log(grid_.r_min)) / du();
    const int i1 = std::clamp(static_cast<int>(ti), 0, grid_.n_theta - 2);
    const int j1 = std::clamp(static_cast<int>(uj), 0, grid_.n_u - 2);
    const double tt = ti - i1, tu = uj - j1;
    auto at = [&](int i, int j) {
      i = std::clamp(i, 0, grid_.n_theta - 1);
      j = std::clamp(j, 0, grid_.n_u - 1);
      return grid[index(k, i, j)];
    };
    double col[4];
    for (int a = 0; a < 4; ++a) {
      const int i = i1 - 1 + a;
      col[a] = detail::catmull_rom(at(i, j1 - 1), at(i, j1), at(i, j1 + 1), at(i, j1 + 2), tu);
    }
    return detail::catmull_rom(col[0], col[1], col[2], col[3], tt);
  }

  std::string text_;
  Lemma53Grid grid_;
  ScalarExpr lam_;
  CompiledExpr l_, lx_, ly_, ax_, ay_, lxx_, lxy_, lyy_;
  std::vector<double> hgrid_, bgrid_;
  double tail_weight_ = 0;
};

struct Annulus {
  double r_lo = 0.02, r_hi = 0.5;
  int n_r = 40;
  int n_theta = 720;
};

struct Lemma53Report {
  double residual = 0;        // sup |lambda - (f lambda)_x - (g lambda)_y| / lambda
  double f_over_r = 0, g_over_r = 0;
  double grad_f = 0, grad_g = 0;
  double h_max = 0;
  double r_grad_h = 0;
  double b_theta = 0;
  double beta_min = INFINITY;
  double b_max_inside = -INFINITY;  // max of b over nodes with r < 1
  double beta6_over_r = 0;          // sup over the cone of |beta - 6| / r
  double symmetry = 0;              // sup |g1(x, y) - f1(y, x)| / r
  std::optional<double> closed_form;  // relative error of f in |x| < |y|/2 (flagship weights)
  double tail_weight = 0;
};

namespace detail {

/// x^k + y^k + x^2 y^2 for some even k >= 4, if that is the weight.
inline std::optional<int> flagship_degree(const ScalarExpr& lam) {
  const int k = lam.max_degree();
  if (k < 4 || k % 2) return std::nullopt;
  const std::vector<std::string> xy = {"x", "y"};
  auto ref = ScalarExpr::parse("x^" + std::to_string(k) + " + y^" + std::to_string(k) + " + x^2*y^2", xy);
  if (!(ref == lam)) return std::nullopt;
  return k;
}

template <class F>
void annulus_points(const Annulus& a, F&& fn) {
  for (int ir = 0; ir < a.n_r; ++ir) {
    const double r = a.r_lo * std::pow(a.r_hi / a.r_lo, (ir + 0.5) / a.n_r);
    for (int it = 0; it < a.n_theta; ++it) {
      const double t = 2 * M_PI * (it + 0.5) / a.n_theta;
      fn(r, t, r * std::cos(t), r * std::sin(t));
    }
  }
}

inline double residual_at(const Lemma53Solution& s, double x, double y) {
  const double d = s.fd_step(x, y);
  auto F = [&](double a, double b) { return s.f(a, b) * s.lambda(a, b); };
  auto G = [&](double a, double b) { return s.g(a, b) * s.lambda(a, b); };
  const double div = (F(x + d, y) - F(x - d, y)) / (2 * d) + (G(x, y + d) - G(x, y - d)) / (2 * d);
  const double l = s.lambda(x, y);
  return (l - div) / l;
}

}  // namespace detail

/// Residual and bound statistics on an annulus; derivatives of f, g by finite
/// differences, of h from the ray equation and across rays.
inline Lemma53Report verify_lemma53(const Lemma53Solution& s, const Annulus& a = {}) {
  Lemma53Report rep;
  rep.tail_weight = s.max_tail_weight();
  auto k = detail::flagship_degree(s.lambda_expr());
  double cf = 0;
  detail::annulus_points(a, [&](double r, double, double x, double y) {
    rep.residual = std::max(rep.residual, std::fabs(detail::residual_at(s, x, y)));
    const double fv = s.f(x, y), gv = s.g(x, y);
    rep.f_over_r = std::max(rep.f_over_r, std::fabs(fv) / r);
    rep.g_over_r = std::max(rep.g_over_r, std::fabs(gv) / r);
    const double d = s.fd_step(x, y);
    rep.grad_f = std::max(rep.grad_f, std::hypot(s.f(x + d, y) - s.f(x - d, y), s.f(x, y + d) - s.f(x, y - d)) / (2 * d));
    rep.grad_g = std::max(rep.grad_g, std::hypot(s.g(x + d, y) - s.g(x - d, y), s.g(x, y + d) - s.g(x, y - d)) / (2 * d));
    rep.beta_min = std::min(rep.beta_min, s.beta(x, y));
    rep.symmetry = std::max(rep.symmetry, std::fabs(s.g_regional(x, y) - s.f_regional(y, x)) / r);
    if (k && std::fabs(x) < std::fabs(y) / 2) {
      const double kk = *k;
      const double want = (x * std::pow(y, kk) + x * x * x * y * y / 3 + std::pow(x, kk + 1) / (kk + 1)) /
                          (std::pow(y, kk) + x * x * y * y + std::pow(x, kk));
      cf = std::max(cf, std::fabs(fv - want) / std::fabs(want));
    }
  });
  if (k) rep.closed_form = cf;

  const auto& g = s.grid();
  for (int c = 0; c < 4; ++c)
    for (int i = 0; i < g.n_theta; ++i) {
      const double t = s.ray_angle(c, i);
      const bool inside = std::fabs(std::remainder(t - M_PI / 4, M_PI / 2)) <= Lemma53Solution::kHalfWidth;
      for (int j = 0; j < g.n_u; ++j) {
        const double r = s.node_radius(j);
        const double x = r * std::cos(t), y = r * std::sin(t);
        rep.beta_min = std::min(rep.beta_min, s.beta(x, y));
        if (r < 1 - 1e-12) rep.b_max_inside = std::max(rep.b_max_inside, s.b_node(c, i, j));
        if (inside) rep.beta6_over_r = std::max(rep.beta6_over_r, std::fabs(s.beta(x, y) - 6) / r);
        if (r < a.r_lo || r > a.r_hi) continue;
        rep.h_max = std::max(rep.h_max, std::fabs(s.h_node(c, i, j)));
        if (i == 0 || i == g.n_theta - 1) continue;
        const double ht = (s.h_node(c, i + 1, j) - s.h_node(c, i - 1, j)) / (2 * s.dtheta());
        rep.r_grad_h = std::max(rep.r_grad_h, std::hypot(s.rh_r_node(c, i, j), ht));
        if (inside)
          rep.b_theta = std::max(rep.b_theta, std::fabs(s.b_node(c, i + 1, j) - s.b_node(c, i - 1, j)) / (2 * s.dtheta()));
      }
    }
  return rep;
}

inline nlohmann::ordered_json lemma53_json(const Lemma53Solution& s, const Lemma53Report& r, const Annulus& a) {
  nlohmann::ordered_json j;
  j["lambda"] = s.lambda_text();
  j["residual"] = r.residual;
  j["sup_f_over_r"] = r.f_over_r;
  j["sup_g_over_r"] = r.g_over_r;
  j["sup_grad_f"] = r.grad_f;
  j["sup_grad_g"] = r.grad_g;
  j["sup_h"] = r.h_max;
  j["sup_r_grad_h"] = r.r_grad_h;
  j["sup_b_theta"] = r.b_theta;
  j["min_beta"] = r.beta_min;
  j["max_b_below_r1"] = r.b_max_inside;
  j["sup_beta_minus_6_over_r"] = r.beta6_over_r;
  j["symmetry"] = r.symmetry;
  j["closed_form_error"] = r.closed_form ? nlohmann::ordered_json(*r.closed_form) : nlohmann::ordered_json(nullptr);
  j["tail_weight"] = r.tail_weight;
  const auto& g = s.grid();
  j["grid"] = {{"r_min", g.r_min}, {"r_max", g.r_max}, {"n_u", g.n_u}, {"n_theta", g.n_theta}, {"tail", g.tail},
               {"substeps", g.substeps}, {"cutoff", "septic smoothstep in |x|/|y| on [1/2, 1]"}};
  j["annulus"] = {{"r_lo", a.r_lo}, {"r_hi", a.r_hi}, {"n_r", a.n_r}, {"n_theta", a.n_theta}};
  return j;
}

/// Annulus samples as CSV: r,theta,f,g,h,residual.
inline std::string lemma53_csv(const Lemma53Solution& s, const Annulus& a) {
  std::string out = "r,theta,f,g,h,residual\n";
  char buf[256];
  detail::annulus_points(a, [&](double r, double t, double x, double y) {
    std::snprintf(buf, sizeof buf, "%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n", r, t, s.f(x, y), s.g(x, y), s.h(x, y),
                  detail::residual_at(s, x, y));
    out += buf;
  });
  return out;
}

}  // namespace phasemetric
