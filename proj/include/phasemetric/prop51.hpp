#pragma once

#include <array>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "phasemetric/lemma53.hpp"
#include "phasemetric/metric.hpp"
#include "phasemetric/scenario.hpp"

namespace phasemetric {

namespace detail {

// 8-point Gauss-Legendre on [-1, 1].
inline constexpr std::array<double, 8> kGLNodes = {-0.9602898564975363, -0.7966664774136267, -0.5255324099163290,
                                                   -0.1834346424956498, 0.1834346424956498,  0.5255324099163290,
                                                   0.7966664774136267,  0.9602898564975363};
inline constexpr std::array<double, 8> kGLWeights = {0.1012285362903763, 0.2223810344533745, 0.3137066458778873,
                                                     0.3626837833783620, 0.3626837833783620, 0.3137066458778873,
                                                     0.2223810344533745, 0.1012285362903763};

template <class F>
double integrate(F&& f, double a, double b, int panels) {
  double s = 0, w = (b - a) / panels;
  for (int p = 0; p < panels; ++p) {
    double c = a + (p + 0.5) * w;
    for (std::size_t i = 0; i < kGLNodes.size(); ++i) s += kGLWeights[i] * f(c + 0.5 * w * kGLNodes[i]);
  }
  return 0.5 * w * s;
}

}  // namespace detail

/// phi = (t + P) tau + f (xi - tau b_y) + g (eta + tau b_x) for X = d/dx - b_y d/dt,
/// Y = d/dy + b_x d/dt, with f, g from Lemma53Solution and the potential P of
/// P_x = b_y - g Lb, P_y = -b_x + f Lb integrated along axis-parallel paths from 0.
class Prop51Witness : public Witness {
 public:
  static constexpr double kLoopTolerance = 1e-4;

  Prop51Witness(const std::string& b_text, std::shared_ptr<const Lemma53Solution> sol, int panels = 32)
      : sol_(std::move(sol)), panels_(panels) {
    const std::vector<std::string> xy = {"x", "y"};
    auto b = ScalarExpr::parse(b_text, xy);
    auto lap = b.derivative(0).derivative(0) + b.derivative(1).derivative(1);
    if (!(lap == sol_->lambda_expr()))
      throw Error(ErrorCode::InvalidArgument, "Laplacian of b is " + lap.to_string(xy) + ", not the divergence-equation weight");
    bx_ = CompiledExpr(b.derivative(0));
    by_ = CompiledExpr(b.derivative(1));
    bxx_ = CompiledExpr(b.derivative(0).derivative(0));
    bxy_ = CompiledExpr(b.derivative(0).derivative(1));
    byy_ = CompiledExpr(b.derivative(1).derivative(1));
  }

  std::string id() const override { return "prop51"; }

  double Px(double x, double y) const { return by_(pt(x, y)) - sol_->g(x, y) * sol_->lambda(x, y); }
  double Py(double x, double y) const { return -bx_(pt(x, y)) + sol_->f(x, y) * sol_->lambda(x, y); }

  /// Along (0,0) -> (x,0) -> (x,y); memoized per base point.
  double potential(double x, double y) const {
    if (x == 0 && y == 0) return 0.0;
    {
      std::lock_guard<std::mutex> lock(memo_mutex_);
      auto it = memo_.find({x, y});
      if (it != memo_.end()) return it->second;
    }
    double v = 0;
    if (x != 0) v += detail::integrate([&](double s) { return Px(s, 0); }, 0, x, panels_);
    if (y != 0) v += detail::integrate([&](double s) { return Py(x, s); }, 0, y, panels_);
    std::lock_guard<std::mutex> lock(memo_mutex_);
    memo_.emplace(std::make_pair(x, y), v);
    return v;
  }

  /// |P via x-then-y - P via y-then-x| relative to the larger of the two path L1 integrals.
  double loop_defect(double x, double y) const {
    auto ax = [&](double s) { return Px(s, 0); };
    auto ay = [&](double s) { return Py(x, s); };
    auto by = [&](double s) { return Py(0, s); };
    auto bxp = [&](double s) { return Px(s, y); };
    const double p1 = detail::integrate(ax, 0, x, panels_) + detail::integrate(ay, 0, y, panels_);
    const double p2 = detail::integrate(by, 0, y, panels_) + detail::integrate(bxp, 0, x, panels_);
    auto mag = [&](auto f) { return [f](double s) { return std::fabs(f(s)); }; };
    const double s1 = std::fabs(detail::integrate(mag(ax), 0, x, panels_)) + std::fabs(detail::integrate(mag(ay), 0, y, panels_));
    const double s2 = std::fabs(detail::integrate(mag(by), 0, y, panels_)) + std::fabs(detail::integrate(mag(bxp), 0, x, panels_));
    const double scale = std::max(s1, s2);
    return scale > 0 ? std::fabs(p1 - p2) / scale : 0.0;
  }

  /// Throws PotentialInconsistent if any loop on a grid over [-a, a]^2 fails.
  double check_loops(double a, int n = 5) const {
    double worst = 0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double x = -a + 2 * a * i / (n - 1), y = -a + 2 * a * j / (n - 1);
        worst = std::max(worst, loop_defect(x, y));
      }
    if (worst > kLoopTolerance)
      throw Error(ErrorCode::PotentialInconsistent,
                  "potential loop defect " + std::to_string(worst) + " exceeds tolerance; divergence-equation residual too large");
    return worst;
  }

  double value(std::span<const double> s) const override {
    const double x = s[0], y = s[1], t = s[2], xi = s[3], eta = s[4], tau = s[5];
    const double A = xi - tau * by_(pt(x, y)), B = eta + tau * bx_(pt(x, y));
    return (t + potential(x, y)) * tau + sol_->f(x, y) * A + sol_->g(x, y) * B;
  }

  void gradient(std::span<const double> s, std::span<double> g) const override {
    const double x = s[0], y = s[1], t = s[2], xi = s[3], eta = s[4], tau = s[5];
    const auto p = pt(x, y);
    const double bx = bx_(p), by = by_(p), bxx = bxx_(p), bxy = bxy_(p), byy = byy_(p);
    const double A = xi - tau * by, B = eta + tau * bx;
    const double f = sol_->f(x, y), gg = sol_->g(x, y), L = sol_->lambda(x, y);
    const double d = sol_->fd_step(x, y);
    const double fx = (sol_->f(x + d, y) - sol_->f(x - d, y)) / (2 * d);
    const double fy = (sol_->f(x, y + d) - sol_->f(x, y - d)) / (2 * d);
    const double gx = (sol_->g(x + d, y) - sol_->g(x - d, y)) / (2 * d);
    const double gy = (sol_->g(x, y + d) - sol_->g(x, y - d)) / (2 * d);
    const double Pxv = by - gg * L, Pyv = -bx + f * L;
    g[0] = tau * Pxv + fx * A + gx * B - f * tau * bxy + gg * tau * bxx;
    g[1] = tau * Pyv + fy * A + gy * B - f * tau * byy + gg * tau * bxy;
    g[2] = tau;
    g[3] = f;
    g[4] = gg;
    g[5] = t + potential(x, y) - f * by + gg * bx;
  }

  const Lemma53Solution& solution() const { return *sol_; }

 private:
  static std::array<double, 2> pt(double x, double y) { return {x, y}; }

  std::shared_ptr<const Lemma53Solution> sol_;
  int panels_;
  CompiledExpr bx_, by_, bxx_, bxy_, byy_;
  mutable std::mutex memo_mutex_;
  mutable std::map<std::pair<double, double>, double> memo_;
};

/// Witness factory for kind "prop51" (spec.expr holds b). The divergence equation is solved once
/// per weight on first use and shared across lambdas and threads.
inline WitnessFactory construction_factory(const Lemma53Grid& grid = {}) {
  struct Cache {
    std::mutex m;
    std::map<std::string, std::shared_ptr<const Lemma53Solution>> sols;
  };
  auto cache = std::make_shared<Cache>();
  return [cache, grid](const WitnessSpec& w, const Operator&, const ScenarioInstance&) -> std::unique_ptr<Witness> {
    if (w.kind != "prop51") return nullptr;
    const std::vector<std::string> xy = {"x", "y"};
    auto b = ScalarExpr::parse(w.expr, xy);
    auto lap = (b.derivative(0).derivative(0) + b.derivative(1).derivative(1)).to_string(xy);
    std::shared_ptr<const Lemma53Solution> sol;
    bool fresh = false;
    {
      std::lock_guard<std::mutex> lock(cache->m);
      auto& slot = cache->sols[lap];
      if (!slot) {
        slot = std::make_shared<const Lemma53Solution>(lap, grid);
        fresh = true;
      }
      sol = slot;
    }
    auto wit = std::make_unique<Prop51Witness>(w.expr, sol);
    if (fresh) wit->check_loops(0.25);
    return wit;
  };
}

}  // namespace phasemetric
