#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <utility>
#include <vector>

namespace vbald {

/// Gauss-Legendre nodes and weights on [-1, 1], ascending.
template <class Real = double>
std::pair<std::vector<Real>, std::vector<Real>> gauss_legendre(int n) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: need at least one node");
  std::vector<Real> x(static_cast<std::size_t>(n)), w(static_cast<std::size_t>(n));
  const Real pi = std::numbers::pi_v<Real>;
  const int half = (n + 1) / 2;
  for (int i = 0; i < half; ++i) {
    Real z = std::cos(pi * (Real(i) + Real(0.75)) / (Real(n) + Real(0.5)));
    Real dp = 0;
    for (int iter = 0; iter < 100; ++iter) {
      Real p1 = 1, p2 = 0;
      for (int j = 1; j <= n; ++j) {
        const Real p3 = p2;
        p2 = p1;
        p1 = ((Real(2 * j - 1)) * z * p2 - Real(j - 1) * p3) / Real(j);
      }
      dp = Real(n) * (z * p1 - p2) / (z * z - Real(1));
      const Real step = p1 / dp;
      z -= step;
      if (std::abs(step) <= Real(4) * std::numeric_limits<Real>::epsilon()) break;
    }
    // Recompute the derivative at the converged root for the weight.
    Real p1 = 1, p2 = 0;
    for (int j = 1; j <= n; ++j) {
      const Real p3 = p2;
      p2 = p1;
      p1 = ((Real(2 * j - 1)) * z * p2 - Real(j - 1) * p3) / Real(j);
    }
    dp = Real(n) * (z * p1 - p2) / (z * z - Real(1));
    const Real weight = Real(2) / ((Real(1) - z * z) * dp * dp);
    const auto lo = static_cast<std::size_t>(i);
    const auto hi = static_cast<std::size_t>(n - 1 - i);
    x[lo] = -z;
    x[hi] = z;
    w[lo] = weight;
    w[hi] = weight;
  }
  if (n % 2 == 1) x[static_cast<std::size_t>(n / 2)] = 0;
  return {std::move(x), std::move(w)};
}

/// A fixed set of nodes and weights; integrates by plain weighted summation.
template <class Real = double>
struct QuadratureRule {
  std::vector<Real> nodes;
  std::vector<Real> weights;

  std::size_t size() const { return nodes.size(); }

  template <class F>
  Real integrate(F&& f) const {
    Real sum = 0;
    for (std::size_t k = 0; k < nodes.size(); ++k) sum += weights[k] * f(nodes[k]);
    return sum;
  }
};

/// Composite rule: an n-point Gauss-Legendre rule on every [edges[k], edges[k+1]].
template <class Real = double>
QuadratureRule<Real> composite_rule(const std::vector<Real>& edges, int nodes_per_panel) {
  if (edges.size() < 2) throw std::invalid_argument("composite_rule: need at least one panel");
  const auto [x, w] = gauss_legendre<Real>(nodes_per_panel);
  QuadratureRule<Real> rule;
  rule.nodes.reserve((edges.size() - 1) * x.size());
  rule.weights.reserve(rule.nodes.capacity());
  for (std::size_t k = 0; k + 1 < edges.size(); ++k) {
    const Real a = edges[k], b = edges[k + 1];
    if (!(b > a)) throw std::invalid_argument("composite_rule: panel edges must increase");
    const Real mid = (a + b) / 2, half = (b - a) / 2;
    for (std::size_t i = 0; i < x.size(); ++i) {
      rule.nodes.push_back(mid + half * x[i]);
      rule.weights.push_back(half * w[i]);
    }
  }
  return rule;
}

/// Layout of the rule used for spectral densities on [floor, 1].
struct QuadratureConfig {
  double floor = 1e-14;      ///< lower end of the support
  double split = 1e-3;       ///< boundary between the graded and the body region
  int floor_panels = 60;     ///< geometric panels on [floor, split]
  int body_panels = 96;      ///< cosine-graded panels on [split, 1]
  int nodes_per_panel = 24;
};

/// Panels with edges floor * r^k up to `split` (a log-scale grid that keeps
/// log(lambda) and lambda^(gamma - 1) tame), then panels uniform in theta
/// with lambda = (1 - cos theta) / 2 up to 1, which refines toward lambda = 1
/// the way the polynomial basis oscillates.
template <class Real = double>
QuadratureRule<Real> spectral_rule(const QuadratureConfig& cfg) {
  if (!(cfg.floor > 0.0 && cfg.floor < cfg.split && cfg.split < 1.0)) {
    throw std::invalid_argument("spectral_rule: need 0 < floor < split < 1");
  }
  if (cfg.floor_panels < 1 || cfg.body_panels < 1 || cfg.nodes_per_panel < 2) {
    throw std::invalid_argument("spectral_rule: panel and node counts too small");
  }
  std::vector<Real> edges;
  const Real lo = Real(cfg.floor), split = Real(cfg.split);
  const Real ratio = std::log(split / lo) / Real(cfg.floor_panels);
  for (int k = 0; k < cfg.floor_panels; ++k) edges.push_back(lo * std::exp(ratio * Real(k)));
  const Real theta0 = std::acos(Real(1) - Real(2) * split);
  const Real pi = std::numbers::pi_v<Real>;
  for (int k = 0; k <= cfg.body_panels; ++k) {
    const Real theta = theta0 + (pi - theta0) * Real(k) / Real(cfg.body_panels);
    edges.push_back(k == 0 ? split : (k == cfg.body_panels ? Real(1) : (Real(1) - std::cos(theta)) / 2));
  }
  return composite_rule<Real>(edges, cfg.nodes_per_panel);
}

}  // namespace vbald
