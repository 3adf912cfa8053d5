#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include <Eigen/Dense>
#include <Eigen/QR>

#include "vbald/linop.hpp"

namespace vbald::test {

inline DenseMatrix random_orthogonal(Index n, std::mt19937_64& gen) {
  std::normal_distribution<double> normal;
  DenseMatrix a(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) a(i, j) = normal(gen);
  }
  Eigen::HouseholderQR<DenseMatrix> qr(a);
  return qr.householderQ();
}

/// Q diag(eigs) Q' for a random orthogonal Q, symmetrized exactly.
inline DenseMatrix spd_with_spectrum(const Vector& eigs, std::mt19937_64& gen) {
  const DenseMatrix q = random_orthogonal(eigs.size(), gen);
  DenseMatrix k = q * eigs.asDiagonal() * q.transpose();
  return (k + k.transpose()) / 2.0;
}

inline DenseMatrix random_symmetric(Index n, std::mt19937_64& gen) {
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  DenseMatrix a(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j <= i; ++j) a(i, j) = a(j, i) = unif(gen);
  }
  return a;
}

/// Eigenvalues log-uniform in [lo, hi].
inline Vector log_uniform_spectrum(Index n, double lo, double hi, std::mt19937_64& gen) {
  std::uniform_real_distribution<double> unif(std::log(lo), std::log(hi));
  Vector e(n);
  for (Index i = 0; i < n; ++i) e[i] = std::exp(unif(gen));
  return e;
}

/// Digamma by upward recurrence to x >= 10, then the asymptotic series.
inline double digamma(double x) {
  double shift = 0.0;
  while (x < 10.0) {
    shift -= 1.0 / x;
    x += 1.0;
  }
  const double inv = 1.0 / x, inv2 = inv * inv;
  const double series =
      inv2 * (1.0 / 12 - inv2 * (1.0 / 120 - inv2 * (1.0 / 252 - inv2 * (1.0 / 240 - inv2 / 132))));
  return shift + std::log(x) - 0.5 * inv - series;
}

/// Adaptive Simpson on [a, b] to absolute tolerance `tol`.
template <class F>
double adaptive_simpson(F&& f, double a, double b, double tol, int depth = 50) {
  struct Rec {
    static double run(F& f, double a, double b, double fa, double fm, double fb, double whole, double tol,
                      int depth) {
      const double m = (a + b) / 2, lm = (a + m) / 2, rm = (m + b) / 2;
      const double flm = f(lm), frm = f(rm);
      const double left = (m - a) / 6 * (fa + 4 * flm + fm);
      const double right = (b - m) / 6 * (fm + 4 * frm + fb);
      if (depth <= 0 || std::abs(left + right - whole) <= 15 * tol) {
        return left + right + (left + right - whole) / 15;
      }
      return run(f, a, m, fa, flm, fm, left, tol / 2, depth - 1) +
             run(f, m, b, fm, frm, fb, right, tol / 2, depth - 1);
    }
  };
  const double fa = f(a), fb = f(b), fm = f((a + b) / 2);
  return Rec::run(f, a, b, fa, fm, fb, (b - a) / 6 * (fa + 4 * fm + fb), tol, depth);
}

/// int_0^1 g(l) dl through the substitution l = exp(-t), t in [0, T], which
/// removes algebraic and logarithmic singularities at 0. The tail beyond T
/// is dropped.
template <class G>
double integrate_unit_interval(G&& g, double tol = 1e-11, double t_max = 60.0) {
  auto h = [&](double t) {
    const double l = std::exp(-t);
    return g(l) * l;
  };
  double sum = 0.0;
  // Split so that each adaptive run sees a smooth piece.
  const double edges[] = {0.0, 0.5, 2.0, 6.0, 15.0, 30.0, t_max};
  for (int k = 0; k + 1 < 7; ++k) sum += adaptive_simpson(h, edges[k], edges[k + 1], tol);
  return sum;
}

}  // namespace vbald::test
