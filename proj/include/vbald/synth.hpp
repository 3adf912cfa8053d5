#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>

#include "vbald/linop.hpp"
#include "vbald/rng.hpp"

namespace vbald {

struct KernelSpec {
  Index n = 1000;
  int dim = 6;
  double lengthscale = 0.5;
  double noise = 1e-8;  ///< added to the diagonal
  std::uint64_t seed = 0;
  double input_scale = 1.0;  ///< standard deviation of every input coordinate
};

inline void validate(const KernelSpec& s) {
  if (s.n < 1) throw std::invalid_argument("KernelSpec: n must be >= 1");
  if (s.dim < 1) throw std::invalid_argument("KernelSpec: dim must be >= 1");
  if (!(s.lengthscale > 0.0) || !std::isfinite(s.lengthscale)) {
    throw std::invalid_argument("KernelSpec: lengthscale must be positive");
  }
  if (!(s.noise >= 0.0) || !std::isfinite(s.noise)) throw std::invalid_argument("KernelSpec: noise must be >= 0");
  if (!(s.input_scale > 0.0) || !std::isfinite(s.input_scale)) {
    throw std::invalid_argument("KernelSpec: input_scale must be positive");
  }
}

/// n x dim matrix of i.i.d. N(0, input_scale^2) inputs, one row per point.
inline DenseMatrix kernel_inputs(const KernelSpec& spec) {
  validate(spec);
  std::mt19937_64 gen(splitmix64(spec.seed));
  std::normal_distribution<double> normal(0.0, spec.input_scale);
  DenseMatrix x(spec.n, spec.dim);
  for (Index i = 0; i < spec.n; ++i) {
    for (int k = 0; k < spec.dim; ++k) x(i, k) = normal(gen);
  }
  return x;
}

/// K_ij = exp(-|x_i - x_j|^2 / (2 l^2)) + noise * [i == j] on the rows of
/// `points`. Squared distances use |x|^2 + |y|^2 - 2 x.y clamped at 0; the
/// diagonal is set to exactly 1 + noise and the result is exactly symmetric.
inline LinearOperator se_kernel_from_points(const DenseMatrix& points, double lengthscale, double noise) {
  if (points.rows() < 1 || points.cols() < 1) throw DimensionError("se_kernel: empty point set");
  const Index n = points.rows();
  const Vector sq = points.rowwise().squaredNorm();
  const DenseMatrix gram = points * points.transpose();
  const double scale = -1.0 / (2.0 * lengthscale * lengthscale);
  DenseMatrix k(n, n);
  for (Index j = 0; j < n; ++j) {
    k(j, j) = 1.0 + noise;
    for (Index i = j + 1; i < n; ++i) {
      const double d2 = std::max(0.0, sq[i] + sq[j] - 2.0 * gram(i, j));
      const double v = std::exp(scale * d2);
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  return LinearOperator::from_dense(std::move(k));
}

/// Squared-exponential kernel matrix on Gaussian inputs drawn from spec.seed.
inline LinearOperator se_kernel(const KernelSpec& spec) {
  return se_kernel_from_points(kernel_inputs(spec), spec.lengthscale, spec.noise);
}

}  // namespace vbald
