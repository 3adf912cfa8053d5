#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>

#include "vbald/basis.hpp"
#include "vbald/linop.hpp"
#include "vbald/rng.hpp"

namespace vbald {

/// Estimated normalized moments mu_i = tr f_i(B) / n.
struct SpectralMoments {
  MomentBasis basis;
  Vector values;    ///< mu_0 .. mu_m
  Vector variance;  ///< per-moment sample variance of the single-probe estimates
  int probes = 0;
  std::uint64_t seed = 0;
  std::uint64_t probe_checksum = 0;  ///< ProbeFingerprint of the probes consumed
};

/// y = scale * (A x) + shift * x. Lets the polynomial baselines reuse the
/// moment machinery on I - B or on a rescaled B without copying the matrix.
template <SymmetricOperator Op>
class AffineOperator {
 public:
  AffineOperator(const Op& inner, double scale, double shift)
      : inner_(&inner), scale_(scale), shift_(shift) {}

  Index dim() const { return inner_->dim(); }

  void apply(const Vector& x, Vector& y) const {
    inner_->apply(x, y);
    y = scale_ * y + shift_ * x;
  }

 private:
  const Op* inner_;
  double scale_;
  double shift_;
};

/// Hutchinson estimate of tr f_i(B) / n for i = 0..m with `probes`
/// Rademacher vectors drawn from stream `seed`.
///
/// Each probe runs the basis three-term recurrence on vectors, so it costs
/// exactly m products with B. Per-probe results are reduced in probe order,
/// which keeps the output bit-identical for a fixed (B, basis, probes, seed).
template <SymmetricOperator Op>
SpectralMoments estimate_moments(const Op& b, MomentBasis basis, int probes, std::uint64_t seed) {
  if (basis.order < 1) throw std::invalid_argument("estimate_moments: order must be >= 1");
  if (probes < 1) throw std::invalid_argument("estimate_moments: need at least one probe");
  const Index n = b.dim();
  const int m = basis.order;
  const double inv_n = 1.0 / static_cast<double>(n);

  Vector mean = Vector::Zero(m + 1);
  Vector m2 = Vector::Zero(m + 1);
  Vector sample(m + 1);
  Vector prev(n), cur(n), next(n), bw(n);
  ProbeFingerprint fingerprint;

  for (int j = 0; j < probes; ++j) {
    const Vector z = rademacher_probe(n, seed, static_cast<std::uint64_t>(j));
    fingerprint.add(z);
    sample[0] = z.squaredNorm() * inv_n;
    prev = z;
    b.apply(z, bw);
    cur = (basis.kind == BasisKind::Power) ? bw : Vector(2.0 * bw - z);
    sample[1] = z.dot(cur) * inv_n;
    for (int i = 2; i <= m; ++i) {
      b.apply(cur, bw);
      switch (basis.kind) {
        case BasisKind::Power:
          next = bw;
          break;
        case BasisKind::ChebyshevShifted:
          next = 2.0 * (2.0 * bw - cur) - prev;
          break;
        case BasisKind::LegendreShifted: {
          const double k = static_cast<double>(i - 1);
          next = ((2.0 * k + 1.0) * (2.0 * bw - cur) - k * prev) / (k + 1.0);
          break;
        }
      }
      sample[i] = z.dot(next) * inv_n;
      prev.swap(cur);
      cur.swap(next);
    }
    if (!sample.allFinite()) {
      throw NumericalError("estimate_moments: non-finite moment (operator not normalized?)");
    }
    // Welford, in probe order.
    const double count = static_cast<double>(j + 1);
    for (int i = 0; i <= m; ++i) {
      const double delta = sample[i] - mean[i];
      mean[i] += delta / count;
      m2[i] += delta * (sample[i] - mean[i]);
    }
  }

  SpectralMoments out;
  out.basis = basis;
  out.values = mean;
  // f_0 = 1 and z'z = n for Rademacher probes, so this is already 1 up to
  // rounding of the running mean; pin it.
  out.values[0] = 1.0;
  out.variance = (probes > 1) ? Vector(m2 / static_cast<double>(probes - 1))
                              : Vector(Vector::Zero(m + 1));
  out.probes = probes;
  out.seed = seed;
  out.probe_checksum = fingerprint.value;
  return out;
}

/// Number of Hutchinson probes sufficient for relative error epsilon with
/// probability 1 - eta: ceil(6 eps^-2 log(2 / eta)).
inline long long hutchinson_sample_bound(double epsilon, double eta) {
  if (!(epsilon > 0.0 && epsilon <= 1.0)) {
    throw std::invalid_argument("hutchinson_sample_bound: epsilon must lie in (0, 1]");
  }
  if (!(eta > 0.0 && eta < 1.0)) {
    throw std::invalid_argument("hutchinson_sample_bound: eta must lie in (0, 1)");
  }
  const double raw = 6.0 / (epsilon * epsilon) * std::log(2.0 / eta);
  // Absorb the last-ulp error of log so that exact integers stay exact.
  const double slack = 8.0 * std::numeric_limits<double>::epsilon() * raw;
  return static_cast<long long>(std::ceil(raw - slack));
}

}  // namespace vbald
