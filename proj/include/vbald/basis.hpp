#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "vbald/linop.hpp"

namespace vbald {

/// Polynomial families on [0, 1]. The orthogonal ones are the classical
/// [-1, 1] families composed with x = 2*lambda - 1.
enum class BasisKind { Power, ChebyshevShifted, LegendreShifted };

struct MomentBasis {
  BasisKind kind = BasisKind::ChebyshevShifted;
  int order = 30;  ///< highest degree m; the basis has m + 1 members

  friend bool operator==(const MomentBasis&, const MomentBasis&) = default;
};

inline std::string_view to_string(BasisKind kind) {
  switch (kind) {
    case BasisKind::Power: return "power";
    case BasisKind::ChebyshevShifted: return "chebyshev";
    case BasisKind::LegendreShifted: return "legendre";
  }
  return "?";
}

inline std::optional<BasisKind> parse_basis(std::string_view name) {
  if (name == "power") return BasisKind::Power;
  if (name == "chebyshev") return BasisKind::ChebyshevShifted;
  if (name == "legendre") return BasisKind::LegendreShifted;
  return std::nullopt;
}

/// Writes f_0(lambda) .. f_m(lambda) into `out` (size m + 1).
template <class Real>
void evaluate_basis(BasisKind kind, Real lambda, std::span<Real> out) {
  const std::size_t count = out.size();
  if (count == 0) return;
  out[0] = Real(1);
  if (count == 1) return;
  const Real x = Real(2) * lambda - Real(1);
  switch (kind) {
    case BasisKind::Power:
      for (std::size_t i = 1; i < count; ++i) out[i] = out[i - 1] * lambda;
      break;
    case BasisKind::ChebyshevShifted:
      out[1] = x;
      for (std::size_t i = 2; i < count; ++i) out[i] = Real(2) * x * out[i - 1] - out[i - 2];
      break;
    case BasisKind::LegendreShifted:
      out[1] = x;
      for (std::size_t i = 2; i < count; ++i) {
        const Real k = Real(i - 1);
        out[i] = ((Real(2) * k + Real(1)) * x * out[i - 1] - k * out[i - 2]) / (k + Real(1));
      }
      break;
  }
}

/// Row i holds the monomial coefficients of f_i: f_i(l) = sum_k C(i, k) l^k.
/// Lower triangular. Coefficients grow like 4^m, so the matrix is only
/// useful for modest orders (it is exact in double up to m of about 20).
inline DenseMatrix power_coefficients(BasisKind kind, int order) {
  const Index size = order + 1;
  DenseMatrix c = DenseMatrix::Zero(size, size);
  c(0, 0) = 1.0;
  if (order == 0) return c;
  switch (kind) {
    case BasisKind::Power:
      c.setIdentity();
      break;
    case BasisKind::ChebyshevShifted:
      c(1, 0) = -1.0;
      c(1, 1) = 2.0;
      for (Index i = 1; i < order; ++i) {
        // T_{i+1} = (4 l - 2) T_i - T_{i-1}
        for (Index k = 0; k <= i + 1; ++k) {
          const double shifted = (k > 0) ? c(i, k - 1) : 0.0;
          c(i + 1, k) = 4.0 * shifted - 2.0 * c(i, k) - c(i - 1, k);
        }
      }
      break;
    case BasisKind::LegendreShifted:
      c(1, 0) = -1.0;
      c(1, 1) = 2.0;
      for (Index i = 1; i < order; ++i) {
        // (i+1) P_{i+1} = (2i+1)(2l - 1) P_i - i P_{i-1}
        const double a = 2.0 * static_cast<double>(i) + 1.0;
        const double b = static_cast<double>(i);
        for (Index k = 0; k <= i + 1; ++k) {
          const double shifted = (k > 0) ? c(i, k - 1) : 0.0;
          c(i + 1, k) = (a * (2.0 * shifted - c(i, k)) - b * c(i - 1, k)) / (b + 1.0);
        }
      }
      break;
  }
  return c;
}

/// Re-expresses moments in another basis through the exact (triangular)
/// change of basis.
inline Vector convert_moments(const Vector& values, BasisKind from, BasisKind to) {
  if (from == to) return values;
  const int order = static_cast<int>(values.size()) - 1;
  const DenseMatrix c_from = power_coefficients(from, order);
  const DenseMatrix c_to = power_coefficients(to, order);
  const Vector power = c_from.triangularView<Eigen::Lower>().solve(values);
  return c_to * power;
}

}  // namespace vbald
