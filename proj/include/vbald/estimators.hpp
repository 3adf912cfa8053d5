#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>

#include "vbald/basis.hpp"
#include "vbald/errors.hpp"
#include "vbald/linop.hpp"
#include "vbald/maxent.hpp"
#include "vbald/probes.hpp"
#include "vbald/rng.hpp"

namespace vbald {

enum class Method { Vbald, Taylor, Chebyshev, Lanczos, Exact };

inline std::string_view to_string(Method m) {
  switch (m) {
    case Method::Vbald: return "vbald";
    case Method::Taylor: return "taylor";
    case Method::Chebyshev: return "chebyshev";
    case Method::Lanczos: return "lanczos";
    case Method::Exact: return "exact";
  }
  return "?";
}

inline std::optional<Method> parse_method(std::string_view name) {
  if (name == "vbald") return Method::Vbald;
  if (name == "taylor") return Method::Taylor;
  if (name == "chebyshev") return Method::Chebyshev;
  if (name == "lanczos") return Method::Lanczos;
  if (name == "exact") return Method::Exact;
  return std::nullopt;
}

enum class PriorChoice { Uniform, Beta, Auto };

inline std::string_view to_string(PriorChoice p) {
  switch (p) {
    case PriorChoice::Uniform: return "uniform";
    case PriorChoice::Beta: return "beta";
    case PriorChoice::Auto: return "auto";
  }
  return "?";
}

inline std::optional<PriorChoice> parse_prior(std::string_view name) {
  if (name == "uniform") return PriorChoice::Uniform;
  if (name == "beta") return PriorChoice::Beta;
  if (name == "auto") return PriorChoice::Auto;
  return std::nullopt;
}

struct EstimatorConfig {
  int m = 30;  ///< moments (VBALD, Taylor), degree (Chebyshev) or steps (Lanczos)
  int d = 50;  ///< Hutchinson probes
  std::uint64_t seed = 0;
  BasisKind basis = BasisKind::ChebyshevShifted;
  PriorChoice prior = PriorChoice::Auto;
  SolverConfig solver;
  double chebyshev_floor = 1e-6;  ///< lower end a of the interpolation interval, in units of lambda_u
  Index exact_guard = 20000;      ///< logdet_exact refuses larger n
  bool extended_precision = false;  ///< run the dual solve in long double
};

struct EstimateDiagnostics {
  int solver_iterations = 0;
  double gradient_norm = 0.0;
  double objective = 0.0;
  double wall_ms = 0.0;
  bool converged = true;
  std::string stop_reason;  ///< solver stop reason, empty for closed-form methods
  std::string prior;        ///< prior actually used by VBALD
  double mass_below_floor = 0.0;
  bool floor_warning = false;
  std::uint64_t probe_checksum = 0;  ///< fingerprint of the probes consumed; 0 for exact
};

struct LogDetEstimate {
  double value = 0.0;
  Method method = Method::Vbald;
  double lambda_u = 1.0;
  int m = 0;
  int d = 0;
  std::uint64_t seed = 0;
  EstimateDiagnostics diagnostics;
};

namespace detail {

inline double elapsed_ms(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
}

inline void validate(const EstimatorConfig& cfg) {
  if (cfg.m < 1) throw std::invalid_argument("estimator: m must be >= 1");
  if (cfg.d < 1) throw std::invalid_argument("estimator: d must be >= 1");
}

inline LogDetEstimate make_estimate(Method method, double lambda_u, const EstimatorConfig& cfg) {
  LogDetEstimate est;
  est.method = method;
  est.lambda_u = lambda_u;
  est.m = cfg.m;
  est.d = cfg.d;
  est.seed = cfg.seed;
  return est;
}

}  // namespace detail

/// 2 sum log L_ii from a Cholesky factorization. Dense storage uses a dense
/// factorization; sparse storage a simplicial one.
inline double logdet_exact(const LinearOperator& op, Index guard = 20000) {
  if (op.dim() > guard) {
    throw std::invalid_argument("logdet_exact: n = " + std::to_string(op.dim()) +
                                " exceeds the exact-oracle guard " + std::to_string(guard));
  }
  double sum = 0.0;
  if (op.is_sparse()) {
    Eigen::SimplicialLLT<SparseMatrix, Eigen::Lower> llt(*op.sparse_lower());
    if (llt.info() != Eigen::Success) throw NotPositiveDefinite();
    const SparseMatrix factor = llt.matrixL();
    const Vector diag = factor.diagonal();
    for (Index i = 0; i < diag.size(); ++i) {
      if (!(diag[i] > 0.0)) throw NotPositiveDefinite();
      sum += std::log(diag[i]);
    }
  } else {
    Eigen::LLT<DenseMatrix> llt(*op.dense());
    if (llt.info() != Eigen::Success) throw NotPositiveDefinite();
    const auto& l = llt.matrixLLT();
    for (Index i = 0; i < l.rows(); ++i) sum += std::log(l(i, i));
  }
  if (!std::isfinite(sum)) throw NotPositiveDefinite();
  return 2.0 * sum;
}

/// Prior selection for VBALD from the first two moments.
inline PriorSpec choose_prior(const SpectralMoments& moments, PriorChoice choice, double delta) {
  if (choice == PriorChoice::Uniform) return UniformPrior{delta};
  const Vector head = moments.values.head(3);
  const Vector power = convert_moments(head, moments.basis.kind, BasisKind::Power);
  try {
    return fit_beta_prior(power[1], power[2]);
  } catch (const DegenerateMoments&) {
    if (choice == PriorChoice::Beta) throw;
    return UniformPrior{delta};
  }
}

/// n * E_q[log lambda] + n log lambda_u with q the maximum relative entropy
/// density matching m stochastic moments of B = K / lambda_u.
///
/// A solve that stops short of gtol still returns its estimate, with
/// diagnostics.converged == false.
inline LogDetEstimate logdet_vbald(const LinearOperator& op, const EstimatorConfig& cfg) {
  detail::validate(cfg);
  const auto start = std::chrono::steady_clock::now();
  const double lambda_u = gershgorin_upper_bound(op);
  const NormalizedOperator<LinearOperator> b(op, lambda_u);
  const MomentBasis basis{cfg.basis, cfg.m};
  const SpectralMoments moments = estimate_moments(b, basis, cfg.d, cfg.seed);
  const PriorSpec prior = choose_prior(moments, cfg.prior, cfg.solver.quadrature.floor);

  const SolveResult fit = cfg.extended_precision ? solve<long double>(moments, prior, cfg.solver)
                                                 : solve<double>(moments, prior, cfg.solver);
  const LogExpectation log_mean = integrate_log_expectation(fit.density);
  const double n = static_cast<double>(op.dim());

  LogDetEstimate est = detail::make_estimate(Method::Vbald, lambda_u, cfg);
  est.value = n * log_mean.value + n * std::log(lambda_u);
  auto& diag = est.diagnostics;
  diag.solver_iterations = fit.diagnostics.iterations;
  diag.gradient_norm = fit.diagnostics.gradient_norm;
  diag.objective = fit.diagnostics.objective;
  diag.converged = fit.diagnostics.converged;
  diag.stop_reason = std::string(to_string(fit.diagnostics.stop));
  diag.prior = std::holds_alternative<BetaPrior>(prior) ? "beta" : "uniform";
  diag.mass_below_floor = log_mean.mass_below_floor;
  diag.floor_warning = log_mean.floor_warning;
  diag.probe_checksum = moments.probe_checksum;
  diag.wall_ms = detail::elapsed_ms(start);
  return est;
}

/// n log lambda_u - n sum_{i=1..m} E[(1 - lambda)^i] / i, with the moments
/// of I - B estimated stochastically. Truncating the series drops only
/// negative terms, so the exact-moment estimate never falls below log det K.
inline LogDetEstimate logdet_taylor(const LinearOperator& op, const EstimatorConfig& cfg) {
  detail::validate(cfg);
  const auto start = std::chrono::steady_clock::now();
  const double lambda_u = gershgorin_upper_bound(op);
  const NormalizedOperator<LinearOperator> b(op, lambda_u);
  const AffineOperator<NormalizedOperator<LinearOperator>> complement(b, -1.0, 1.0);
  const SpectralMoments moments = estimate_moments(complement, MomentBasis{BasisKind::Power, cfg.m}, cfg.d, cfg.seed);
  double series = 0.0;
  for (int i = 1; i <= cfg.m; ++i) series += moments.values[i] / static_cast<double>(i);
  const double n = static_cast<double>(op.dim());

  LogDetEstimate est = detail::make_estimate(Method::Taylor, lambda_u, cfg);
  est.value = n * std::log(lambda_u) - n * series;
  est.diagnostics.probe_checksum = moments.probe_checksum;
  est.diagnostics.wall_ms = detail::elapsed_ms(start);
  return est;
}

/// Coefficients c_0..c_m of the degree-m interpolant of
/// g(x) = log(a + (1 - a)(x + 1) / 2) at the Chebyshev extrema
/// x_k = cos(pi k / m), so that g(x) ~ sum c_i T_i(x) on [-1, 1].
/// x = 1 is a node, so the interpolant reproduces log 1 = 0 there.
inline Vector chebyshev_log_coefficients(int m, double a) {
  if (m < 1) throw std::invalid_argument("chebyshev_log_coefficients: m must be >= 1");
  if (!(a > 0.0 && a < 1.0)) throw std::invalid_argument("chebyshev_log_coefficients: need 0 < a < 1");
  std::vector<double> g(static_cast<std::size_t>(m + 1));
  for (int k = 0; k <= m; ++k) {
    const double x = std::cos(std::numbers::pi * k / m);
    g[static_cast<std::size_t>(k)] = std::log(a + (1.0 - a) * (x + 1.0) / 2.0);
  }
  Vector c(m + 1);
  for (int i = 0; i <= m; ++i) {
    double sum = 0.0;
    for (int k = 0; k <= m; ++k) {
      const double w = (k == 0 || k == m) ? 0.5 : 1.0;
      sum += w * g[static_cast<std::size_t>(k)] * std::cos(std::numbers::pi * i * k / m);
    }
    c[i] = 2.0 * sum / m;
  }
  c[0] *= 0.5;
  c[m] *= 0.5;
  return c;
}

/// n sum c_i tr T_i(C) / n + n log lambda_u, with C = (B - aI) / (1 - a)
/// mapping [a, 1] onto [0, 1] and the T_i traces estimated stochastically
/// in the shifted Chebyshev basis.
inline LogDetEstimate logdet_chebyshev(const LinearOperator& op, const EstimatorConfig& cfg) {
  detail::validate(cfg);
  const auto start = std::chrono::steady_clock::now();
  const double a = cfg.chebyshev_floor;
  const Vector c = chebyshev_log_coefficients(cfg.m, a);
  const double lambda_u = gershgorin_upper_bound(op);
  const NormalizedOperator<LinearOperator> b(op, lambda_u);
  const AffineOperator<NormalizedOperator<LinearOperator>> mapped(b, 1.0 / (1.0 - a), -a / (1.0 - a));
  const SpectralMoments moments =
      estimate_moments(mapped, MomentBasis{BasisKind::ChebyshevShifted, cfg.m}, cfg.d, cfg.seed);
  const double n = static_cast<double>(op.dim());

  LogDetEstimate est = detail::make_estimate(Method::Chebyshev, lambda_u, cfg);
  est.value = n * c.dot(moments.values) + n * std::log(lambda_u);
  est.diagnostics.probe_checksum = moments.probe_checksum;
  est.diagnostics.wall_ms = detail::elapsed_ms(start);
  return est;
}

/// Gauss quadrature estimate of z' log(B) z from an m-step Lanczos run with
/// full reorthogonalization. Stops early on breakdown (beta < 1e-12), which
/// means an invariant subspace was found and the rule is exact.
template <SymmetricOperator Op>
double lanczos_log_quadratic_form(const Op& b, const Vector& z, int steps) {
  const Index n = b.dim();
  const double znorm2 = z.squaredNorm();
  const int max_steps = static_cast<int>(std::min<Index>(steps, n));
  DenseMatrix v(n, max_steps);
  std::vector<double> alpha, beta;
  v.col(0) = z / std::sqrt(znorm2);
  Vector w(n);
  int k = 0;
  for (; k < max_steps; ++k) {
    b.apply(v.col(k), w);
    const double a = v.col(k).dot(w);
    alpha.push_back(a);
    // Two passes of classical Gram-Schmidt against the whole basis.
    for (int pass = 0; pass < 2; ++pass) {
      w -= v.leftCols(k + 1) * (v.leftCols(k + 1).transpose() * w);
    }
    if (k + 1 == max_steps) break;
    const double bnorm = w.norm();
    if (bnorm < 1e-12) break;
    beta.push_back(bnorm);
    v.col(k + 1) = w / bnorm;
  }
  const int size = static_cast<int>(alpha.size());
  Vector diag = Eigen::Map<const Vector>(alpha.data(), size);
  Vector sub = (size > 1) ? Vector(Eigen::Map<const Vector>(beta.data(), size - 1)) : Vector(0);
  Eigen::SelfAdjointEigenSolver<DenseMatrix> eig;
  eig.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
  if (eig.info() != Eigen::Success) throw NumericalError("lanczos: tridiagonal eigensolver failed");
  double sum = 0.0;
  for (int j = 0; j < size; ++j) {
    const double theta = eig.eigenvalues()[j];
    if (!(theta > 0.0)) throw NotPositiveDefinite("lanczos: non-positive Ritz value (matrix not positive definite)");
    const double tau = eig.eigenvectors()(0, j);
    sum += tau * tau * std::log(theta);
  }
  return znorm2 * sum;
}

/// Stochastic Lanczos quadrature: mean over probes of z' log(B) z, plus
/// n log lambda_u.
inline LogDetEstimate logdet_lanczos(const LinearOperator& op, const EstimatorConfig& cfg) {
  detail::validate(cfg);
  const auto start = std::chrono::steady_clock::now();
  const double lambda_u = gershgorin_upper_bound(op);
  const NormalizedOperator<LinearOperator> b(op, lambda_u);
  const Index n = op.dim();
  double mean = 0.0;
  ProbeFingerprint fingerprint;
  for (int j = 0; j < cfg.d; ++j) {
    const Vector z = rademacher_probe(n, cfg.seed, static_cast<std::uint64_t>(j));
    fingerprint.add(z);
    mean += (lanczos_log_quadratic_form(b, z, cfg.m) - mean) / static_cast<double>(j + 1);
  }
  if (!std::isfinite(mean)) throw NumericalError("lanczos: non-finite quadrature value");

  LogDetEstimate est = detail::make_estimate(Method::Lanczos, lambda_u, cfg);
  est.value = mean + static_cast<double>(n) * std::log(lambda_u);
  est.diagnostics.probe_checksum = fingerprint.value;
  est.diagnostics.wall_ms = detail::elapsed_ms(start);
  return est;
}

struct ConditionEstimate {
  double value = 1.0;       ///< lambda_max / lambda_min
  double lambda_max = 0.0;
  double lambda_min = 0.0;
  bool converged = false;   ///< both power iterations met their tolerance
  bool resolution_limited = false;  ///< lambda_min below what lambda_u - mu can resolve; value is a lower bound
};

/// lambda_max by power iteration on K; lambda_min from power iteration on
/// lambda_u I - K, whose dominant eigenvalue is lambda_u - lambda_min.
inline ConditionEstimate condition_number_estimate(const LinearOperator& op, int iterations = 500,
                                                   std::uint64_t seed = 0x5EED) {
  if (iterations < 1) throw std::invalid_argument("condition_number_estimate: iterations must be >= 1");
  const Index n = op.dim();
  const double lambda_u = gershgorin_upper_bound(op);
  constexpr double tol = 1e-10;

  auto dominant = [&](auto&& apply, bool& ok) {
    Vector x = rademacher_probe(n, seed, 0);
    x.normalize();
    Vector y(n);
    double rayleigh = 0.0;
    ok = false;
    for (int it = 0; it < iterations; ++it) {
      apply(x, y);
      const double next = x.dot(y);
      const double norm = y.norm();
      if (norm == 0.0) {
        rayleigh = 0.0;
        ok = true;
        break;
      }
      x = y / norm;
      if (it > 0 && std::abs(next - rayleigh) <= tol * std::abs(next)) {
        rayleigh = next;
        ok = true;
        break;
      }
      rayleigh = next;
    }
    return rayleigh;
  };

  ConditionEstimate out;
  bool ok_max = false, ok_min = false;
  out.lambda_max = dominant([&](const Vector& x, Vector& y) { op.apply(x, y); }, ok_max);
  const double shifted = dominant(
      [&](const Vector& x, Vector& y) {
        op.apply(x, y);
        y = lambda_u * x - y;
      },
      ok_min);
  out.converged = ok_max && ok_min;
  // The shifted iteration pins lambda_u - lambda_min only to its stopping tolerance.
  const double resolution = std::max(64.0 * std::numeric_limits<double>::epsilon(), tol) * lambda_u;
  out.lambda_min = lambda_u - shifted;
  if (!(out.lambda_min > resolution)) {
    out.lambda_min = resolution;
    out.resolution_limited = true;
  }
  out.value = std::max(1.0, out.lambda_max / out.lambda_min);
  return out;
}

/// Runs `method` on `op`. Exact uses cfg.exact_guard.
inline LogDetEstimate estimate_logdet(Method method, const LinearOperator& op, const EstimatorConfig& cfg) {
  switch (method) {
    case Method::Vbald: return logdet_vbald(op, cfg);
    case Method::Taylor: return logdet_taylor(op, cfg);
    case Method::Chebyshev: return logdet_chebyshev(op, cfg);
    case Method::Lanczos: return logdet_lanczos(op, cfg);
    case Method::Exact: {
      const auto start = std::chrono::steady_clock::now();
      LogDetEstimate est = detail::make_estimate(Method::Exact, 1.0, cfg);
      est.value = logdet_exact(op, cfg.exact_guard);
      est.m = 0;
      est.d = 0;
      est.diagnostics.wall_ms = detail::elapsed_ms(start);
      return est;
    }
  }
  throw std::invalid_argument("estimate_logdet: unknown method");
}

}  // namespace vbald
