#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include "vbald/basis.hpp"
#include "vbald/errors.hpp"
#include "vbald/linop.hpp"
#include "vbald/probes.hpp"
#include "vbald/quadrature.hpp"

namespace vbald {

/// Flat prior on [delta, 1]. delta > 0 keeps mass away from lambda = 0,
/// where log lambda diverges.
struct UniformPrior {
  double delta = 1e-14;
};

/// Beta(gamma, beta) prior over the normalized spectrum.
struct BetaPrior {
  double gamma = 1.0;
  double beta = 1.0;
};

using PriorSpec = std::variant<UniformPrior, BetaPrior>;

/// Moment-matched Beta parameters from raw power moments mu1 = E[l],
/// mu2 = E[l^2]:
///   gamma = mu1 (mu1 - mu2) / (mu2 - mu1^2),  beta = (1/mu1 - 1) gamma.
/// Throws DegenerateMoments when the implied variance is not positive; the
/// caller is expected to fall back to a UniformPrior.
inline BetaPrior fit_beta_prior(double mu1, double mu2) {
  if (!(mu1 > 0.0 && mu1 < 1.0) || !std::isfinite(mu2)) {
    throw DegenerateMoments("fit_beta_prior: mean must lie in (0, 1); use a uniform prior");
  }
  const double variance = mu2 - mu1 * mu1;
  if (!(variance > 0.0)) {
    throw DegenerateMoments(
        "fit_beta_prior: mu2 <= mu1^2 (zero-variance spectrum); use a uniform prior");
  }
  if (!(mu2 < mu1)) {
    throw DegenerateMoments("fit_beta_prior: mu2 >= mu1 is not a [0, 1] spectrum; use a uniform prior");
  }
  const double gamma = mu1 * (mu1 - mu2) / variance;
  const double beta = (1.0 / mu1 - 1.0) * gamma;
  if (!(gamma > 0.0 && beta > 0.0) || !std::isfinite(gamma) || !std::isfinite(beta)) {
    throw DegenerateMoments("fit_beta_prior: non-positive shape parameters; use a uniform prior");
  }
  return {gamma, beta};
}

/// log q0(lambda); -infinity outside the prior's support.
template <class Real = double>
Real log_prior_density(const PriorSpec& prior, Real lambda) {
  constexpr Real neg_inf = -std::numeric_limits<Real>::infinity();
  if (const auto* u = std::get_if<UniformPrior>(&prior)) {
    if (lambda < Real(u->delta) || lambda > Real(1)) return neg_inf;
    return -std::log1p(-Real(u->delta));
  }
  const auto& b = std::get<BetaPrior>(prior);
  if (!(lambda > Real(0) && lambda < Real(1))) return neg_inf;
  const Real g = Real(b.gamma), be = Real(b.beta);
  return std::lgamma(g + be) - std::lgamma(g) - std::lgamma(be) + (g - Real(1)) * std::log(lambda) +
         (be - Real(1)) * std::log1p(-lambda);
}

/// How the regularized Newton system is solved.
enum class InnerSolver { Cholesky, ConjugateGradient };

struct SolverConfig {
  double gtol = 1e-6;              ///< stop once ||grad||_inf < gtol
  double jitter = 1e-8;            ///< initial diagonal jitter eta
  double max_jitter = 1e-2;        ///< jitter escalates x10 up to this
  int max_iterations = 500;
  InnerSolver inner = InnerSolver::Cholesky;
  double armijo = 1e-4;
  int max_backtracks = 60;
  QuadratureConfig quadrature;
};

enum class StopReason { Converged, IterationCap, Stagnated };

inline std::string_view to_string(StopReason r) {
  switch (r) {
    case StopReason::Converged: return "converged";
    case StopReason::IterationCap: return "iteration-cap";
    case StopReason::Stagnated: return "stagnated";
  }
  return "?";
}

/// The convex dual of the relative-entropy problem
///   S(alpha) = int q0(l) exp(-[1 + sum_i alpha_i f_i(l)]) dl + sum_i alpha_i mu_i
/// discretized on a fixed quadrature rule. Nodes outside the prior's support
/// are dropped at construction.
template <class Real = double>
class DualProblem {
 public:
  using VectorR = Eigen::Matrix<Real, Eigen::Dynamic, 1>;
  using MatrixR = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>;

  struct Evaluation {
    Real objective = 0;
    VectorR gradient;
    MatrixR hessian;  ///< empty unless requested
  };

  DualProblem(const PriorSpec& prior, MomentBasis basis, const Vector& moments,
              const QuadratureRule<Real>& rule)
      : basis_(basis), moments_(moments.template cast<Real>()) {
    if (moments.size() != basis.order + 1) {
      throw DimensionError("DualProblem: moment vector does not match basis order");
    }
    std::vector<Real> nodes, weights, logq0, logw;
    for (std::size_t k = 0; k < rule.size(); ++k) {
      const Real lp = log_prior_density<Real>(prior, rule.nodes[k]);
      if (!std::isfinite(static_cast<double>(lp))) continue;
      nodes.push_back(rule.nodes[k]);
      weights.push_back(rule.weights[k]);
      logq0.push_back(lp);
      logw.push_back(lp + std::log(rule.weights[k]));
    }
    const Index count = static_cast<Index>(nodes.size());
    if (count == 0) throw NumericalError("DualProblem: prior has no support on the quadrature rule");
    nodes_ = Eigen::Map<const VectorR>(nodes.data(), count);
    weights_ = Eigen::Map<const VectorR>(weights.data(), count);
    log_prior_ = Eigen::Map<const VectorR>(logq0.data(), count);
    log_weighted_prior_ = Eigen::Map<const VectorR>(logw.data(), count);
    values_.resize(count, basis.order + 1);
    std::vector<Real> row(static_cast<std::size_t>(basis.order + 1));
    for (Index k = 0; k < count; ++k) {
      evaluate_basis<Real>(basis.kind, nodes_[k], std::span<Real>(row));
      for (int i = 0; i <= basis.order; ++i) values_(k, i) = row[static_cast<std::size_t>(i)];
    }
  }

  int size() const { return basis_.order + 1; }
  const VectorR& nodes() const { return nodes_; }
  const VectorR& weights() const { return weights_; }
  const MatrixR& basis_values() const { return values_; }
  const VectorR& moments() const { return moments_; }

  /// Weighted integrand w_k q(l_k) at every node, or nullopt when an exponent
  /// exceeds `max_exponent` (the caller decides whether that is an error).
  std::optional<VectorR> weighted_density(const VectorR& alpha) const {
    const VectorR tilt = (-(values_ * alpha).array() - Real(1)).matrix();
    // Overflow is judged on the density exponent, without the weight.
    if ((tilt + log_prior_).maxCoeff() > Real(max_exponent)) return std::nullopt;
    // Terms below exp(-700) are flushed to zero; subnormal products would
    // otherwise dominate the run time and never change a sum.
    const auto e = (tilt + log_weighted_prior_).array();
    return VectorR((e < Real(-max_exponent)).select(Real(0), e.exp()).matrix());
  }

  std::optional<Evaluation> try_evaluate(const VectorR& alpha, bool with_hessian) const {
    auto q = weighted_density(alpha);
    if (!q) return std::nullopt;
    Evaluation ev;
    ev.objective = q->sum() + alpha.dot(moments_);
    ev.gradient = moments_ - values_.transpose() * (*q);
    if (with_hessian) {
      ev.hessian = values_.transpose() * q->asDiagonal() * values_;
      // Mirror the lower triangle so the Gram matrix is symmetric bit for bit.
      ev.hessian.template triangularView<Eigen::StrictlyUpper>() = ev.hessian.transpose();
    }
    return ev;
  }

  Evaluation evaluate(const VectorR& alpha, bool with_hessian) const {
    auto ev = try_evaluate(alpha, with_hessian);
    if (!ev) {
      throw QuadratureOverflow(
          "dual objective overflow (exponent > 700): rescale the coefficients or lower the order");
    }
    return std::move(*ev);
  }

  static constexpr double max_exponent = 700.0;

 private:
  MomentBasis basis_;
  VectorR moments_;
  VectorR nodes_;
  VectorR weights_;
  VectorR log_prior_;
  VectorR log_weighted_prior_;
  MatrixR values_;
};

/// q(l) = q0(l) exp(-[1 + sum_i alpha_i f_i(l)]), together with the rule it
/// was fitted on.
struct SurrogateDensity {
  PriorSpec prior;
  MomentBasis basis;
  Vector alpha;
  QuadratureRule<double> rule;

  double density(double lambda) const {
    const double lp = log_prior_density(prior, lambda);
    if (!std::isfinite(lp)) return 0.0;
    std::vector<double> f(static_cast<std::size_t>(basis.order + 1));
    evaluate_basis<double>(basis.kind, lambda, std::span<double>(f));
    double poly = 0.0;
    for (int i = 0; i <= basis.order; ++i) poly += alpha[i] * f[static_cast<std::size_t>(i)];
    return std::exp(lp - 1.0 - poly);
  }

  /// int q(l) g(l) dl over the fitted rule.
  template <class F>
  double integrate(F&& g) const {
    return rule.integrate([&](double l) { return density(l) * g(l); });
  }

  double mass() const {
    return integrate([](double) { return 1.0; });
  }

  /// int q f_j for j = 0..m in the fitted basis.
  Vector moments() const {
    Vector out = Vector::Zero(basis.order + 1);
    std::vector<double> f(static_cast<std::size_t>(basis.order + 1));
    for (std::size_t k = 0; k < rule.size(); ++k) {
      const double wq = rule.weights[k] * density(rule.nodes[k]);
      evaluate_basis<double>(basis.kind, rule.nodes[k], std::span<double>(f));
      for (int i = 0; i <= basis.order; ++i) out[i] += wq * f[static_cast<std::size_t>(i)];
    }
    return out;
  }
};

struct SolverDiagnostics {
  int iterations = 0;
  double gradient_norm = 0.0;  ///< ||grad||_inf at the returned alpha
  double objective = 0.0;
  bool converged = false;
  StopReason stop = StopReason::IterationCap;
  int jitter_escalations = 0;
  double max_jitter_used = 0.0;
  int evaluations = 0;  ///< objective evaluations, including line-search trials
};

struct SolveResult {
  SurrogateDensity density;
  SolverDiagnostics diagnostics;
};

namespace detail {

/// Conjugate gradients on a small dense SPD system. Returns nullopt on
/// non-positive curvature. Stops at relative residual `tol`.
template <class MatrixR, class VectorR>
std::optional<VectorR> conjugate_gradient(const MatrixR& a, const VectorR& b,
                                          typename VectorR::Scalar tol, int max_iter) {
  using Real = typename VectorR::Scalar;
  VectorR x = VectorR::Zero(b.size());
  VectorR r = b;
  VectorR p = r;
  Real rr = r.squaredNorm();
  const Real stop = tol * tol * rr;
  for (int it = 0; it < max_iter && rr > stop; ++it) {
    const VectorR ap = a * p;
    const Real curvature = p.dot(ap);
    if (!(curvature > Real(0))) return std::nullopt;
    const Real step = rr / curvature;
    x += step * p;
    r -= step * ap;
    const Real rr_next = r.squaredNorm();
    p = r + (rr_next / rr) * p;
    rr = rr_next;
  }
  return x;
}

}  // namespace detail

/// Minimizes the dual by damped Newton from alpha = 0.
///
/// Each iteration regularizes the Hessian as (H + H')/2 + eta I, solves for
/// the Newton direction and backtracks (Armijo, halving) on S. eta starts at
/// config.jitter (or 1e-12 when that is 0) and grows x10 while the
/// regularized system is not positive definite; past config.max_jitter the
/// solve throws NotPositiveDefinite.
/// Hitting the iteration cap or a stalled line search returns a result with
/// diagnostics.converged == false.
template <class Real = double>
SolveResult solve(const SpectralMoments& moments, const PriorSpec& prior, const SolverConfig& config) {
  using Problem = DualProblem<Real>;
  using VectorR = typename Problem::VectorR;
  using MatrixR = typename Problem::MatrixR;

  if (!moments.values.allFinite()) throw NumericalError("solve: non-finite moments");
  if (moments.values.size() != moments.basis.order + 1) {
    throw DimensionError("solve: moment vector does not match basis order");
  }
  if (std::abs(moments.values[0] - 1.0) > 1e-12) {
    throw NumericalError("solve: moments must be normalized (mu_0 == 1)");
  }
  if (!(config.gtol > 0.0)) throw std::invalid_argument("solve: gtol must be positive");

  const QuadratureRule<Real> rule = spectral_rule<Real>(config.quadrature);
  const Problem problem(prior, moments.basis, moments.values, rule);
  const int size = problem.size();
  const Real eps = std::numeric_limits<Real>::epsilon();

  VectorR alpha = VectorR::Zero(size);
  auto current = problem.evaluate(alpha, true);
  SolverDiagnostics diag;

  auto inf_norm = [](const VectorR& v) { return static_cast<double>(v.cwiseAbs().maxCoeff()); };

  int it = 0;
  for (; it < config.max_iterations; ++it) {
    const double gnorm = inf_norm(current.gradient);
    if (gnorm < config.gtol) {
      diag.converged = true;
      diag.stop = StopReason::Converged;
      break;
    }

    const MatrixR sym = (current.hessian + current.hessian.transpose()) / Real(2);
    std::optional<VectorR> step;
    double eta = config.jitter;
    for (;;) {
      MatrixR reg = sym;
      reg.diagonal().array() += Real(eta);
      if (config.inner == InnerSolver::Cholesky) {
        Eigen::LLT<MatrixR> llt(reg);
        if (llt.info() == Eigen::Success) step = VectorR(llt.solve(-current.gradient));
      } else {
        const Real tol = Real(std::min(0.5, std::sqrt(gnorm)) * 1e-3);
        step = detail::conjugate_gradient(reg, VectorR(-current.gradient), tol, 20 * size);
      }
      if (step && step->allFinite()) break;
      step.reset();
      eta = (eta > 0.0) ? eta * 10.0 : 1e-12;
      ++diag.jitter_escalations;
      if (eta > config.max_jitter * (1.0 + 1e-12)) {
        throw NotPositiveDefinite("solve: regularized Hessian not positive definite after jitter escalation");
      }
    }
    diag.max_jitter_used = std::max(diag.max_jitter_used, eta);

    const Real slope = current.gradient.dot(*step);
    const Real scale = current.hessian(0, 0) + alpha.cwiseProduct(problem.moments()).cwiseAbs().sum();
    Real t = 1;
    std::optional<typename Problem::Evaluation> trial;
    bool accepted = false;
    for (int bt = 0; bt < config.max_backtracks; ++bt, t /= 2) {
      trial = problem.try_evaluate(alpha + t * (*step), false);
      ++diag.evaluations;
      if (!trial) continue;
      if (trial->objective <= current.objective + Real(config.armijo) * t * slope) {
        accepted = true;
        break;
      }
      // Below rounding level S can no longer rank the points; fall back to
      // the gradient norm.
      const Real change = std::abs(trial->objective - current.objective);
      if (change <= Real(64) * eps * scale && inf_norm(trial->gradient) < gnorm) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      diag.stop = StopReason::Stagnated;
      break;
    }
    alpha += t * (*step);
    current = problem.evaluate(alpha, true);
  }
  if (it == config.max_iterations) diag.stop = StopReason::IterationCap;

  diag.iterations = it;
  diag.gradient_norm = inf_norm(current.gradient);
  diag.objective = static_cast<double>(current.objective);

  SolveResult result;
  result.density.prior = prior;
  result.density.basis = moments.basis;
  result.density.alpha = alpha.template cast<double>();
  result.density.rule = spectral_rule<double>(config.quadrature);
  result.diagnostics = diag;
  return result;
}

/// Dual pieces evaluated at an arbitrary alpha, on the rule `quadrature`
/// describes.
inline double dual_objective(const Vector& alpha, const PriorSpec& prior,
                             const SpectralMoments& moments, const QuadratureConfig& quadrature = {}) {
  const DualProblem<double> p(prior, moments.basis, moments.values, spectral_rule(quadrature));
  if (alpha.size() != p.size()) throw DimensionError("dual_objective: alpha has the wrong length");
  return p.evaluate(alpha, false).objective;
}

inline Vector dual_gradient(const Vector& alpha, const PriorSpec& prior,
                            const SpectralMoments& moments, const QuadratureConfig& quadrature = {}) {
  const DualProblem<double> p(prior, moments.basis, moments.values, spectral_rule(quadrature));
  if (alpha.size() != p.size()) throw DimensionError("dual_gradient: alpha has the wrong length");
  return p.evaluate(alpha, false).gradient;
}

inline DenseMatrix dual_hessian(const Vector& alpha, const PriorSpec& prior,
                                const SpectralMoments& moments, const QuadratureConfig& quadrature = {}) {
  const DualProblem<double> p(prior, moments.basis, moments.values, spectral_rule(quadrature));
  if (alpha.size() != p.size()) throw DimensionError("dual_hessian: alpha has the wrong length");
  return p.evaluate(alpha, true).hessian;
}

struct LogExpectation {
  double value = 0.0;             ///< int_floor^1 q(l) log l dl
  double mass_below_floor = 0.0;  ///< estimated mass of q on (0, floor)
  bool floor_warning = false;     ///< mass_below_floor > 1e-6
};

/// int q(l) log(l) dl over the fitted rule, whose geometric panels resolve
/// the logarithmic endpoint singularity. The mass the density would place
/// below the rule's floor is estimated separately and reported.
inline LogExpectation integrate_log_expectation(const SurrogateDensity& q) {
  LogExpectation out;
  out.value = q.integrate([](double l) { return std::log(l); });
  const double floor = q.rule.nodes.empty() ? 0.0 : q.rule.nodes.front();
  if (const auto* b = std::get_if<BetaPrior>(&q.prior)) {
    // Near 0 the exponential tilt is ~constant and (1 - l)^(beta - 1) ~ 1, so
    // the missing mass is tilt * floor^gamma / (gamma B(gamma, beta)).
    const double tilt = q.density(floor) / std::exp(log_prior_density(q.prior, floor));
    const double log_cdf = b->gamma * std::log(floor) - std::log(b->gamma) -
                           (std::lgamma(b->gamma) + std::lgamma(b->beta) - std::lgamma(b->gamma + b->beta));
    out.mass_below_floor = tilt * std::exp(log_cdf);
  } else {
    const auto& u = std::get<UniformPrior>(q.prior);
    out.mass_below_floor = (u.delta < floor) ? q.density(floor) * (floor - u.delta) : 0.0;
  }
  out.floor_warning = out.mass_below_floor > 1e-6;
  return out;
}

}  // namespace vbald
