#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "support.hpp"
#include "vbald/estimators.hpp"

using namespace vbald;

namespace {

LinearOperator diag124() { return LinearOperator::diagonal(Vector{{1.0, 2.0, 4.0}}); }

/// Random SPD operator with a known spectrum; returns the eigenvalues too.
std::pair<LinearOperator, Vector> spd_case(Index n, double lo, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  const Vector eigs = test::log_uniform_spectrum(n, lo, 1.0, gen);
  return {LinearOperator::from_dense(test::spd_with_spectrum(eigs, gen)), eigs};
}

EstimatorConfig config(int m, int d, std::uint64_t seed = 0) {
  EstimatorConfig cfg;
  cfg.m = m;
  cfg.d = d;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST(Exact, Examples) {
  EXPECT_NEAR(logdet_exact(LinearOperator::identity(5)), 0.0, 1e-15);
  EXPECT_NEAR(logdet_exact(diag124()), std::log(8.0), 1e-14);
  DenseMatrix k(2, 2);
  k << 2, -1, -1, 2;
  EXPECT_NEAR(logdet_exact(LinearOperator::from_dense(k)), std::log(3.0), 1e-14);
  const auto sparse = LinearOperator::from_lower_triplets(2, {{0, 0, 2}, {1, 0, -1}, {1, 1, 2}});
  EXPECT_NEAR(logdet_exact(sparse), std::log(3.0), 1e-14);
}

TEST(Exact, MatchesEigenvalueSum) {
  const auto [op, eigs] = spd_case(80, 1e-4, 3);
  EXPECT_NEAR(logdet_exact(op), eigs.array().log().sum(), 1e-8);
}

TEST(Exact, NotPositiveDefiniteAndGuard) {
  DenseMatrix k(2, 2);
  k << 1, 2, 2, 1;
  EXPECT_THROW(logdet_exact(LinearOperator::from_dense(k)), NotPositiveDefinite);
  const auto sparse = LinearOperator::from_lower_triplets(2, {{0, 0, 1}, {1, 0, 2}, {1, 1, 1}});
  EXPECT_THROW(logdet_exact(sparse), NotPositiveDefinite);
  EXPECT_THROW(logdet_exact(LinearOperator::identity(10), 5), std::invalid_argument);
}

TEST(Vbald, DiagonalWithExactMoments) {
  // Diagonal inputs give probe-independent moments.
  const auto est = logdet_vbald(diag124(), config(10, 3));
  EXPECT_NEAR(est.value, std::log(8.0), 2e-2 * std::log(8.0));
  EXPECT_EQ(est.lambda_u, 4.0);
  EXPECT_EQ(est.method, Method::Vbald);
}

TEST(Vbald, IdentityIsNearZeroAndFlagged) {
  const auto est = logdet_vbald(LinearOperator::identity(100), config(10, 5));
  // Point mass at 1: per-eigenvalue bias is bounded by the maxent point-mass fit.
  EXPECT_LE(std::abs(est.value), 0.05 * 100);
  EXPECT_LE(est.value, 0.0);
  EXPECT_FALSE(est.diagnostics.converged);
  EXPECT_EQ(est.diagnostics.prior, "uniform");
}

TEST(Vbald, BetaPriorChoiceFailsOnPointMass) {
  auto cfg = config(5, 2);
  cfg.prior = PriorChoice::Beta;
  EXPECT_THROW(logdet_vbald(LinearOperator::identity(4), cfg), DegenerateMoments);
}

TEST(Taylor, IdentityIsExactlyZero) {
  EXPECT_EQ(logdet_taylor(LinearOperator::identity(30), config(10, 4)).value, 0.0);
}

TEST(Taylor, DiagonalTruncatedSeries) {
  // lambda / 4 = {1/4, 1/2, 1}; E[(1 - l)] = 5/12, E[(1 - l)^2] = 13/48.
  const double expected = 3 * std::log(4.0) - 3 * (5.0 / 12.0 + 13.0 / 96.0);
  EXPECT_NEAR(expected, 2.50263, 1e-5);
  EXPECT_NEAR(logdet_taylor(diag124(), config(2, 3)).value, expected, 1e-13);
}

TEST(Taylor, NeverBelowExactLogDet) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto [op, eigs] = spd_case(40, 1e-2, 100 + seed);
    const auto norm = normalize(op);
    // Oracle truncated series from the eigenvalues directly.
    const Vector shifted = (1.0 - eigs.array() / norm.lambda_u()).matrix();
    double series = 0.0;
    for (int i = 1; i <= 15; ++i) series += shifted.array().pow(i).mean() / i;
    const double oracle = 40 * (std::log(norm.lambda_u()) - series);
    const double exact = eigs.array().log().sum();
    EXPECT_GE(oracle, exact) << "seed " << seed;
    // The stochastic estimate tends to the same one-sided value.
    const auto est = logdet_taylor(op, config(15, 2000, seed));
    EXPECT_NEAR(est.value, oracle, 0.05 * std::abs(oracle) + 0.5);
  }
}

TEST(Chebyshev, InterpolantReproducesLogOnInterval) {
  const double a = 0.1;
  const Vector c = chebyshev_log_coefficients(40, a);
  for (double l : {a, 0.13, 0.2, 0.5, 0.77, 1.0}) {
    const double t = 2 * (l - a) / (1 - a) - 1;
    double sum = 0;
    for (int i = 0; i <= 40; ++i) sum += c[i] * std::cos(i * std::acos(std::clamp(t, -1.0, 1.0)));
    EXPECT_NEAR(sum, std::log(l), 1e-10) << l;
  }
}

TEST(Chebyshev, IdentityAndDiagonal) {
  for (int m : {1, 5, 30}) EXPECT_NEAR(logdet_chebyshev(LinearOperator::identity(20), config(m, 3)).value, 0.0, 1e-10);
  const auto op = LinearOperator::diagonal(Vector{{0.25, 0.5, 1.0}});
  auto cfg = config(20, 3);
  cfg.chebyshev_floor = 0.2;
  EXPECT_NEAR(logdet_chebyshev(op, cfg).value, logdet_exact(op), 1e-3);
}

TEST(Lanczos, IdentityAndDiagonal) {
  EXPECT_NEAR(logdet_lanczos(LinearOperator::identity(50), config(10, 4)).value, 0.0, 1e-12);
  // Three steps span the whole spectrum of a 3 x 3 matrix.
  EXPECT_NEAR(logdet_lanczos(diag124(), config(3, 5)).value, std::log(8.0), 1e-10);
}

TEST(Lanczos, QuadraticFormMatchesEigendecomposition) {
  const auto [op, eigs] = spd_case(30, 1e-3, 9);
  const auto b = normalize(op);
  const Vector z = rademacher_probe(30, 1, 0);
  const DenseMatrix kb = op.to_dense() / b.lambda_u();
  Eigen::SelfAdjointEigenSolver<DenseMatrix> es(kb);
  const Vector proj = es.eigenvectors().transpose() * z;
  const double expected = (proj.array().square() * es.eigenvalues().array().log()).sum();
  EXPECT_NEAR(lanczos_log_quadratic_form(b, z, 30), expected, 1e-8 * std::abs(expected));
}

TEST(Condition, Examples) {
  const auto ident = condition_number_estimate(LinearOperator::identity(10));
  EXPECT_NEAR(ident.value, 1.0, 1e-10);
  const auto d = condition_number_estimate(diag124());
  EXPECT_NEAR(d.value, 4.0, 1e-6);
  EXPECT_TRUE(d.converged);
  EXPECT_FALSE(d.resolution_limited);
}

TEST(Condition, ResolutionLimitIsFlagged) {
  const auto op = LinearOperator::diagonal(Vector{{1e-20, 0.5, 1.0}});
  const auto c = condition_number_estimate(op);
  EXPECT_TRUE(c.resolution_limited);
  EXPECT_LE(c.value, 1e20);
}

class MethodProperties : public ::testing::TestWithParam<Method> {};

TEST_P(MethodProperties, ScaleEquivariance) {
  const auto [op, eigs] = spd_case(60, 1e-3, 12);
  auto cfg = config(20, 30, 4);
  const double base = estimate_logdet(GetParam(), op, cfg).value;
  for (double c : {0.1, 10.0}) {
    const auto scaled = LinearOperator::from_dense(c * op.to_dense());
    const double v = estimate_logdet(GetParam(), scaled, cfg).value;
    EXPECT_NEAR(v - base, 60 * std::log(c), 1e-6 * std::max(1.0, std::abs(base))) << "c=" << c;
  }
}

TEST_P(MethodProperties, Deterministic) {
  const auto [op, eigs] = spd_case(50, 1e-3, 13);
  const auto cfg = config(12, 10, 8);
  EXPECT_EQ(estimate_logdet(GetParam(), op, cfg).value, estimate_logdet(GetParam(), op, cfg).value);
}

INSTANTIATE_TEST_SUITE_P(AllMethods, MethodProperties,
                         ::testing::Values(Method::Vbald, Method::Taylor, Method::Chebyshev, Method::Lanczos,
                                           Method::Exact),
                         [](const auto& info) { return std::string(to_string(info.param)); });

TEST(Estimators, ShareProbesAtEqualSeed) {
  const auto [op, eigs] = spd_case(40, 1e-2, 14);
  const auto cfg = config(8, 12, 21);
  const auto expected = probe_checksum(40, 21, 12);
  for (auto m : {Method::Vbald, Method::Taylor, Method::Chebyshev, Method::Lanczos}) {
    EXPECT_EQ(estimate_logdet(m, op, cfg).diagnostics.probe_checksum, expected) << to_string(m);
  }
}

TEST(Estimators, RejectBadConfig) {
  for (auto m : {Method::Vbald, Method::Taylor, Method::Chebyshev, Method::Lanczos}) {
    EXPECT_THROW(estimate_logdet(m, diag124(), config(0, 3)), std::invalid_argument);
    EXPECT_THROW(estimate_logdet(m, diag124(), config(3, 0)), std::invalid_argument);
  }
}

TEST(Estimators, MethodNamesRoundTrip) {
  for (auto m : {Method::Vbald, Method::Taylor, Method::Chebyshev, Method::Lanczos, Method::Exact}) {
    EXPECT_EQ(parse_method(to_string(m)), m);
  }
  EXPECT_FALSE(parse_method("cholesky").has_value());
  EXPECT_EQ(parse_prior("auto"), PriorChoice::Auto);
  EXPECT_FALSE(parse_prior("gamma").has_value());
}

class VbaldOrder : public ::testing::TestWithParam<PriorChoice> {};

TEST_P(VbaldOrder, ErrorShrinksWithMoreMomentsOnAverage) {
  const std::vector<int> orders = {4, 8, 16, 30};
  std::vector<double> mean_error(orders.size(), 0.0);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto [op, eigs] = spd_case(200, 1e-6, 500 + seed);
    const double exact = eigs.array().log().sum();
    for (std::size_t k = 0; k < orders.size(); ++k) {
      auto cfg = config(orders[k], 50, seed);
      cfg.prior = GetParam();
      const auto est = logdet_vbald(op, cfg);
      mean_error[k] += std::abs(est.value - exact) / std::abs(exact) / 10.0;
    }
  }
  for (std::size_t k = 1; k < orders.size(); ++k) {
    EXPECT_LE(mean_error[k], mean_error[k - 1]) << "m=" << orders[k] << " vs m=" << orders[k - 1];
  }
}

INSTANTIATE_TEST_SUITE_P(Priors, VbaldOrder, ::testing::Values(PriorChoice::Uniform, PriorChoice::Auto),
                         [](const auto& info) { return std::string(to_string(info.param)); });
