#include <gtest/gtest.h>

#include <cmath>

#include "vbald/estimators.hpp"
#include "vbald/synth.hpp"

using namespace vbald;

TEST(SeKernel, SinglePoint) {
  for (double l : {0.01, 1.0, 100.0}) {
    KernelSpec spec;
    spec.n = 1;
    spec.lengthscale = l;
    const auto k = se_kernel(spec).to_dense();
    ASSERT_EQ(k.rows(), 1);
    EXPECT_EQ(k(0, 0), 1.0 + 1e-8);
  }
}

TEST(SeKernel, IdenticalPointsGiveRankOnePlusJitter) {
  DenseMatrix points(2, 6);
  points.row(0).setConstant(0.3);
  points.row(1) = points.row(0);
  const auto op = se_kernel_from_points(points, 0.5, 1e-8);
  const DenseMatrix k = op.to_dense();
  EXPECT_EQ(k(0, 1), 1.0);
  Eigen::SelfAdjointEigenSolver<DenseMatrix> es(k);
  EXPECT_NEAR(es.eigenvalues()[0], 1e-8, 1e-15);
  EXPECT_NEAR(es.eigenvalues()[1], 2.0 + 1e-8, 1e-14);
  EXPECT_NEAR(logdet_exact(op), std::log((2.0 + 1e-8) * 1e-8), 1e-7);
}

TEST(SeKernel, StructuralInvariants) {
  KernelSpec spec;
  spec.n = 200;
  spec.lengthscale = 2.0;
  spec.seed = 3;
  const DenseMatrix k = se_kernel(spec).to_dense();
  EXPECT_EQ(k, k.transpose());
  for (Index i = 0; i < k.rows(); ++i) EXPECT_EQ(k(i, i), 1.0 + spec.noise);
  for (Index j = 0; j < k.cols(); ++j) {
    for (Index i = 0; i < j; ++i) {
      EXPECT_GT(k(i, j), 0.0);
      EXPECT_LT(k(i, j), 1.0);
    }
  }
}

TEST(SeKernel, MatchesDirectDistances) {
  KernelSpec spec;
  spec.n = 30;
  spec.lengthscale = 0.8;
  spec.seed = 1;
  const DenseMatrix x = kernel_inputs(spec);
  const DenseMatrix k = se_kernel(spec).to_dense();
  for (Index i = 0; i < 30; ++i) {
    for (Index j = 0; j < 30; ++j) {
      if (i == j) continue;
      const double d2 = (x.row(i) - x.row(j)).squaredNorm();
      EXPECT_NEAR(k(i, j), std::exp(-d2 / (2 * 0.64)), 1e-12);
    }
  }
}

TEST(SeKernel, OffDiagonalsGrowWithLengthscale) {
  KernelSpec spec;
  spec.n = 100;
  spec.seed = 5;
  spec.lengthscale = 0.7;
  const DenseMatrix small = se_kernel(spec).to_dense();
  spec.lengthscale = 1.4;
  const DenseMatrix large = se_kernel(spec).to_dense();
  for (Index j = 0; j < 100; ++j) {
    for (Index i = 0; i < j; ++i) EXPECT_GE(large(i, j), small(i, j));
  }
}

TEST(SeKernel, PositiveDefiniteAcrossLengthscales) {
  for (double l : {0.05, 0.3, 1.0, 3.0}) {
    KernelSpec spec;
    spec.n = 400;
    spec.lengthscale = l;
    spec.input_scale = 0.1;
    EXPECT_NO_THROW(logdet_exact(se_kernel(spec))) << "l=" << l;
  }
}

TEST(SeKernel, ConditionNumberGrowsWithLengthscale) {
  double previous = 0.0;
  for (double l : {0.02, 0.05, 0.1, 0.2}) {
    KernelSpec spec;
    spec.n = 300;
    spec.lengthscale = l;
    spec.input_scale = 0.1;
    const auto c = condition_number_estimate(se_kernel(spec));
    EXPECT_GT(c.value, previous) << "l=" << l;
    previous = c.value;
  }
}

TEST(SeKernel, SeedDeterminesInputs) {
  KernelSpec a;
  a.n = 20;
  KernelSpec b = a;
  EXPECT_EQ(kernel_inputs(a), kernel_inputs(b));
  b.seed = 1;
  EXPECT_NE(kernel_inputs(a), kernel_inputs(b));
}

TEST(SeKernel, RejectsInvalidSpec) {
  KernelSpec s;
  s.n = 0;
  EXPECT_THROW(se_kernel(s), std::invalid_argument);
  s = KernelSpec{};
  s.lengthscale = 0.0;
  EXPECT_THROW(se_kernel(s), std::invalid_argument);
  s = KernelSpec{};
  s.noise = -1.0;
  EXPECT_THROW(se_kernel(s), std::invalid_argument);
  s = KernelSpec{};
  s.dim = 0;
  EXPECT_THROW(se_kernel(s), std::invalid_argument);
}
