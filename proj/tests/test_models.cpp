#include <gtest/gtest.h>

#include <scaledgd/linalg.hpp>
#include <scaledgd/models.hpp>
#include <scaledgd/rng.hpp>

#include "oracles.hpp"

using namespace scaledgd;

namespace {

GroundTruthSpec matrix_spec(Index n1, Index n2, Index r, double kappa,
                            std::uint64_t seed, double sigma_max = 1.0) {
  GroundTruthSpec s;
  s.dims = {n1, n2, 1};
  s.ranks = {r, r, 1};
  s.kappa = kappa;
  s.sigma_max = sigma_max;
  s.seed = seed;
  return s;
}

GroundTruthSpec tensor_spec(std::array<Index, 3> dims, std::array<Index, 3> ranks,
                            double kappa, std::uint64_t seed) {
  GroundTruthSpec s;
  s.dims = dims;
  s.ranks = ranks;
  s.kappa = kappa;
  s.seed = seed;
  return s;
}

}  // namespace

// ---------------------------------------------------------------------------
// matrix ground truth
// ---------------------------------------------------------------------------

TEST(MatrixTruth, PlantedSpectrumIsLinearlySpaced) {
  const auto t = gen_matrix_truth(matrix_spec(20, 15, 4, 8.0, 2, 3.0));
  ASSERT_EQ(t.sigma.size(), 4);
  // sigma_i interpolates linearly between sigma_max and sigma_max / kappa.
  for (Index i = 0; i < 4; ++i) {
    const double expect = 3.0 + (3.0 / 8.0 - 3.0) * static_cast<double>(i) / 3.0;
    EXPECT_NEAR(t.sigma[i], expect, 1e-12);
  }
  // The singular values of X itself agree with the plant (Jacobi oracle).
  const Vector sv = oracle::jacobi_singular_values(t.X);
  for (Index i = 0; i < 4; ++i) EXPECT_NEAR(sv[i], t.sigma[i], 1e-10);
  for (Index i = 4; i < sv.size(); ++i) EXPECT_LT(sv[i], 1e-10);
}

TEST(MatrixTruth, FactorsAreOrthonormalAndConsistent) {
  const auto t = gen_matrix_truth(matrix_spec(12, 9, 3, 5.0, 7));
  EXPECT_LT((t.U.transpose() * t.U - Matrix::Identity(3, 3)).norm(), 1e-12);
  EXPECT_LT((t.V.transpose() * t.V - Matrix::Identity(3, 3)).norm(), 1e-12);
  const Matrix x = t.U * t.sigma.asDiagonal() * t.V.transpose();
  EXPECT_LT((t.X - x).norm(), 1e-12);
  // Balanced square-root factors reproduce X as well.
  const Vector root = t.sigma.cwiseSqrt();
  EXPECT_LT((t.factors.L - t.U * root.asDiagonal()).norm(), 1e-12);
  EXPECT_LT((t.factors.R - t.V * root.asDiagonal()).norm(), 1e-12);
  EXPECT_LT((t.factors.L * t.factors.R.transpose() - t.X).norm(), 1e-12);
}

TEST(MatrixTruth, SymmetricPathIsPsdWithEqualFactors) {
  GroundTruthSpec s = matrix_spec(10, 10, 3, 4.0, 9);
  s.symmetric = true;
  const auto t = gen_matrix_truth(s);
  EXPECT_EQ((t.U - t.V).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_LT((t.X - t.X.transpose()).cwiseAbs().maxCoeff(), 1e-14);
  const auto eig = oracle::jacobi_eig_sym(t.X);
  for (Index i = 0; i < 3; ++i) EXPECT_NEAR(eig.values[i], t.sigma[i], 1e-10);
  for (Index i = 3; i < 10; ++i) EXPECT_NEAR(eig.values[i], 0.0, 1e-10);
}

TEST(MatrixTruth, DeterministicInSeed) {
  const auto a = gen_matrix_truth(matrix_spec(8, 8, 2, 3.0, 5));
  const auto b = gen_matrix_truth(matrix_spec(8, 8, 2, 3.0, 5));
  const auto c = gen_matrix_truth(matrix_spec(8, 8, 2, 3.0, 6));
  EXPECT_EQ((a.X - b.X).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_GT((a.X - c.X).cwiseAbs().maxCoeff(), 1e-3);
}

TEST(MatrixTruth, BadSpecThrows) {
  EXPECT_THROW(gen_matrix_truth(matrix_spec(5, 5, 0, 2.0, 0)), DimensionError);
  EXPECT_THROW(gen_matrix_truth(matrix_spec(5, 5, 6, 2.0, 0)), DimensionError);
  EXPECT_THROW(gen_matrix_truth(matrix_spec(5, 5, 2, 0.5, 0)), ValueError);
  GroundTruthSpec s = matrix_spec(5, 5, 2, 2.0, 0);
  s.sigma_max = 0.0;
  EXPECT_THROW(gen_matrix_truth(s), ValueError);
}

// ---------------------------------------------------------------------------
// tensor ground truth
// ---------------------------------------------------------------------------

TEST(TensorTruth, AssembledFromOrthonormalFactorsWithTargetSpectra) {
  const auto t = gen_tensor_truth(tensor_spec({12, 11, 10}, {3, 3, 3}, 6.0, 4));
  EXPECT_LT((t.F.U.transpose() * t.F.U - Matrix::Identity(3, 3)).norm(), 1e-12);
  EXPECT_LT((t.F.V.transpose() * t.F.V - Matrix::Identity(3, 3)).norm(), 1e-12);
  EXPECT_LT((t.F.W.transpose() * t.F.W - Matrix::Identity(3, 3)).norm(), 1e-12);
  EXPECT_LT((t.X - assemble(t.F)).norm_fro(), 1e-12 * t.X.norm_fro());
  // Equal ranks: each mode matricization carries the linearly spaced plant.
  const Vector target = detail::linear_sigmas(3, 1.0, 6.0);
  for (int mode = 1; mode <= 3; ++mode) {
    const Vector sv = oracle::jacobi_singular_values(oracle::unfold(t.X, mode));
    for (Index i = 0; i < 3; ++i) EXPECT_NEAR(sv[i], target[i], 1e-6);
    for (Index i = 3; i < sv.size(); ++i) EXPECT_LT(sv[i], 1e-8);
  }
}

TEST(TensorTruth, UnequalRanksKeepExactMultilinearRank) {
  const auto t = gen_tensor_truth(tensor_spec({10, 9, 8}, {2, 3, 4}, 3.0, 8));
  for (int mode = 1; mode <= 3; ++mode) {
    const Vector sv = oracle::jacobi_singular_values(oracle::unfold(t.X, mode));
    const Index rk = (mode == 1) ? 2 : (mode == 2) ? 3 : 4;
    EXPECT_GT(sv[rk - 1], 0.05);
    for (Index i = rk; i < sv.size(); ++i) EXPECT_LT(sv[i], 1e-10);
  }
}

TEST(TensorTruth, DeterministicInSeedAndValidated) {
  const auto a = gen_tensor_truth(tensor_spec({6, 6, 6}, {2, 2, 2}, 2.0, 3));
  const auto b = gen_tensor_truth(tensor_spec({6, 6, 6}, {2, 2, 2}, 2.0, 3));
  EXPECT_EQ((a.X - b.X).norm_fro(), 0.0);
  EXPECT_THROW(gen_tensor_truth(tensor_spec({6, 6, 6}, {2, 2, 7}, 2.0, 0)),
               DimensionError);
  // r1 > r2 * r3 is infeasible for a Tucker core.
  EXPECT_THROW(gen_tensor_truth(tensor_spec({8, 6, 6}, {5, 2, 2}, 2.0, 0)),
               DimensionError);
}

// ---------------------------------------------------------------------------
// sparse corruption
// ---------------------------------------------------------------------------

TEST(SparseCorruption, MatrixPerFiberCountsAndMagnitudes) {
  CorruptionSpec spec;
  spec.alpha = 0.2;
  spec.magnitude_scale = 10.0;
  spec.seed = 11;
  const double x_inf = 0.5;
  const auto c = gen_sparse_corruption(spec, 20, 30, x_inf);
  EXPECT_FALSE(c.degenerate);
  const Index cap_row = static_cast<Index>(std::floor(0.2 * 30));
  const Index cap_col = static_cast<Index>(std::floor(0.2 * 20));
  Index nnz = 0;
  for (Index i = 0; i < 20; ++i)
    EXPECT_LE((c.S.row(i).array() != 0.0).count(), cap_row);
  for (Index j = 0; j < 30; ++j)
    EXPECT_LE((c.S.col(j).array() != 0.0).count(), cap_col);
  for (Index j = 0; j < 30; ++j)
    for (Index i = 0; i < 20; ++i)
      if (c.S(i, j) != 0.0) {
        ++nnz;
        EXPECT_LE(std::abs(c.S(i, j)), 10.0 * x_inf);
      }
  EXPECT_GT(nnz, 0);
  // Rejection sampling saturates most of the fiber budget.
  EXPECT_GT(nnz, 20 * cap_row / 2);
}

TEST(SparseCorruption, TensorPerFiberCounts) {
  CorruptionSpec spec;
  spec.alpha = 0.3;
  spec.seed = 13;
  const auto c = gen_sparse_corruption(spec, 10, 10, 10, 1.0);
  EXPECT_FALSE(c.degenerate);
  const Index cap = static_cast<Index>(std::floor(0.3 * 10));
  for (Index j = 0; j < 10; ++j)
    for (Index k = 0; k < 10; ++k) {
      Index c1 = 0, c2 = 0, c3 = 0;
      for (Index i = 0; i < 10; ++i) {
        c1 += c.S(i, j, k) != 0.0;
        c2 += c.S(j, i, k) != 0.0;
        c3 += c.S(j, k, i) != 0.0;
      }
      EXPECT_LE(c1, cap);
      EXPECT_LE(c2, cap);
      EXPECT_LE(c3, cap);
    }
  EXPECT_GT(c.S.norm_fro(), 0.0);
}

TEST(SparseCorruption, DegenerateWhenFiberBudgetRoundsToZero) {
  CorruptionSpec spec;
  spec.alpha = 0.01;  // floor(0.01 * 30) = 0: no entry can be placed
  spec.seed = 17;
  const auto c = gen_sparse_corruption(spec, 30, 30, 1.0);
  EXPECT_TRUE(c.degenerate);
  EXPECT_EQ(c.S.cwiseAbs().maxCoeff(), 0.0);
  spec.alpha = 0.0;
  const auto z = gen_sparse_corruption(spec, 30, 30, 1.0);
  EXPECT_FALSE(z.degenerate);
  EXPECT_EQ(z.S.cwiseAbs().maxCoeff(), 0.0);
}

TEST(SparseCorruption, FloorIsTolerantToBinaryDust) {
  // 0.1 * 30 = 2.9999999999999996 in binary; the fiber budget must be 3.
  EXPECT_EQ(detail::tolerant_floor(0.1 * 30.0), 3);
  EXPECT_EQ(detail::tolerant_floor(2.5), 2);
  EXPECT_EQ(detail::tolerant_floor(0.9999999999), 1);
}

// ---------------------------------------------------------------------------
// spectral statistics and incoherence
// ---------------------------------------------------------------------------

TEST(SpectralStats, MatchesPlantedMatrixSpectrum) {
  const auto t = gen_matrix_truth(matrix_spec(16, 14, 4, 10.0, 21, 2.0));
  const auto s = spectral_stats(t.X, 4);
  EXPECT_NEAR(s.sigma_max, 2.0, 1e-10);
  EXPECT_NEAR(s.sigma_min, 0.2, 1e-10);
  EXPECT_NEAR(s.kappa, 10.0, 1e-8);
  EXPECT_TRUE(s.kappa_finite);
  // Asking for rank past the true rank reports an infinite condition number.
  const auto over = spectral_stats(t.X, 5);
  EXPECT_FALSE(over.kappa_finite);
  EXPECT_TRUE(std::isinf(over.kappa));
  EXPECT_THROW(spectral_stats(t.X, 0), DimensionError);
}

TEST(SpectralStats, TensorAggregatesAcrossModes) {
  const auto t = gen_tensor_truth(tensor_spec({10, 10, 10}, {3, 3, 3}, 5.0, 23));
  const auto s = spectral_stats(t.X, 3, 3, 3);
  EXPECT_NEAR(s.sigma_max, 1.0, 1e-6);
  EXPECT_NEAR(s.sigma_min, 0.2, 1e-6);
  EXPECT_NEAR(s.kappa, 5.0, 1e-4);
}

TEST(Incoherence, SpikyAndDiffuseBases) {
  // Coordinate basis: mu = (n/r) * 1 = n/r, the spiky extreme.
  Matrix e = Matrix::Zero(10, 2);
  e(0, 0) = 1.0;
  e(1, 1) = 1.0;
  EXPECT_NEAR(incoherence(e, e), 5.0, 1e-12);
  // Random orthonormal bases have mu = O(1) and >= 1 always.
  CounterRng rng(25, 0);
  const Matrix u = random_orthonormal(rng, 40, 3);
  const Matrix v = random_orthonormal(rng, 40, 3);
  const double mu = incoherence(u, v);
  EXPECT_GE(mu, 1.0);
  EXPECT_LT(mu, 10.0);
  // Three-factor overload takes the max.
  EXPECT_GE(incoherence(u, v, e.topRows(10)), 5.0 - 1e-12);
  // Non-orthonormal input is rejected.
  EXPECT_THROW(incoherence(2.0 * u, v), ValueError);
}

// ---------------------------------------------------------------------------
// factor distance metric
// ---------------------------------------------------------------------------

TEST(DistFactorMetric, ZeroAtTruthAndInvariantPairs) {
  const auto t = gen_matrix_truth(matrix_spec(14, 12, 3, 4.0, 27));
  const auto at_truth = dist_factor_metric(t.factors, t.factors, t.sigma);
  EXPECT_LT(at_truth.value, 1e-16);
  // (L Q, R Q^{-T}) represents the same X and has distance ~0.
  Matrix q(3, 3);
  q << 1.2, 0.3, -0.1, 0.0, 0.8, 0.25, -0.2, 0.1, 1.1;
  MatrixFactors g;
  g.L = t.factors.L * q;
  g.R = t.factors.R * q.inverse().transpose();
  const auto inv = dist_factor_metric(g, t.factors, t.sigma);
  EXPECT_LT(inv.value, 1e-10);
  EXPECT_FALSE(inv.q_singular);
}

TEST(DistFactorMetric, MatchesScalarOracleAtRankOne) {
  // Rank one: Q is a scalar, so the metric reduces to a 1-D minimization that
  // a sign-split golden-section search solves to high accuracy.
  const auto t = gen_matrix_truth(matrix_spec(10, 8, 1, 1.0, 29));
  CounterRng rng(30, 0);
  MatrixFactors f;
  f.L = t.factors.L + 0.3 * gaussian_matrix(rng, 10, 1);
  f.R = t.factors.R + 0.3 * gaussian_matrix(rng, 8, 1);
  const auto lib = dist_factor_metric(f, t.factors, t.sigma);
  const double ref =
      oracle::dist_rank1(f.L, t.factors.L, f.R, t.factors.R, t.sigma[0]);
  EXPECT_NEAR(lib.value, ref, 1e-6 * std::max(1.0, ref));
}

TEST(DistFactorMetric, PositiveForGenuinelyDifferentFactors) {
  const auto t = gen_matrix_truth(matrix_spec(10, 10, 2, 2.0, 31));
  const auto u = gen_matrix_truth(matrix_spec(10, 10, 2, 2.0, 32));
  const auto d = dist_factor_metric(u.factors, t.factors, t.sigma);
  EXPECT_GT(d.value, 1e-3);
  MatrixFactors bad = t.factors;
  bad.L = Matrix::Zero(9, 2);
  EXPECT_THROW(dist_factor_metric(bad, t.factors, t.sigma), DimensionError);
}
