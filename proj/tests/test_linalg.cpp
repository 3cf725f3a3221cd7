#include <gtest/gtest.h>

#include <scaledgd/linalg.hpp>
#include <scaledgd/rng.hpp>

#include "oracles.hpp"

using namespace scaledgd;

namespace {

Tensor3 random_tensor(std::uint64_t seed, Index n1, Index n2, Index n3) {
  CounterRng rng(seed, 0);
  return gaussian_tensor(rng, n1, n2, n3);
}

}  // namespace

// ---------------------------------------------------------------------------
// Tensor3 container
// ---------------------------------------------------------------------------

TEST(Tensor3, IndexingMatchesColumnMajorLayout) {
  Tensor3 t(3, 4, 2);
  t(1, 2, 1) = 7.5;
  EXPECT_EQ(t.vec()[1 + 3 * (2 + 4 * 1)], 7.5);
  EXPECT_EQ(t.dim(1), 3);
  EXPECT_EQ(t.dim(2), 4);
  EXPECT_EQ(t.dim(3), 2);
  EXPECT_EQ(t.size(), 24);
}

TEST(Tensor3, NormsAndArithmetic) {
  Tensor3 a = random_tensor(1, 3, 3, 3);
  Tensor3 b = random_tensor(2, 3, 3, 3);
  const Tensor3 sum = a + b;
  EXPECT_NEAR(sum.vec().norm(), (a.vec() + b.vec()).norm(), 1e-14);
  EXPECT_DOUBLE_EQ(a.norm_fro(), a.vec().norm());
  EXPECT_DOUBLE_EQ(a.norm_inf(), a.vec().cwiseAbs().maxCoeff());
  Tensor3 wrong(2, 3, 3);
  EXPECT_THROW(a += wrong, DimensionError);
}

TEST(Tensor3, BufferLengthIsChecked) {
  EXPECT_THROW(Tensor3(2, 2, 2, Vector::Zero(7)), DimensionError);
}

// ---------------------------------------------------------------------------
// matricization and multilinear products
// ---------------------------------------------------------------------------

TEST(Matricize, MatchesBruteForceUnfoldingExactly) {
  const Tensor3 t = random_tensor(3, 4, 3, 5);
  for (int mode = 1; mode <= 3; ++mode) {
    const Matrix lib = matricize(t, mode);
    const Matrix ref = oracle::unfold(t, mode);
    ASSERT_EQ(lib.rows(), ref.rows());
    ASSERT_EQ(lib.cols(), ref.cols());
    EXPECT_EQ((lib - ref).cwiseAbs().maxCoeff(), 0.0) << "mode " << mode;
  }
}

TEST(Matricize, RoundTripIsExact) {
  const Tensor3 t = random_tensor(4, 5, 3, 4);
  for (int mode = 1; mode <= 3; ++mode) {
    const Tensor3 back = tensorize(matricize(t, mode), mode, 5, 3, 4);
    EXPECT_EQ((back.vec() - t.vec()).cwiseAbs().maxCoeff(), 0.0) << "mode " << mode;
  }
}

TEST(Matricize, RejectsBadModeAndShape) {
  const Tensor3 t = random_tensor(5, 2, 2, 2);
  EXPECT_THROW(matricize(t, 0), ValueError);
  EXPECT_THROW(matricize(t, 4), ValueError);
  EXPECT_THROW(tensorize(Matrix::Zero(2, 5), 1, 2, 2, 2), DimensionError);
}

TEST(MultilinearProduct, MatchesSextupleLoop) {
  CounterRng rng(6, 0);
  const Matrix a = gaussian_matrix(rng, 5, 2);
  const Matrix b = gaussian_matrix(rng, 4, 3);
  const Matrix c = gaussian_matrix(rng, 6, 2);
  const Tensor3 g = random_tensor(7, 2, 3, 2);
  const Tensor3 lib = multilinear_product(a, b, c, g);
  const Tensor3 ref = oracle::slow_multilinear(a, b, c, g);
  EXPECT_LT((lib - ref).norm_fro(), 1e-12 * std::max(1.0, ref.norm_fro()));
}

TEST(MultilinearProduct, ModeDimensionMismatchThrows) {
  const Tensor3 g = random_tensor(8, 2, 2, 2);
  CounterRng rng(9, 0);
  const Matrix a = gaussian_matrix(rng, 5, 3);  // inner dim 3 != 2
  EXPECT_THROW(mode_product(g, a, 1), DimensionError);
}

// The factored matricization identity behind every breve factor:
//   M1((A,B,C).G) = A M1(G) (C kron B)^T, and its mode-2/3 analogues.
TEST(Matricize, FactoredIdentityHoldsToTightTolerance) {
  CounterRng rng(11, 0);
  const Matrix a = gaussian_matrix(rng, 6, 2);
  const Matrix b = gaussian_matrix(rng, 5, 3);
  const Matrix c = gaussian_matrix(rng, 4, 2);
  const Tensor3 g = random_tensor(12, 2, 3, 2);
  const Tensor3 x = multilinear_product(a, b, c, g);
  const Matrix m1 = a * oracle::unfold(g, 1) * oracle::kron(c, b).transpose();
  const Matrix m2 = b * oracle::unfold(g, 2) * oracle::kron(c, a).transpose();
  const Matrix m3 = c * oracle::unfold(g, 3) * oracle::kron(b, a).transpose();
  EXPECT_LT((matricize(x, 1) - m1).norm(), 1e-10);
  EXPECT_LT((matricize(x, 2) - m2).norm(), 1e-10);
  EXPECT_LT((matricize(x, 3) - m3).norm(), 1e-10);
}

TEST(BreveFactors, AgreeWithKroneckerForms) {
  CounterRng rng(13, 0);
  TuckerFactors f;
  f.U = gaussian_matrix(rng, 6, 2);
  f.V = gaussian_matrix(rng, 5, 3);
  f.W = gaussian_matrix(rng, 4, 2);
  f.G = random_tensor(14, 2, 3, 2);
  const BreveFactors br = breve_factors(f);
  const Matrix bu = oracle::kron(f.W, f.V) * oracle::unfold(f.G, 1).transpose();
  const Matrix bv = oracle::kron(f.W, f.U) * oracle::unfold(f.G, 2).transpose();
  const Matrix bw = oracle::kron(f.V, f.U) * oracle::unfold(f.G, 3).transpose();
  EXPECT_LT((br.bu - bu).norm(), 1e-12 * std::max(1.0, bu.norm()));
  EXPECT_LT((br.bv - bv).norm(), 1e-12 * std::max(1.0, bv.norm()));
  EXPECT_LT((br.bw - bw).norm(), 1e-12 * std::max(1.0, bw.norm()));
}

// ---------------------------------------------------------------------------
// truncated SVD / symmetric eigendecomposition
// ---------------------------------------------------------------------------

TEST(SvdTopR, ValuesMatchJacobiOracle) {
  CounterRng rng(17, 0);
  const Matrix m = gaussian_matrix(rng, 9, 6);
  const SvdResult top = svd_top_r(m, 4);
  const Vector ref = oracle::jacobi_singular_values(m);
  for (Index i = 0; i < 4; ++i) EXPECT_NEAR(top.S[i], ref[i], 1e-12 * ref[0]);
  EXPECT_LT((top.U.transpose() * top.U - Matrix::Identity(4, 4)).norm(), 1e-12);
  EXPECT_LT((top.V.transpose() * top.V - Matrix::Identity(4, 4)).norm(), 1e-12);
}

TEST(SvdTopR, ReconstructsFullMatrixAtFullRank) {
  CounterRng rng(19, 0);
  const Matrix m = gaussian_matrix(rng, 7, 5);
  const SvdResult s = svd_top_r(m, 5);
  EXPECT_LT((s.U * s.S.asDiagonal() * s.V.transpose() - m).norm(), 1e-12 * m.norm());
}

TEST(SvdTopR, ColumnSignsAreCanonical) {
  CounterRng rng(23, 0);
  const Matrix m = gaussian_matrix(rng, 8, 4);
  const SvdResult s = svd_top_r(m, 3);
  for (Index j = 0; j < 3; ++j) {
    Index arg = 0;
    s.U.col(j).cwiseAbs().maxCoeff(&arg);
    EXPECT_GT(s.U(arg, j), 0.0) << "column " << j;
  }
}

TEST(SvdTopR, RankOutOfRangeThrows) {
  const Matrix m = Matrix::Identity(4, 3);
  EXPECT_THROW(svd_top_r(m, 0), DimensionError);
  EXPECT_THROW(svd_top_r(m, 4), DimensionError);
}

TEST(EigTopRSym, MatchesJacobiOracle) {
  CounterRng rng(29, 0);
  const Matrix g = gaussian_matrix(rng, 8, 8);
  const Matrix a = 0.5 * (g + g.transpose());
  const EigResult top = eig_top_r_sym(a, 3);
  const oracle::JacobiEig ref = oracle::jacobi_eig_sym(a);
  for (Index i = 0; i < 3; ++i) EXPECT_NEAR(top.values[i], ref.values[i], 1e-11);
  // Spans agree column by column (simple spectrum almost surely).
  for (Index i = 0; i < 3; ++i)
    EXPECT_NEAR(std::abs(top.vectors.col(i).dot(ref.vectors.col(i))), 1.0, 1e-9);
}

TEST(EigTopRSym, OrdersAlgebraicallyNotByMagnitude) {
  // Spectrum {3, 1, -5}: the top-2 eigenvalues are 3 and 1, not 3 and -5.
  CounterRng rng(31, 0);
  Matrix q = gaussian_matrix(rng, 3, 3);
  const Matrix qq = Eigen::HouseholderQR<Matrix>(q).householderQ();
  Vector d(3);
  d << 3.0, 1.0, -5.0;
  const Matrix a = qq * d.asDiagonal() * qq.transpose();
  const EigResult top = eig_top_r_sym(a, 2);
  EXPECT_NEAR(top.values[0], 3.0, 1e-10);
  EXPECT_NEAR(top.values[1], 1.0, 1e-10);
}

TEST(EigTopRSym, RejectsAsymmetricInput) {
  CounterRng rng(37, 0);
  const Matrix a = gaussian_matrix(rng, 5, 5);
  EXPECT_THROW(eig_top_r_sym(a, 2), ValueError);
}

// ---------------------------------------------------------------------------
// HOSVD
// ---------------------------------------------------------------------------

TEST(Hosvd, RecoversExactRankTensor) {
  CounterRng rng(41, 0);
  TuckerFactors planted;
  planted.U = gaussian_matrix(rng, 9, 2);
  planted.V = gaussian_matrix(rng, 8, 3);
  planted.W = gaussian_matrix(rng, 7, 2);
  planted.G = random_tensor(43, 2, 3, 2);
  const Tensor3 x = assemble(planted);
  const TuckerFactors f = hosvd(x, 2, 3, 2);
  EXPECT_LT((assemble(f) - x).norm_fro(), 1e-9 * x.norm_fro());
  EXPECT_LT((f.U.transpose() * f.U - Matrix::Identity(2, 2)).norm(), 1e-10);
  EXPECT_LT((f.V.transpose() * f.V - Matrix::Identity(3, 3)).norm(), 1e-10);
  EXPECT_LT((f.W.transpose() * f.W - Matrix::Identity(2, 2)).norm(), 1e-10);
}

TEST(Hosvd, CoreCarriesModeSpectraOfInput) {
  const Tensor3 t = random_tensor(47, 6, 5, 4);
  const TuckerFactors f = hosvd(t, 6, 5, 4);
  for (int mode = 1; mode <= 3; ++mode) {
    const Vector st = oracle::jacobi_singular_values(oracle::unfold(t, mode));
    const Vector sg = oracle::jacobi_singular_values(oracle::unfold(f.G, mode));
    EXPECT_LT((st - sg).norm(), 1e-9 * st.norm()) << "mode " << mode;
  }
}

TEST(Hosvd, RankOutOfRangeThrows) {
  const Tensor3 t = random_tensor(53, 3, 3, 3);
  EXPECT_THROW(hosvd(t, 4, 3, 3), DimensionError);
  EXPECT_THROW(hosvd(t, 0, 3, 3), DimensionError);
}

// ---------------------------------------------------------------------------
// Gram solves
// ---------------------------------------------------------------------------

TEST(RightScaleSolve, MatchesClosedForm2x2) {
  CounterRng rng(59, 0);
  const Matrix b = gaussian_matrix(rng, 6, 2);
  const Matrix g = gaussian_matrix(rng, 4, 2);
  const Matrix lib = right_scale_solve(g, b);
  const Matrix ref = g * oracle::inverse_2x2(b.transpose() * b);
  EXPECT_LT((lib - ref).norm(), 1e-12 * std::max(1.0, ref.norm()));
}

TEST(RightScaleSolve, MatchesJacobiInverseAtLargerRank) {
  CounterRng rng(61, 0);
  const Matrix b = gaussian_matrix(rng, 10, 4);
  const Matrix g = gaussian_matrix(rng, 5, 4);
  const oracle::JacobiEig e = oracle::jacobi_eig_sym(b.transpose() * b);
  const Matrix inv =
      e.vectors * e.values.cwiseInverse().asDiagonal() * e.vectors.transpose();
  EXPECT_LT((right_scale_solve(g, b) - g * inv).norm(), 1e-11);
}

TEST(RightScaleSolve, RidgeShiftsTheGram) {
  CounterRng rng(67, 0);
  const Matrix b = gaussian_matrix(rng, 8, 3);
  const Matrix g = gaussian_matrix(rng, 3, 3);
  const double ridge = 0.37;
  Matrix gram = b.transpose() * b;
  gram.diagonal().array() += ridge;
  const oracle::JacobiEig e = oracle::jacobi_eig_sym(gram);
  const Matrix inv =
      e.vectors * e.values.cwiseInverse().asDiagonal() * e.vectors.transpose();
  EXPECT_LT((right_scale_solve(g, b, ridge) - g * inv).norm(), 1e-11);
}

TEST(RightScaleSolve, SingularGramThrowsWithoutRidge) {
  Matrix b(4, 2);
  b.col(0) << 1, 2, 3, 4;
  b.col(1) = 2.0 * b.col(0);  // rank 1
  const Matrix g = Matrix::Ones(2, 2);
  EXPECT_THROW(right_scale_solve(g, b), SingularGramError);
  EXPECT_NO_THROW(right_scale_solve(g, b, 1e-3));
}

TEST(PinvViaGram, IsLeftInverseOfTallFullRankMatrix) {
  CounterRng rng(71, 0);
  const Matrix b = gaussian_matrix(rng, 9, 3);
  const Matrix p = pinv_via_gram(b);
  EXPECT_LT((p * b - Matrix::Identity(3, 3)).norm(), 1e-10);
}

// ---------------------------------------------------------------------------
// flatten and sign fixing
// ---------------------------------------------------------------------------

TEST(Flatten, IsColumnMajor) {
  Matrix m(2, 2);
  m << 1, 3, 2, 4;
  const Eigen::Map<const Vector> v = flatten(m);
  EXPECT_EQ(v[0], 1);
  EXPECT_EQ(v[1], 2);
  EXPECT_EQ(v[2], 3);
  EXPECT_EQ(v[3], 4);
}

TEST(FixColumnSigns, PairedFlipPreservesOuterProduct) {
  CounterRng rng(73, 0);
  Matrix u = gaussian_matrix(rng, 6, 3);
  Matrix v = gaussian_matrix(rng, 5, 3);
  const Matrix product = u * v.transpose();
  Matrix u2 = -u, v2 = -v;  // flipped pair represents the same product
  fix_column_signs(u2, &v2);
  Matrix u1 = u, v1 = v;
  fix_column_signs(u1, &v1);
  EXPECT_EQ((u1 - u2).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ((v1 - v2).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_LT((u1 * v1.transpose() - product).norm(), 1e-14 * product.norm());
}
