#pragma once

#include <array>
#include <string>

#include "scaledgd/dense.hpp"

namespace scaledgd {

// Relative pivot floor for Gram solves: smallest eigenvalue below
// pivot_floor * largest with no ridge means the preconditioner is singular.
inline constexpr double kPivotFloor = 1e-14;
// Relative tolerance for the symmetry check in eig_top_r_sym.
inline constexpr double kSymmetryTol = 1e-10;

// ---------------------------------------------------------------------------
// factor bundles
// ---------------------------------------------------------------------------

struct MatrixFactors {
  Matrix L;  // n1 x r
  Matrix R;  // n2 x r
};

struct TuckerFactors {
  Matrix U;   // n1 x r1
  Matrix V;   // n2 x r2
  Matrix W;   // n3 x r3
  Tensor3 G;  // r1 x r2 x r3 core

  std::array<Index, 3> ranks() const { return {U.cols(), V.cols(), W.cols()}; }
  std::array<Index, 3> dims() const { return {U.rows(), V.rows(), W.rows()}; }
};

struct SvdResult {
  Matrix U;  // n1 x r, orthonormal columns
  Vector S;  // r, non-increasing, >= 0
  Matrix V;  // n2 x r, orthonormal columns
};

struct EigResult {
  Vector values;   // r, non-increasing (algebraic order)
  Matrix vectors;  // n x r, orthonormal columns
};

// ---------------------------------------------------------------------------
// sign convention
// ---------------------------------------------------------------------------

// Deterministic sign fix: each column's largest-magnitude entry is made
// positive (ties broken by first index).  `paired` follows the same flips so
// that U*S*V^T style products are preserved.
inline void fix_column_signs(Matrix& m, Matrix* paired = nullptr) {
  for (Index j = 0; j < m.cols(); ++j) {
    Index best = 0;
    double best_abs = std::abs(m(0, j));
    for (Index i = 1; i < m.rows(); ++i) {
      const double a = std::abs(m(i, j));
      if (a > best_abs) {
        best_abs = a;
        best = i;
      }
    }
    if (m(best, j) < 0.0) {
      m.col(j) = -m.col(j);
      if (paired) paired->col(j) = -paired->col(j);
    }
  }
}

// ---------------------------------------------------------------------------
// matricization and multilinear products
// ---------------------------------------------------------------------------

// Mode-k matricization.  Columns enumerate the remaining indices in
// ascending-mode order (lower mode varies fastest):
//   M1(i1, i2 + n2*i3) = M2(i2, i1 + n1*i3) = M3(i3, i1 + n1*i2) = T(i1,i2,i3).
inline Matrix matricize(const Tensor3& t, int mode) {
  require_value(mode >= 1 && mode <= 3, "matricize: mode must be 1, 2, or 3");
  const Index n1 = t.n1(), n2 = t.n2(), n3 = t.n3();
  if (mode == 1) {
    return Eigen::Map<const Matrix>(t.data(), n1, n2 * n3);
  }
  if (mode == 2) {
    Matrix out(n2, n1 * n3);
    for (Index i3 = 0; i3 < n3; ++i3) {
      Eigen::Map<const Matrix> slab(t.data() + n1 * n2 * i3, n1, n2);
      out.block(0, n1 * i3, n2, n1) = slab.transpose();
    }
    return out;
  }
  return Eigen::Map<const Matrix>(t.data(), n1 * n2, n3).transpose();
}

// Inverse of matricize for the given mode and target dimensions.
inline Tensor3 tensorize(const Matrix& m, int mode, Index n1, Index n2, Index n3) {
  require_value(mode >= 1 && mode <= 3, "tensorize: mode must be 1, 2, or 3");
  const Index rows = mode == 1 ? n1 : (mode == 2 ? n2 : n3);
  const Index cols = n1 * n2 * n3 / (rows == 0 ? 1 : rows);
  require_dims(rows > 0 && m.rows() == rows && m.cols() * rows == n1 * n2 * n3 &&
                   m.cols() == cols,
               "tensorize: matrix shape does not match target dimensions");
  Tensor3 t(n1, n2, n3);
  if (mode == 1) {
    Eigen::Map<Matrix>(t.data(), n1, n2 * n3) = m;
  } else if (mode == 2) {
    for (Index i3 = 0; i3 < n3; ++i3) {
      Eigen::Map<Matrix> slab(t.data() + n1 * n2 * i3, n1, n2);
      slab = m.block(0, n1 * i3, n2, n1).transpose();
    }
  } else {
    Eigen::Map<Matrix>(t.data(), n1 * n2, n3) = m.transpose();
  }
  return t;
}

// Mode-k product: contracts mode k of t with the columns of a
// (out dim(k) = a.rows(), requires a.cols() == t.dim(k)).
inline Tensor3 mode_product(const Tensor3& t, const Matrix& a, int mode) {
  require_value(mode >= 1 && mode <= 3, "mode_product: mode must be 1, 2, or 3");
  require_dims(a.cols() == t.dim(mode), "mode_product: inner dimension mismatch");
  const Index n1 = t.n1(), n2 = t.n2(), n3 = t.n3();
  if (mode == 1) {
    Tensor3 out(a.rows(), n2, n3);
    Eigen::Map<Matrix>(out.data(), a.rows(), n2 * n3) =
        a * Eigen::Map<const Matrix>(t.data(), n1, n2 * n3);
    return out;
  }
  if (mode == 2) {
    Tensor3 out(n1, a.rows(), n3);
    for (Index i3 = 0; i3 < n3; ++i3) {
      Eigen::Map<const Matrix> slab(t.data() + n1 * n2 * i3, n1, n2);
      Eigen::Map<Matrix> oslab(out.data() + n1 * a.rows() * i3, n1, a.rows());
      oslab = slab * a.transpose();
    }
    return out;
  }
  Tensor3 out(n1, n2, a.rows());
  Eigen::Map<Matrix>(out.data(), n1 * n2, a.rows()) =
      Eigen::Map<const Matrix>(t.data(), n1 * n2, n3) * a.transpose();
  return out;
}

// (A, B, C) . G — multilinear product applying one matrix per mode.
inline Tensor3 multilinear_product(const Matrix& a, const Matrix& b, const Matrix& c,
                                   const Tensor3& g) {
  return mode_product(mode_product(mode_product(g, a, 1), b, 2), c, 3);
}

// X = (U, V, W) . G for a factor bundle.
inline Tensor3 assemble(const TuckerFactors& f) {
  return multilinear_product(f.U, f.V, f.W, f.G);
}

// Breve factors: bu = (W (x) V) M1(G)^T and cyclically, materialized as
// (n2*n3) x r1 etc.  These satisfy M1((U,V,W).G) = U * bu^T.
struct BreveFactors {
  Matrix bu;  // (n2*n3) x r1
  Matrix bv;  // (n1*n3) x r2
  Matrix bw;  // (n1*n2) x r3
};

inline BreveFactors breve_factors(const TuckerFactors& f) {
  BreveFactors b;
  b.bu = matricize(mode_product(mode_product(f.G, f.V, 2), f.W, 3), 1).transpose();
  b.bv = matricize(mode_product(mode_product(f.G, f.U, 1), f.W, 3), 2).transpose();
  b.bw = matricize(mode_product(mode_product(f.G, f.U, 1), f.V, 2), 3).transpose();
  return b;
}

// ---------------------------------------------------------------------------
// spectral kernels
// ---------------------------------------------------------------------------

// Top-r singular triplet, deterministic up to the sign convention above.
inline SvdResult svd_top_r(const Matrix& m, Index r) {
  require_dims(r >= 1 && r <= std::min(m.rows(), m.cols()),
               "svd_top_r: rank outside [1, min(rows, cols)]");
  Eigen::BDCSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  SvdResult out;
  out.U = svd.matrixU().leftCols(r);
  out.S = svd.singularValues().head(r);
  out.V = svd.matrixV().leftCols(r);
  fix_column_signs(out.U, &out.V);
  return out;
}

// Top-r eigenpairs (algebraic order) of a symmetric matrix.  The input must
// be symmetric to kSymmetryTol relative in Frobenius norm.
inline EigResult eig_top_r_sym(const Matrix& m, Index r) {
  require_dims(m.rows() == m.cols(), "eig_top_r_sym: matrix is not square");
  require_dims(r >= 1 && r <= m.rows(), "eig_top_r_sym: rank outside [1, n]");
  const double asym = (m - m.transpose()).norm();
  require_value(asym <= kSymmetryTol * std::max(1.0, m.norm()),
                "eig_top_r_sym: input is not symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m + m.transpose()));
  EigResult out;
  out.values = es.eigenvalues().tail(r).reverse();
  out.vectors = es.eigenvectors().rightCols(r).rowwise().reverse();
  fix_column_signs(out.vectors);
  return out;
}

// Higher-order SVD: factor k holds the top-r_k left singular vectors of the
// mode-k matricization (computed from the mode Gram), core = (U^T,V^T,W^T).T.
inline TuckerFactors hosvd(const Tensor3& t, Index r1, Index r2, Index r3) {
  const std::array<Index, 3> rr = {r1, r2, r3};
  TuckerFactors f;
  Matrix* dest[3] = {&f.U, &f.V, &f.W};
  for (int mode = 1; mode <= 3; ++mode) {
    require_dims(rr[mode - 1] >= 1 && rr[mode - 1] <= t.dim(mode),
                 "hosvd: rank outside [1, n_k]");
    const Matrix mk = matricize(t, mode);
    const Matrix gram = mk * mk.transpose();
    *dest[mode - 1] = eig_top_r_sym(gram, rr[mode - 1]).vectors;
  }
  f.G = multilinear_product(f.U.transpose(), f.V.transpose(), f.W.transpose(), t);
  return f;
}

// ---------------------------------------------------------------------------
// Gram solves
// ---------------------------------------------------------------------------

// X = gr * (b^T b + ridge I)^{-1} via a symmetric factorization.  With zero
// ridge, a Gram matrix whose smallest eigenvalue falls below
// pivot_floor * largest raises SingularGramError.
inline Matrix right_scale_solve(const Matrix& gr, const Matrix& b, double ridge = 0.0,
                                double pivot_floor = kPivotFloor) {
  require_dims(gr.cols() == b.cols(), "right_scale_solve: column count mismatch");
  require_value(ridge >= 0.0, "right_scale_solve: ridge must be >= 0");
  Matrix gram = b.transpose() * b;
  if (ridge > 0.0) gram.diagonal().array() += ridge;
  if (ridge == 0.0) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(gram, Eigen::EigenvaluesOnly);
    const double lo = es.eigenvalues().minCoeff();
    const double hi = es.eigenvalues().maxCoeff();
    if (hi <= 0.0 || lo < pivot_floor * hi)
      throw SingularGramError("right_scale_solve: Gram matrix is singular to working precision");
  }
  return gram.ldlt().solve(gr.transpose()).transpose();
}

// (b^T b + ridge I)^{-1} b^T — the preconditioned left pseudoinverse used in
// core updates; shares the pivot-floor contract above.
inline Matrix pinv_via_gram(const Matrix& b, double ridge = 0.0,
                            double pivot_floor = kPivotFloor) {
  return right_scale_solve(b, b, ridge, pivot_floor).transpose();
}

}  // namespace scaledgd
