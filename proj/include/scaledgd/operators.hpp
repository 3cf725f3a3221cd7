#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <limits>
#include <vector>

#include "scaledgd/linalg.hpp"
#include "scaledgd/rng.hpp"

namespace scaledgd {

// ---------------------------------------------------------------------------
// Gaussian sensing operator
// ---------------------------------------------------------------------------

// y_i = <A_i, X> with A_i entries i.i.d. N(0, 1/m), reproducible from the
// seed: measurement i draws its entries (in layout order) from substream i.
// Measurements are materialized as one m x N matrix when the footprint fits
// the budget, otherwise rows are regenerated from the seed on each apply.
class GaussianSensingOp {
 public:
  enum class Storage { materialized, regenerate };

  // Matrix-shaped operator.
  GaussianSensingOp(Index n1, Index n2, Index m, std::uint64_t seed)
      : GaussianSensingOp(std::vector<Index>{n1, n2}, m, seed) {}

  // Tensor-shaped operator.
  GaussianSensingOp(Index n1, Index n2, Index n3, Index m, std::uint64_t seed)
      : GaussianSensingOp(std::vector<Index>{n1, n2, n3}, m, seed) {}

  GaussianSensingOp(std::vector<Index> dims, Index m, std::uint64_t seed,
                    double materialize_budget = kMaterializeBudget)
      : dims_(std::move(dims)), m_(m), seed_(seed) {
    require_value(dims_.size() == 2 || dims_.size() == 3,
                  "GaussianSensingOp: shape must be a matrix or a 3-tensor");
    require_value(m_ >= 1, "GaussianSensingOp: m must be >= 1");
    n_total_ = 1;
    for (Index d : dims_) {
      require_value(d >= 1, "GaussianSensingOp: dimensions must be >= 1");
      n_total_ *= d;
    }
    storage_ = (static_cast<double>(m_) * static_cast<double>(n_total_) <= materialize_budget)
                   ? Storage::materialized
                   : Storage::regenerate;
    if (storage_ == Storage::materialized) {
      a_.resize(m_, n_total_);
      for (Index i = 0; i < m_; ++i) a_.row(i) = measurement_row(i).transpose();
    }
  }

  static constexpr double kMaterializeBudget = 2e8;  // doubles

  Index m() const { return m_; }
  Index n_total() const { return n_total_; }
  const std::vector<Index>& dims() const { return dims_; }
  std::uint64_t seed() const { return seed_; }
  Storage storage() const { return storage_; }

  // Flat measurement i (layout order), regenerated from its substream.
  Vector measurement_row(Index i) const {
    CounterRng rng(seed_, static_cast<std::uint64_t>(i));
    Vector row(n_total_);
    const double stddev = 1.0 / std::sqrt(static_cast<double>(m_));
    for (Index k = 0; k < n_total_; ++k) row[k] = stddev * rng.normal();
    return row;
  }

  Vector apply_flat(const Eigen::Ref<const Vector>& x) const {
    require_dims(x.size() == n_total_, "GaussianSensingOp::apply: size mismatch");
    ++apply_count_;
    if (storage_ == Storage::materialized) return a_ * x;
    Vector y(m_);
    for (Index i = 0; i < m_; ++i) y[i] = measurement_row(i).dot(x);
    return y;
  }

  Vector apply(const Matrix& x) const {
    require_dims(dims_.size() == 2 && x.rows() == dims_[0] && x.cols() == dims_[1],
                 "GaussianSensingOp::apply: matrix shape mismatch");
    return apply_flat(flatten(x));
  }

  Vector apply(const Tensor3& x) const {
    require_dims(dims_.size() == 3 && x.n1() == dims_[0] && x.n2() == dims_[1] &&
                     x.n3() == dims_[2],
                 "GaussianSensingOp::apply: tensor shape mismatch");
    return apply_flat(x.vec());
  }

  Vector adjoint_flat(const Eigen::Ref<const Vector>& y) const {
    require_dims(y.size() == m_, "GaussianSensingOp::adjoint: size mismatch");
    ++adjoint_count_;
    if (storage_ == Storage::materialized) return a_.transpose() * y;
    Vector x = Vector::Zero(n_total_);
    for (Index i = 0; i < m_; ++i) x += y[i] * measurement_row(i);
    return x;
  }

  Matrix adjoint_matrix(const Eigen::Ref<const Vector>& y) const {
    require_dims(dims_.size() == 2, "GaussianSensingOp::adjoint_matrix: operator is tensor-shaped");
    const Vector x = adjoint_flat(y);
    return Eigen::Map<const Matrix>(x.data(), dims_[0], dims_[1]);
  }

  Tensor3 adjoint_tensor(const Eigen::Ref<const Vector>& y) const {
    require_dims(dims_.size() == 3, "GaussianSensingOp::adjoint_tensor: operator is matrix-shaped");
    return Tensor3(dims_[0], dims_[1], dims_[2], adjoint_flat(y));
  }

  // Operation counters (performance contract: one apply/adjoint pair per
  // solver iteration).  Reset before measuring.
  long apply_count() const { return apply_count_; }
  long adjoint_count() const { return adjoint_count_; }
  void reset_counters() const { apply_count_ = adjoint_count_ = 0; }

 private:
  std::vector<Index> dims_;
  Index m_ = 0;
  Index n_total_ = 0;
  std::uint64_t seed_ = 0;
  Storage storage_ = Storage::materialized;
  Matrix a_;  // m x n_total when materialized
  mutable long apply_count_ = 0;
  mutable long adjoint_count_ = 0;
};

// ---------------------------------------------------------------------------
// observation mask
// ---------------------------------------------------------------------------

// Bernoulli(p) mask over matrix or tensor entries; holds the sorted list of
// observed linear indices (layout order).
class ObservationMask {
 public:
  ObservationMask(Index n1, Index n2, double p, std::uint64_t seed)
      : ObservationMask(std::vector<Index>{n1, n2}, p, seed) {}
  ObservationMask(Index n1, Index n2, Index n3, double p, std::uint64_t seed)
      : ObservationMask(std::vector<Index>{n1, n2, n3}, p, seed) {}

  ObservationMask(std::vector<Index> dims, double p, std::uint64_t seed)
      : dims_(std::move(dims)), p_(p), seed_(seed) {
    require_value(dims_.size() == 2 || dims_.size() == 3,
                  "ObservationMask: shape must be a matrix or a 3-tensor");
    require_value(p >= 0.0 && p <= 1.0, "ObservationMask: p must lie in [0, 1]");
    Index n_total = 1;
    for (Index d : dims_) {
      require_value(d >= 1, "ObservationMask: dimensions must be >= 1");
      n_total *= d;
    }
    n_total_ = n_total;
    CounterRng rng(seed, /*stream=*/0);
    for (Index k = 0; k < n_total; ++k)
      if (rng.uniform() < p_) indices_.push_back(static_cast<std::uint64_t>(k));
  }

  const std::vector<Index>& dims() const { return dims_; }
  double p() const { return p_; }
  std::uint64_t seed() const { return seed_; }
  Index n_total() const { return n_total_; }
  Index count() const { return static_cast<Index>(indices_.size()); }
  double observed_fraction() const {
    return n_total_ == 0 ? 0.0 : static_cast<double>(count()) / static_cast<double>(n_total_);
  }
  const std::vector<std::uint64_t>& indices() const { return indices_; }

  Matrix project(const Matrix& x) const {
    require_dims(dims_.size() == 2 && x.rows() == dims_[0] && x.cols() == dims_[1],
                 "ObservationMask::project: matrix shape mismatch");
    Matrix out = Matrix::Zero(x.rows(), x.cols());
    const double* src = x.data();
    double* dst = out.data();
    for (std::uint64_t k : indices_) dst[k] = src[k];
    return out;
  }

  Tensor3 project(const Tensor3& x) const {
    require_dims(dims_.size() == 3 && x.n1() == dims_[0] && x.n2() == dims_[1] &&
                     x.n3() == dims_[2],
                 "ObservationMask::project: tensor shape mismatch");
    Tensor3 out(x.n1(), x.n2(), x.n3());
    const double* src = x.data();
    double* dst = out.data();
    for (std::uint64_t k : indices_) dst[k] = src[k];
    return out;
  }

  // One 0-based index tuple per line, sorted.
  void save(const std::string& path) const {
    std::ofstream f(path);
    if (!f) throw IoError("ObservationMask::save: cannot open " + path);
    for (std::uint64_t k : indices_) {
      if (dims_.size() == 2) {
        f << (k % dims_[0]) << "," << (k / dims_[0]) << "\n";
      } else {
        const Index n1 = dims_[0], n2 = dims_[1];
        f << (k % n1) << "," << ((k / n1) % n2) << "," << (k / (n1 * n2)) << "\n";
      }
    }
    if (!f) throw IoError("ObservationMask::save: write failed for " + path);
  }

 private:
  std::vector<Index> dims_;
  double p_ = 0.0;
  std::uint64_t seed_ = 0;
  Index n_total_ = 0;
  std::vector<std::uint64_t> indices_;
};

// ---------------------------------------------------------------------------
// entrywise operators
// ---------------------------------------------------------------------------

inline double soft_shrink(double x, double zeta) {
  const double a = std::abs(x) - zeta;
  return a > 0.0 ? (x > 0.0 ? a : -a) : 0.0;
}

inline Matrix soft_shrink(const Matrix& x, double zeta) {
  require_value(zeta >= 0.0, "soft_shrink: threshold must be >= 0");
  return x.unaryExpr([zeta](double v) { return soft_shrink(v, zeta); });
}

inline Tensor3 soft_shrink(const Tensor3& x, double zeta) {
  require_value(zeta >= 0.0, "soft_shrink: threshold must be >= 0");
  Tensor3 out(x.n1(), x.n2(), x.n3());
  out.vec() = x.vec().unaryExpr([zeta](double v) { return soft_shrink(v, zeta); });
  return out;
}

namespace detail {

// ceil with a snap to nearby integers so FP dust in alpha*n cannot shift the
// order statistic (e.g. 0.2 * 10 = 2.0000000000000004 must give k = 2).
inline Index tolerant_ceil(double x) {
  const double r = std::nearbyint(x);
  if (std::abs(x - r) < 1e-9) return static_cast<Index>(r);
  return static_cast<Index>(std::ceil(x));
}

// k-th largest magnitude (1-based) of each row of |m| stacked into thresholds;
// k == 0 -> +inf (keep nothing), k >= len -> the minimum magnitude.
inline Vector kth_largest_rows(const Matrix& m, Index k) {
  const Index rows = m.rows(), cols = m.cols();
  Vector thr(rows);
  if (k <= 0) {
    thr.setConstant(std::numeric_limits<double>::infinity());
    return thr;
  }
  std::vector<double> buf(static_cast<std::size_t>(cols));
  const Index kk = std::min(k, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) buf[static_cast<std::size_t>(j)] = std::abs(m(i, j));
    std::nth_element(buf.begin(), buf.begin() + (kk - 1), buf.end(), std::greater<double>());
    thr[i] = buf[static_cast<std::size_t>(kk - 1)];
  }
  return thr;
}

}  // namespace detail

// Order-statistic truncation: entry (i,j) survives iff it is at least the
// k2-th largest magnitude in its row (k2 = ceil(alpha*n2)) and the k1-th
// largest in its column (k1 = ceil(alpha*n1)).  Ties at the cutoff are kept;
// alpha = 0 zeroes everything, alpha = 1 keeps everything.
inline Matrix truncate_rows_cols(const Matrix& m, double alpha) {
  require_value(alpha >= 0.0 && alpha <= 1.0, "truncate_rows_cols: alpha must lie in [0, 1]");
  const Index k_row = detail::tolerant_ceil(alpha * static_cast<double>(m.cols()));
  const Index k_col = detail::tolerant_ceil(alpha * static_cast<double>(m.rows()));
  const Vector row_thr = detail::kth_largest_rows(m, k_row);
  const Vector col_thr = detail::kth_largest_rows(Matrix(m.transpose()), k_col);
  Matrix out = Matrix::Zero(m.rows(), m.cols());
  for (Index j = 0; j < m.cols(); ++j)
    for (Index i = 0; i < m.rows(); ++i) {
      const double a = std::abs(m(i, j));
      if (a >= row_thr[i] && a >= col_thr[j]) out(i, j) = m(i, j);
    }
  return out;
}

// ---------------------------------------------------------------------------
// scaled projections
// ---------------------------------------------------------------------------

namespace detail {

// Scales rows of x by min(1, B / (sqrt(n) * cross_norm_i)); cross norms come
// from the Gram of the complementary factor.  Zero-norm rows pass unscaled.
inline void scale_rows_by_cross_norm(Matrix& x, const Matrix& gram, double b, bool* clipped) {
  const Vector cross = ((x * gram).cwiseProduct(x)).rowwise().sum();
  const double sqrt_n = std::sqrt(static_cast<double>(x.rows()));
  for (Index i = 0; i < x.rows(); ++i) {
    const double nrm = std::sqrt(std::max(cross[i], 0.0));
    if (nrm > 0.0 && sqrt_n * nrm > b) {
      x.row(i) *= b / (sqrt_n * nrm);
      if (clipped) *clipped = true;
    }
  }
}

}  // namespace detail

// Row i of L is scaled by min(1, B / (sqrt(n1) * ||(L R^T)_i||)), with the
// cross norms taken from the *input* factors; analogously for R with n2.
// Zero-norm rows pass through unscaled.  `any_clipped` (optional) reports
// whether any row was actually rescaled.
inline MatrixFactors scaled_project_matrix(const MatrixFactors& f, double b,
                                           bool* any_clipped = nullptr) {
  require_value(b > 0.0, "scaled_project_matrix: B must be > 0");
  require_dims(f.L.cols() == f.R.cols(), "scaled_project_matrix: factor rank mismatch");
  if (any_clipped) *any_clipped = false;
  const Matrix gl = f.R.transpose() * f.R;
  const Matrix gr = f.L.transpose() * f.L;
  MatrixFactors out = f;
  detail::scale_rows_by_cross_norm(out.L, gl, b, any_clipped);
  detail::scale_rows_by_cross_norm(out.R, gr, b, any_clipped);
  return out;
}

// Tucker analogue: factor rows are scaled against their breve-factor cross
// norms (computed from the input bundle); the core passes through.
inline TuckerFactors scaled_project_tensor(const TuckerFactors& f, double b,
                                           bool* any_clipped = nullptr) {
  require_value(b > 0.0, "scaled_project_tensor: B must be > 0");
  if (any_clipped) *any_clipped = false;
  const BreveFactors br = breve_factors(f);
  TuckerFactors out = f;
  detail::scale_rows_by_cross_norm(out.U, Matrix(br.bu.transpose() * br.bu), b, any_clipped);
  detail::scale_rows_by_cross_norm(out.V, Matrix(br.bv.transpose() * br.bv), b, any_clipped);
  detail::scale_rows_by_cross_norm(out.W, Matrix(br.bw.transpose() * br.bw), b, any_clipped);
  return out;
}

}  // namespace scaledgd
