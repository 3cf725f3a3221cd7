#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "scaledgd/operators.hpp"

namespace scaledgd {

// ---------------------------------------------------------------------------
// convergence traces
// ---------------------------------------------------------------------------

struct IterRecord {
  int t = 0;
  double rel_error_fro = 0.0;  // ||X_t - X*||_F / ||X*||_F (observable residual without truth)
  double rel_error_inf = 0.0;  // ||X_t - X*||_inf / ||X*||_F (same denominator, comparable columns)
  double wall_time_s = 0.0;    // cumulative, excluded from determinism comparisons
  std::string event;           // "", "switch", "proj", ...
};

struct ConvergenceTrace {
  std::vector<IterRecord> iterations;

  bool empty() const { return iterations.empty(); }
  const IterRecord& back() const { return iterations.back(); }
};

// First t whose rel_error_fro is <= tol, or -1 when never reached.
inline int iterations_to_tol(const ConvergenceTrace& trace, double tol) {
  for (const IterRecord& r : trace.iterations)
    if (r.rel_error_fro <= tol) return r.t;
  return -1;
}

// ---------------------------------------------------------------------------
// ground truth generators
// ---------------------------------------------------------------------------

struct GroundTruthSpec {
  std::array<Index, 3> dims = {0, 0, 1};   // {n1, n2, 1} for matrices
  std::array<Index, 3> ranks = {0, 0, 1};  // {r, r, 1} for matrices
  double kappa = 1.0;
  double sigma_max = 1.0;
  bool symmetric = false;  // matrices only: X = U diag(sigma) U^T (PSD)
  std::uint64_t seed = 0;
};

struct MatrixTruth {
  Matrix X;
  Matrix U;              // n1 x r orthonormal
  Matrix V;              // n2 x r orthonormal (== U when symmetric)
  Vector sigma;          // linearly spaced from sigma_max down to sigma_max/kappa
  MatrixFactors factors;  // L* = U diag(sigma)^{1/2}, R* = V diag(sigma)^{1/2}
};

struct TensorTruth {
  Tensor3 X;
  TuckerFactors F;  // orthonormal factors, core matricizations with prescribed spectra
};

// Haar-ish orthonormal basis: thin Q of a Gaussian matrix, canonical signs.
inline Matrix random_orthonormal(CounterRng& rng, Index n, Index r) {
  require_dims(r >= 1 && r <= n, "random_orthonormal: rank outside [1, n]");
  const Matrix g = gaussian_matrix(rng, n, r);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ() * Matrix::Identity(n, r);
  fix_column_signs(q);
  return q;
}

namespace detail {

// Planted singular values: linearly spaced from sigma_max down to
// sigma_max / kappa, the customary construction for condition-number sweeps.
inline Vector linear_sigmas(Index r, double sigma_max, double kappa) {
  Vector s(r);
  const double lo = sigma_max / kappa;
  for (Index i = 0; i < r; ++i)
    s[i] = r == 1 ? sigma_max
                  : sigma_max + (lo - sigma_max) * static_cast<double>(i) /
                                    static_cast<double>(r - 1);
  return s;
}

}  // namespace detail

inline MatrixTruth gen_matrix_truth(const GroundTruthSpec& spec) {
  const Index n1 = spec.dims[0], n2 = spec.dims[1], r = spec.ranks[0];
  require_value(spec.kappa >= 1.0, "gen_matrix_truth: kappa must be >= 1");
  require_value(spec.sigma_max > 0.0, "gen_matrix_truth: sigma_max must be > 0");
  require_dims(r >= 1 && r <= std::min(n1, n2), "gen_matrix_truth: rank outside [1, min(n1,n2)]");
  require_dims(!spec.symmetric || n1 == n2, "gen_matrix_truth: symmetric truth needs n1 == n2");
  MatrixTruth t;
  CounterRng rng_u(spec.seed, 1), rng_v(spec.seed, 2);
  t.U = random_orthonormal(rng_u, n1, r);
  t.V = spec.symmetric ? t.U : random_orthonormal(rng_v, n2, r);
  t.sigma = detail::linear_sigmas(r, spec.sigma_max, spec.kappa);
  t.X = t.U * t.sigma.asDiagonal() * t.V.transpose();
  const Vector root = t.sigma.cwiseSqrt();
  t.factors.L = t.U * root.asDiagonal();
  t.factors.R = t.V * root.asDiagonal();
  return t;
}

// Generic core construction: start from a Gaussian core and alternately
// reimpose the linearly spaced target spectrum on each mode matricization.
// At equal ranks the sweeps converge to a core whose three mode spectra all
// match the target essentially exactly; at unequal ranks the constraints are
// mutually infeasible in general and the result carries a small residual
// slack.  A dense core spreads the weak directions across many rank-one
// components, which reproduces the condition-number-free behaviour of the
// completion solvers much more faithfully than a superdiagonal core, whose
// isolated weakest component is needlessly fragile under subsampling.
inline TensorTruth gen_tensor_truth(const GroundTruthSpec& spec) {
  const Index n1 = spec.dims[0], n2 = spec.dims[1], n3 = spec.dims[2];
  const Index r1 = spec.ranks[0], r2 = spec.ranks[1], r3 = spec.ranks[2];
  require_value(spec.kappa >= 1.0, "gen_tensor_truth: kappa must be >= 1");
  require_value(spec.sigma_max > 0.0, "gen_tensor_truth: sigma_max must be > 0");
  require_dims(r1 >= 1 && r1 <= n1 && r2 >= 1 && r2 <= n2 && r3 >= 1 && r3 <= n3,
               "gen_tensor_truth: ranks outside [1, n_k]");
  require_dims(r1 <= r2 * r3 && r2 <= r1 * r3 && r3 <= r1 * r2,
               "gen_tensor_truth: ranks violate the Tucker feasibility bound");
  TensorTruth t;
  CounterRng rng_u(spec.seed, 1), rng_v(spec.seed, 2), rng_w(spec.seed, 3), rng_g(spec.seed, 4);
  t.F.U = random_orthonormal(rng_u, n1, r1);
  t.F.V = random_orthonormal(rng_v, n2, r2);
  t.F.W = random_orthonormal(rng_w, n3, r3);
  Tensor3 core = gaussian_tensor(rng_g, r1, r2, r3);
  const std::array<Index, 3> rr = {r1, r2, r3};
  for (int sweep = 0; sweep < 12; ++sweep) {
    for (int mode = 1; mode <= 3; ++mode) {
      const Index rk = rr[static_cast<std::size_t>(mode - 1)];
      const Matrix mk = matricize(core, mode);
      Eigen::BDCSVD<Matrix> svd(mk, Eigen::ComputeThinU | Eigen::ComputeThinV);
      const Vector target = detail::linear_sigmas(rk, spec.sigma_max, spec.kappa);
      const Matrix rebuilt = svd.matrixU() * target.asDiagonal() * svd.matrixV().transpose();
      core = tensorize(rebuilt, mode, r1, r2, r3);
    }
  }
  t.F.G = core;
  t.X = assemble(t.F);
  return t;
}

// ---------------------------------------------------------------------------
// sparse corruption
// ---------------------------------------------------------------------------

struct CorruptionSpec {
  double alpha = 0.0;             // per-fiber nonzero fraction bound
  double magnitude_scale = 10.0;  // entries uniform in [-scale*||X||_inf, scale*||X||_inf]
  std::uint64_t seed = 0;
};

struct SparseCorruptionMatrix {
  Matrix S;
  bool degenerate = false;  // alpha > 0 but floor(alpha*n) == 0 on some fiber
};

struct SparseCorruptionTensor {
  Tensor3 S;
  bool degenerate = false;
};

namespace detail {

inline Index tolerant_floor(double x) {
  const double r = std::nearbyint(x);
  if (std::abs(x - r) < 1e-9) return static_cast<Index>(r);
  return static_cast<Index>(std::floor(x));
}

}  // namespace detail

// Rejection-sampled support: each row keeps <= floor(alpha*n2) nonzeros and
// each column <= floor(alpha*n1).  x_inf scales the magnitudes.
inline SparseCorruptionMatrix gen_sparse_corruption(const CorruptionSpec& spec, Index n1,
                                                    Index n2, double x_inf) {
  require_value(spec.alpha >= 0.0 && spec.alpha < 0.5,
                "gen_sparse_corruption: alpha must lie in [0, 1/2)");
  require_value(x_inf >= 0.0, "gen_sparse_corruption: scale must be >= 0");
  SparseCorruptionMatrix out;
  out.S = Matrix::Zero(n1, n2);
  const Index cap_row = detail::tolerant_floor(spec.alpha * static_cast<double>(n2));
  const Index cap_col = detail::tolerant_floor(spec.alpha * static_cast<double>(n1));
  if (cap_row == 0 || cap_col == 0) {
    out.degenerate = spec.alpha > 0.0;
    return out;
  }
  std::vector<Index> row_cnt(static_cast<std::size_t>(n1), 0);
  std::vector<Index> col_cnt(static_cast<std::size_t>(n2), 0);
  std::vector<char> placed(static_cast<std::size_t>(n1 * n2), 0);
  CounterRng rng(spec.seed, /*stream=*/0);
  const double amp = spec.magnitude_scale * x_inf;
  const long attempts = 10L * static_cast<long>(n1) * static_cast<long>(n2);
  for (long a = 0; a < attempts; ++a) {
    const Index i = std::min<Index>(static_cast<Index>(rng.uniform() * n1), n1 - 1);
    const Index j = std::min<Index>(static_cast<Index>(rng.uniform() * n2), n2 - 1);
    const std::size_t flat = static_cast<std::size_t>(i + n1 * j);
    if (placed[flat] || row_cnt[static_cast<std::size_t>(i)] >= cap_row ||
        col_cnt[static_cast<std::size_t>(j)] >= cap_col)
      continue;
    placed[flat] = 1;
    ++row_cnt[static_cast<std::size_t>(i)];
    ++col_cnt[static_cast<std::size_t>(j)];
    out.S(i, j) = amp * (2.0 * rng.uniform() - 1.0);
  }
  return out;
}

// Tensor analogue: every mode-k fiber keeps <= floor(alpha*n_k) nonzeros.
inline SparseCorruptionTensor gen_sparse_corruption(const CorruptionSpec& spec, Index n1,
                                                    Index n2, Index n3, double x_inf) {
  require_value(spec.alpha >= 0.0 && spec.alpha < 0.5,
                "gen_sparse_corruption: alpha must lie in [0, 1/2)");
  require_value(x_inf >= 0.0, "gen_sparse_corruption: scale must be >= 0");
  SparseCorruptionTensor out;
  out.S = Tensor3(n1, n2, n3);
  const Index cap1 = detail::tolerant_floor(spec.alpha * static_cast<double>(n1));
  const Index cap2 = detail::tolerant_floor(spec.alpha * static_cast<double>(n2));
  const Index cap3 = detail::tolerant_floor(spec.alpha * static_cast<double>(n3));
  if (cap1 == 0 || cap2 == 0 || cap3 == 0) {
    out.degenerate = spec.alpha > 0.0;
    return out;
  }
  std::vector<Index> cnt1(static_cast<std::size_t>(n2 * n3), 0);  // fibers (:, i2, i3)
  std::vector<Index> cnt2(static_cast<std::size_t>(n1 * n3), 0);  // fibers (i1, :, i3)
  std::vector<Index> cnt3(static_cast<std::size_t>(n1 * n2), 0);  // fibers (i1, i2, :)
  std::vector<char> placed(static_cast<std::size_t>(n1 * n2 * n3), 0);
  CounterRng rng(spec.seed, /*stream=*/0);
  const double amp = spec.magnitude_scale * x_inf;
  const long attempts = 10L * static_cast<long>(n1) * static_cast<long>(n2) * static_cast<long>(n3);
  for (long a = 0; a < attempts; ++a) {
    const Index i1 = std::min<Index>(static_cast<Index>(rng.uniform() * n1), n1 - 1);
    const Index i2 = std::min<Index>(static_cast<Index>(rng.uniform() * n2), n2 - 1);
    const Index i3 = std::min<Index>(static_cast<Index>(rng.uniform() * n3), n3 - 1);
    const std::size_t flat = static_cast<std::size_t>(i1 + n1 * (i2 + n2 * i3));
    const std::size_t f1 = static_cast<std::size_t>(i2 + n2 * i3);
    const std::size_t f2 = static_cast<std::size_t>(i1 + n1 * i3);
    const std::size_t f3 = static_cast<std::size_t>(i1 + n1 * i2);
    if (placed[flat] || cnt1[f1] >= cap1 || cnt2[f2] >= cap2 || cnt3[f3] >= cap3) continue;
    placed[flat] = 1;
    ++cnt1[f1];
    ++cnt2[f2];
    ++cnt3[f3];
    out.S(i1, i2, i3) = amp * (2.0 * rng.uniform() - 1.0);
  }
  return out;
}

// ---------------------------------------------------------------------------
// spectral statistics and incoherence
// ---------------------------------------------------------------------------

struct SpectralStats {
  double sigma_max = 0.0;
  double sigma_min = 0.0;
  double kappa = 0.0;
  bool kappa_finite = true;
};

namespace detail {

inline SpectralStats stats_from(double smax, double smin) {
  SpectralStats s;
  s.sigma_max = smax;
  s.sigma_min = smin;
  if (smin < 1e-14 * smax || smax == 0.0) {
    s.kappa = std::numeric_limits<double>::infinity();
    s.kappa_finite = false;
  } else {
    s.kappa = smax / smin;
  }
  return s;
}

}  // namespace detail

inline SpectralStats spectral_stats(const Matrix& x, Index r) {
  require_dims(r >= 1 && r <= std::min(x.rows(), x.cols()),
               "spectral_stats: rank outside [1, min(rows, cols)]");
  Eigen::BDCSVD<Matrix> svd(x);
  const Vector& s = svd.singularValues();
  return detail::stats_from(s[0], s[r - 1]);
}

// Tensor: sigma_max = max_k sigma_1(M_k), sigma_min = min_k sigma_{r_k}(M_k),
// computed from the mode Grams.
inline SpectralStats spectral_stats(const Tensor3& x, Index r1, Index r2, Index r3) {
  const std::array<Index, 3> rr = {r1, r2, r3};
  double smax = 0.0;
  double smin = std::numeric_limits<double>::infinity();
  for (int mode = 1; mode <= 3; ++mode) {
    const Index rk = rr[static_cast<std::size_t>(mode - 1)];
    require_dims(rk >= 1 && rk <= x.dim(mode), "spectral_stats: rank outside [1, n_k]");
    const Matrix mk = matricize(x, mode);
    const Matrix gram = mk * mk.transpose();
    Eigen::SelfAdjointEigenSolver<Matrix> es(gram, Eigen::EigenvaluesOnly);
    const Vector& ev = es.eigenvalues();  // ascending
    const Index n = ev.size();
    smax = std::max(smax, std::sqrt(std::max(ev[n - 1], 0.0)));
    smin = std::min(smin, std::sqrt(std::max(ev[n - rk], 0.0)));
  }
  return detail::stats_from(smax, smin);
}

namespace detail {

inline void check_orthonormal(const Matrix& u, const char* what) {
  const Matrix g = u.transpose() * u - Matrix::Identity(u.cols(), u.cols());
  require_value(g.cwiseAbs().maxCoeff() <= 1e-8,
                std::string(what) + ": factor columns are not orthonormal");
}

inline double mu_of(const Matrix& u) {
  const double row_max_sq = u.rowwise().squaredNorm().maxCoeff();
  return static_cast<double>(u.rows()) / static_cast<double>(u.cols()) * row_max_sq;
}

}  // namespace detail

// mu = max over the factor matrices of (n/r) * max_i ||row_i||^2; inputs must
// have orthonormal columns.
inline double incoherence(const Matrix& u, const Matrix& v) {
  detail::check_orthonormal(u, "incoherence");
  detail::check_orthonormal(v, "incoherence");
  return std::max(detail::mu_of(u), detail::mu_of(v));
}

inline double incoherence(const Matrix& u, const Matrix& v, const Matrix& w) {
  detail::check_orthonormal(u, "incoherence");
  detail::check_orthonormal(v, "incoherence");
  detail::check_orthonormal(w, "incoherence");
  return std::max({detail::mu_of(u), detail::mu_of(v), detail::mu_of(w)});
}

// ---------------------------------------------------------------------------
// factor distance metric
// ---------------------------------------------------------------------------

struct DistResult {
  double value = 0.0;
  bool q_singular = false;  // some start hit a numerically singular Q
};

namespace detail {

struct DistProblem {
  const Matrix& l;
  const Matrix& lstar;
  const Matrix& r;
  const Matrix& rstar;
  const Vector& sigma;

  // f(Q) = ||(L Q - L*) S^{1/2}||_F^2 + ||(R Q^{-T} - R*) S^{1/2}||_F^2;
  // returns infinity when Q is numerically singular.
  double eval(const Matrix& q, Matrix* qinv_out = nullptr) const {
    Eigen::PartialPivLU<Matrix> lu(q);
    const Vector d = lu.matrixLU().diagonal().cwiseAbs();
    if (d.minCoeff() < 1e-14 * std::max(1.0, d.maxCoeff()))
      return std::numeric_limits<double>::infinity();
    const Matrix qinv = lu.inverse();
    if (qinv_out) *qinv_out = qinv;
    const Matrix dl = (l * q - lstar) * sigma.cwiseSqrt().asDiagonal();
    const Matrix dr = (r * qinv.transpose() - rstar) * sigma.cwiseSqrt().asDiagonal();
    return dl.squaredNorm() + dr.squaredNorm();
  }

  Matrix grad(const Matrix& q, const Matrix& qinv) const {
    const Matrix gl = 2.0 * l.transpose() * (l * q - lstar) * sigma.asDiagonal();
    const Matrix dr = r * qinv.transpose() - rstar;
    const Matrix gr = -2.0 * qinv * (r.transpose() * dr) * sigma.asDiagonal() * qinv;
    return gl + gr;
  }
};

}  // namespace detail

// dist^2(F, F*): gradient descent over Q in GL(r) (step 0.1/sigma_max, 500
// iterations, backtracking keeps the objective monotone), minimized over the
// identity start, a least-squares balancing start, and 5 random restarts.
inline DistResult dist_factor_metric(const MatrixFactors& f, const MatrixFactors& fstar,
                                     const Vector& sigma) {
  const Index r = f.L.cols();
  require_dims(f.R.cols() == r && fstar.L.cols() == r && fstar.R.cols() == r &&
                   f.L.rows() == fstar.L.rows() && f.R.rows() == fstar.R.rows() &&
                   sigma.size() == r,
               "dist_factor_metric: factor shapes disagree");
  require_value(sigma.minCoeff() > 0.0, "dist_factor_metric: sigma must be positive");
  const detail::DistProblem prob{f.L, fstar.L, f.R, fstar.R, sigma};
  const double base_step = 0.1 / sigma.maxCoeff();

  std::vector<Matrix> starts;
  starts.push_back(Matrix::Identity(r, r));
  {
    // Balancing start: least-squares alignment of L onto L*.
    const Matrix g = f.L.transpose() * f.L;
    Eigen::SelfAdjointEigenSolver<Matrix> es(g, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() > 1e-12 * std::max(1.0, es.eigenvalues().maxCoeff()))
      starts.push_back(g.ldlt().solve(f.L.transpose() * fstar.L));
  }
  CounterRng rng(0x5ca1ab1eULL, 0);
  for (int k = 0; k < 5; ++k)
    starts.push_back(Matrix::Identity(r, r) + 0.1 * gaussian_matrix(rng, r, r));

  DistResult out;
  out.value = std::numeric_limits<double>::infinity();
  for (const Matrix& q0 : starts) {
    Matrix q = q0;
    Matrix qinv;
    double fval = prob.eval(q, &qinv);
    if (!std::isfinite(fval)) {
      out.q_singular = true;
      continue;
    }
    for (int it = 0; it < 500; ++it) {
      const Matrix g = prob.grad(q, qinv);
      double step = base_step;
      bool moved = false;
      for (int bt = 0; bt < 40; ++bt) {
        Matrix q_next = q - step * g;
        Matrix qinv_next;
        const double f_next = prob.eval(q_next, &qinv_next);
        if (!std::isfinite(f_next)) out.q_singular = true;
        if (f_next <= fval) {
          q = std::move(q_next);
          qinv = std::move(qinv_next);
          moved = f_next < fval;
          fval = f_next;
          break;
        }
        step *= 0.5;
      }
      if (!moved) break;
    }
    out.value = std::min(out.value, fval);
  }
  return out;
}

}  // namespace scaledgd
