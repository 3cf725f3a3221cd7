#pragma once

#include "scaledgd/solvers_common.hpp"

namespace scaledgd {

// Mixed-init switch: continue with lambda = 0 once sigma_min(L_t)^2 reaches
// this multiple of lambda.
inline constexpr double kMixedSwitchFactor = 10.0;

struct MatrixSolverConfig {
  Index rank = 1;
  double step_size = 0.0;  // 0 -> per-problem default
  int max_iters = 100;
  double stop_tol = 0.0;   // 0 -> run all iterations; with truth: rel error, else rel change
  bool vanilla = false;    // identity preconditioners, step rescaled by 1/sigma_1(X_0)
  double alpha = 0.0;      // RPCA: per-fiber corruption fraction (iterations truncate at 2*alpha)
  std::optional<double> projection_radius;  // completion B; default from init estimates
  double lambda = 0.0;      // ridge for overparameterized variants
  double init_scale = 1e-6;  // ScaledGD(lambda) init: L_0 = init_scale * G
  bool mixed_init = false;   // ScaledGD(lambda): drop lambda once sigma_min^2 >= 10*lambda
  std::uint64_t seed = 0;    // solver-internal randomness (random init)
  bool record_iterates = false;
  std::optional<MatrixFactors> init;  // warm start override (skips spectral init)
};

struct MatrixSolveResult {
  MatrixFactors factors;
  Matrix estimate;         // final X
  Matrix sparse_estimate;  // RPCA: final S (empty otherwise)
  ConvergenceTrace trace;
  SolveStatus status = SolveStatus::max_iters;
  int iterations = 0;
  long residual_evals = 0;
  std::optional<int> switch_iteration;  // mixed-init: first lambda = 0 update
  std::string note;
  std::vector<Matrix> iterates;  // filled when cfg.record_iterates
};

namespace detail {

inline double top_singular_value(const Matrix& x) {
  Eigen::BDCSVD<Matrix> svd(x);
  return svd.singularValues()[0];
}

// Shared iteration driver for the matrix solvers.  `compute_errors` maps the
// current X to the trace columns; `do_update` advances the factors (returning
// false on a singular preconditioner is handled via exceptions instead).
struct MatrixLoop {
  const MatrixSolverConfig& cfg;
  const Matrix* truth;
  double truth_fro = 0.0;
  TraceClock clock;
  MatrixSolveResult* res;
  Matrix prev_x;
  std::string pending_event;

  MatrixLoop(const MatrixSolverConfig& c, const Matrix* tr, MatrixSolveResult* r)
      : cfg(c), truth(tr), res(r) {
    if (truth) truth_fro = truth->norm();
  }

  // Records row t; returns true when the loop should stop (tol or budget).
  bool record_and_check(int t, const Matrix& x, const ErrPair& obs_errors) {
    ErrPair e = truth ? errors_vs_truth(x, *truth, truth_fro) : obs_errors;
    res->trace.iterations.push_back({t, e.fro, e.inf, clock.elapsed(), pending_event});
    pending_event.clear();
    if (cfg.record_iterates) res->iterates.push_back(x);
    bool stop = false;
    if (cfg.stop_tol > 0.0) {
      if (truth) {
        stop = e.fro <= cfg.stop_tol;
      } else if (t > 0) {
        stop = rel_change((x - prev_x).norm(), x.norm()) <= cfg.stop_tol;
      }
    }
    if (stop) {
      res->status = SolveStatus::converged;
      res->iterations = t;
      return true;
    }
    if (t >= cfg.max_iters) {
      res->status = SolveStatus::max_iters;
      res->iterations = t;
      return true;
    }
    prev_x = x;
    return false;
  }
};

}  // namespace detail

// ---------------------------------------------------------------------------
// matrix sensing
// ---------------------------------------------------------------------------

// ScaledGD for A(L R^T) ~ y.  Init: top-r factorization of A*(y).  A ridge
// (cfg.lambda > 0) gives the overparameterized variant.
inline MatrixSolveResult solve_matrix_sensing(const GaussianSensingOp& op, const Vector& y,
                                              const MatrixSolverConfig& cfg,
                                              const Matrix* truth = nullptr) {
  require_dims(op.dims().size() == 2, "solve_matrix_sensing: operator must be matrix-shaped");
  require_dims(y.size() == op.m(), "solve_matrix_sensing: measurement length mismatch");
  const Index n1 = op.dims()[0], n2 = op.dims()[1], r = cfg.rank;
  require_dims(r >= 1 && r <= std::min(n1, n2), "solve_matrix_sensing: rank outside [1, min(n1,n2)]");
  const double eta = cfg.step_size > 0.0 ? cfg.step_size : 0.5;
  const double y_norm = std::max(y.norm(), 1e-300);

  MatrixSolveResult res;
  detail::MatrixLoop loop(cfg, truth, &res);

  MatrixFactors fac;
  double sigma1_hat = 0.0;
  if (cfg.init) {
    fac = *cfg.init;
    require_dims(fac.L.rows() == n1 && fac.R.rows() == n2 && fac.L.cols() == r &&
                     fac.R.cols() == r,
                 "solve_matrix_sensing: warm-start factor shape mismatch");
    if (cfg.vanilla) sigma1_hat = detail::top_singular_value(fac.L * fac.R.transpose());
  } else {
    const SvdResult init = svd_top_r(op.adjoint_matrix(y), r);
    const Vector root = init.S.cwiseSqrt();
    fac.L = init.U * root.asDiagonal();
    fac.R = init.V * root.asDiagonal();
    sigma1_hat = init.S[0];
  }

  for (int t = 0;; ++t) {
    const Matrix x = fac.L * fac.R.transpose();
    const Vector yhat = op.apply(x);
    const detail::ErrPair obs{(yhat - y).norm() / y_norm,
                              (yhat - y).cwiseAbs().maxCoeff() / y_norm};
    if (loop.record_and_check(t, x, obs)) break;
    ++res.residual_evals;
    const Matrix e = op.adjoint_matrix(yhat - y);
    try {
      if (cfg.vanilla) {
        const double step = eta / std::max(sigma1_hat, 1e-300);
        const Matrix l_next = fac.L - step * (e * fac.R);
        fac.R = fac.R - step * (e.transpose() * fac.L);
        fac.L = l_next;
      } else {
        const Matrix l_next = fac.L - eta * right_scale_solve(e * fac.R, fac.R, cfg.lambda);
        fac.R = fac.R - eta * right_scale_solve(e.transpose() * fac.L, fac.L, cfg.lambda);
        fac.L = l_next;
      }
    } catch (const SingularGramError&) {
      res.status = SolveStatus::singular_preconditioner;
      res.iterations = t;
      break;
    }
  }
  res.factors = fac;
  res.estimate = fac.L * fac.R.transpose();
  return res;
}

// ---------------------------------------------------------------------------
// robust PCA
// ---------------------------------------------------------------------------

// ScaledGD for Y = X* + S*.  Init: top-r factorization of Y - T_alpha[Y];
// each iteration recomputes S_t = T_{2 alpha}[Y - L_t R_t^T] before the
// factor updates.
inline MatrixSolveResult solve_matrix_rpca(const Matrix& y, const MatrixSolverConfig& cfg,
                                           const Matrix* truth = nullptr) {
  const Index n1 = y.rows(), n2 = y.cols(), r = cfg.rank;
  require_dims(r >= 1 && r <= std::min(n1, n2), "solve_matrix_rpca: rank outside [1, min(n1,n2)]");
  require_value(cfg.alpha >= 0.0 && cfg.alpha < 0.5, "solve_matrix_rpca: alpha must lie in [0, 1/2)");
  const double eta = cfg.step_size > 0.0 ? cfg.step_size : 0.5;
  const double trunc_level = std::min(2.0 * cfg.alpha, 1.0);
  const double y_norm = std::max(y.norm(), 1e-300);

  MatrixSolveResult res;
  detail::MatrixLoop loop(cfg, truth, &res);

  MatrixFactors fac;
  double sigma1_hat = 0.0;
  if (cfg.init) {
    fac = *cfg.init;
    require_dims(fac.L.rows() == n1 && fac.R.rows() == n2 && fac.L.cols() == r &&
                     fac.R.cols() == r,
                 "solve_matrix_rpca: warm-start factor shape mismatch");
    if (cfg.vanilla) sigma1_hat = detail::top_singular_value(fac.L * fac.R.transpose());
  } else {
    const SvdResult init = svd_top_r(y - truncate_rows_cols(y, cfg.alpha), r);
    const Vector root = init.S.cwiseSqrt();
    fac.L = init.U * root.asDiagonal();
    fac.R = init.V * root.asDiagonal();
    sigma1_hat = init.S[0];
  }

  for (int t = 0;; ++t) {
    const Matrix x = fac.L * fac.R.transpose();
    res.sparse_estimate = truncate_rows_cols(y - x, trunc_level);
    const Matrix resid = x + res.sparse_estimate - y;
    detail::ErrPair obs{resid.norm() / y_norm,
                        resid.cwiseAbs().maxCoeff() / y_norm};
    if (loop.record_and_check(t, x, obs)) break;
    ++res.residual_evals;
    try {
      if (cfg.vanilla) {
        const double step = eta / std::max(sigma1_hat, 1e-300);
        const Matrix l_next = fac.L - step * (resid * fac.R);
        fac.R = fac.R - step * (resid.transpose() * fac.L);
        fac.L = l_next;
      } else {
        const Matrix l_next = fac.L - eta * right_scale_solve(resid * fac.R, fac.R);
        fac.R = fac.R - eta * right_scale_solve(resid.transpose() * fac.L, fac.L);
        fac.L = l_next;
      }
    } catch (const SingularGramError&) {
      res.status = SolveStatus::singular_preconditioner;
      res.iterations = t;
      break;
    }
  }
  res.factors = fac;
  res.estimate = fac.L * fac.R.transpose();
  return res;
}

// ---------------------------------------------------------------------------
// matrix completion
// ---------------------------------------------------------------------------

// ScaledGD with (eta/p)-weighted masked residual and scaled row projection.
// y_obs holds the observed entries (zeros elsewhere); the projection radius
// defaults to 1.02 * sqrt(mu_hat * r) * sigma1_hat from the spectral init.
inline MatrixSolveResult solve_matrix_completion(const ObservationMask& mask,
                                                 const Matrix& y_obs,
                                                 const MatrixSolverConfig& cfg,
                                                 const Matrix* truth = nullptr) {
  require_dims(mask.dims().size() == 2, "solve_matrix_completion: mask must be matrix-shaped");
  const Index n1 = mask.dims()[0], n2 = mask.dims()[1], r = cfg.rank;
  require_dims(y_obs.rows() == n1 && y_obs.cols() == n2,
               "solve_matrix_completion: observation shape mismatch");
  require_dims(r >= 1 && r <= std::min(n1, n2),
               "solve_matrix_completion: rank outside [1, min(n1,n2)]");
  const double p = mask.p();
  require_value(p > 0.0, "solve_matrix_completion: mask density must be > 0");
  const double eta = cfg.step_size > 0.0 ? cfg.step_size : 0.5;
  const double y_norm = std::max(y_obs.norm(), 1e-300);
  const bool sparse_residual = p <= 0.25;

  MatrixSolveResult res;
  detail::MatrixLoop loop(cfg, truth, &res);

  // Spectral init and data-driven projection radius.
  const SvdResult init = svd_top_r(y_obs / p, r);
  const double sigma1_hat = init.S[0];
  double b = 0.0;
  if (cfg.projection_radius) {
    b = *cfg.projection_radius;
  } else {
    const double mu_hat = incoherence(init.U, init.V);
    b = 1.02 * std::sqrt(mu_hat * static_cast<double>(r)) * sigma1_hat;
  }
  require_value(b > 0.0, "solve_matrix_completion: projection radius must be > 0");

  MatrixFactors fac;
  if (cfg.init) {
    fac = *cfg.init;
    require_dims(fac.L.rows() == n1 && fac.R.rows() == n2 && fac.L.cols() == r &&
                     fac.R.cols() == r,
                 "solve_matrix_completion: warm-start factor shape mismatch");
  } else {
    const Vector root = init.S.cwiseSqrt();
    fac.L = init.U * root.asDiagonal();
    fac.R = init.V * root.asDiagonal();
    bool clipped = false;
    fac = scaled_project_matrix(fac, b, &clipped);
    if (clipped) loop.pending_event = "proj";
  }

  for (int t = 0;; ++t) {
    const Matrix x = fac.L * fac.R.transpose();
    // Masked residual, stored sparse at low observation density.
    Matrix gl = Matrix::Zero(n1, r);
    Matrix gr = Matrix::Zero(n2, r);
    double resid_fro_sq = 0.0;
    double resid_inf = 0.0;
    if (sparse_residual) {
      const double* xs = x.data();
      const double* ys = y_obs.data();
      for (std::uint64_t k : mask.indices()) {
        const double v = xs[k] - ys[k];
        const Index i = static_cast<Index>(k % static_cast<std::uint64_t>(n1));
        const Index j = static_cast<Index>(k / static_cast<std::uint64_t>(n1));
        gl.row(i) += v * fac.R.row(j);
        gr.row(j) += v * fac.L.row(i);
        resid_fro_sq += v * v;
        resid_inf = std::max(resid_inf, std::abs(v));
      }
    } else {
      const Matrix resid = mask.project(x) - y_obs;
      gl = resid * fac.R;
      gr = resid.transpose() * fac.L;
      resid_fro_sq = resid.squaredNorm();
      resid_inf = resid.cwiseAbs().maxCoeff();
    }
    detail::ErrPair obs{std::sqrt(resid_fro_sq) / y_norm, resid_inf / y_norm};
    if (loop.record_and_check(t, x, obs)) break;
    ++res.residual_evals;
    try {
      MatrixFactors next;
      if (cfg.vanilla) {
        const double step = eta / (p * std::max(sigma1_hat, 1e-300));
        next.L = fac.L - step * gl;
        next.R = fac.R - step * gr;
      } else {
        next.L = fac.L - (eta / p) * right_scale_solve(gl, fac.R);
        next.R = fac.R - (eta / p) * right_scale_solve(gr, fac.L);
      }
      bool clipped = false;
      fac = scaled_project_matrix(next, b, &clipped);
      if (clipped) loop.pending_event = "proj";
    } catch (const SingularGramError&) {
      res.status = SolveStatus::singular_preconditioner;
      res.iterations = t;
      break;
    }
  }
  res.factors = fac;
  res.estimate = fac.L * fac.R.transpose();
  return res;
}

// ---------------------------------------------------------------------------
// overparameterized symmetric sensing: ScaledGD(lambda)
// ---------------------------------------------------------------------------

// L_{t+1} = L_t - eta A*(A(L L^T) - y) L_t (L_t^T L_t + lambda I)^{-1} from a
// small random init L_0 = init_scale * G, G i.i.d. N(0, 1/n).  With
// cfg.mixed_init, lambda is dropped once sigma_min(L_t)^2 >= 10 lambda.
inline MatrixSolveResult solve_scaledgd_lambda(const GaussianSensingOp& op, const Vector& y,
                                               const MatrixSolverConfig& cfg,
                                               const Matrix* truth = nullptr) {
  require_dims(op.dims().size() == 2 && op.dims()[0] == op.dims()[1],
               "solve_scaledgd_lambda: operator must be square matrix-shaped");
  require_dims(y.size() == op.m(), "solve_scaledgd_lambda: measurement length mismatch");
  const Index n = op.dims()[0], r = cfg.rank;
  require_dims(r >= 1 && r <= n, "solve_scaledgd_lambda: rank outside [1, n]");
  require_value(cfg.lambda >= 0.0, "solve_scaledgd_lambda: lambda must be >= 0");
  require_value(cfg.init_scale > 0.0, "solve_scaledgd_lambda: init_scale must be > 0");
  require_value(!cfg.vanilla, "solve_scaledgd_lambda: no vanilla variant is defined");
  const double eta = cfg.step_size > 0.0 ? cfg.step_size : 0.3;
  const double y_norm = std::max(y.norm(), 1e-300);

  MatrixSolveResult res;
  detail::MatrixLoop loop(cfg, truth, &res);

  Matrix l;
  if (cfg.init) {
    l = cfg.init->L;
    require_dims(l.rows() == n && l.cols() == r,
                 "solve_scaledgd_lambda: warm-start factor shape mismatch");
  } else {
    CounterRng rng(cfg.seed, /*stream=*/7);
    l = cfg.init_scale * gaussian_matrix(rng, n, r, 1.0 / std::sqrt(static_cast<double>(n)));
  }

  double lambda_eff = cfg.lambda;
  for (int t = 0;; ++t) {
    const Matrix x = l * l.transpose();
    if (cfg.mixed_init && !res.switch_iteration && cfg.lambda > 0.0) {
      Eigen::BDCSVD<Matrix> svd(l);
      const double smin = svd.singularValues().minCoeff();
      if (smin * smin >= kMixedSwitchFactor * cfg.lambda) {
        res.switch_iteration = t;
        lambda_eff = 0.0;
        loop.pending_event = "switch";
      }
    }
    const Vector yhat = op.apply(x);
    detail::ErrPair obs{(yhat - y).norm() / y_norm,
                        (yhat - y).cwiseAbs().maxCoeff() / y_norm};
    if (loop.record_and_check(t, x, obs)) break;
    ++res.residual_evals;
    const Matrix e = op.adjoint_matrix(yhat - y);
    try {
      l = l - eta * right_scale_solve(e * l, l, lambda_eff);
    } catch (const SingularGramError&) {
      res.status = SolveStatus::singular_preconditioner;
      res.iterations = t;
      break;
    }
  }
  if (cfg.mixed_init && !res.switch_iteration) res.note = "no-switch";
  res.factors.L = l;
  res.factors.R = l;
  res.estimate = l * l.transpose();
  return res;
}

// Mixed-init policy as a named entry point.
inline MatrixSolveResult solve_scaledgd_mixed(const GaussianSensingOp& op, const Vector& y,
                                              MatrixSolverConfig cfg,
                                              const Matrix* truth = nullptr) {
  cfg.mixed_init = true;
  return solve_scaledgd_lambda(op, y, cfg, truth);
}

}  // namespace scaledgd
