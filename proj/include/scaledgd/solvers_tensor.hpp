#pragma once

#include "scaledgd/solvers_common.hpp"

namespace scaledgd {

struct TensorSolverConfig {
  std::array<Index, 3> ranks = {1, 1, 1};
  double step_size = 0.0;  // 0 -> 0.3 (sensing/completion) or 0.2 (RPCA)
  int max_iters = 100;
  double stop_tol = 0.0;
  bool vanilla = false;  // identity preconditioners, factor steps / sigma1_hat^2
  double alpha = 0.0;    // RPCA corruption bound (drives the data-driven zeta0 quantile)
  std::optional<double> zeta0;  // RPCA: init threshold, default 1.5 * ||X*||_inf (or estimate)
  std::optional<double> zeta1;  // RPCA: first loop threshold, default 8 sqrt(mu^3 r1 r2 r3 / (n1 n2 n3)) sigma_min
  std::optional<double> rho;    // RPCA: decay, default 1 - 0.45 * eta
  std::optional<double> projection_radius;  // completion B, default 1.1 sqrt(mu_hat r) sigma_hat
  std::uint64_t seed = 0;  // reserved for randomized variants; keeps config plumbing uniform
  bool record_iterates = false;
  std::optional<TuckerFactors> init;  // warm start override
};

struct TensorSolveResult {
  TuckerFactors factors;
  Tensor3 estimate;
  Tensor3 sparse_estimate;  // RPCA S
  ConvergenceTrace trace;
  SolveStatus status = SolveStatus::max_iters;
  int iterations = 0;
  long residual_evals = 0;
  double zeta0_used = 0.0;
  double zeta1_used = 0.0;
  double rho_used = 0.0;
  double projection_radius_used = 0.0;
  std::vector<Tensor3> iterates;
};

namespace detail {

// Largest mode-matricization singular value of the core (equals the estimate
// of sigma_1(X) when the factors are orthonormal).
inline double core_sigma_max(const Tensor3& g) {
  double s = 0.0;
  for (int mode = 1; mode <= 3; ++mode) {
    Eigen::BDCSVD<Matrix> svd(matricize(g, mode));
    s = std::max(s, svd.singularValues()[0]);
  }
  return s;
}

inline double core_sigma_min(const Tensor3& g, const std::array<Index, 3>& ranks) {
  double s = std::numeric_limits<double>::infinity();
  for (int mode = 1; mode <= 3; ++mode) {
    Eigen::BDCSVD<Matrix> svd(matricize(g, mode));
    const Index rk = ranks[static_cast<std::size_t>(mode - 1)];
    s = std::min(s, svd.singularValues()[std::min<Index>(rk, svd.singularValues().size()) - 1]);
  }
  return s;
}

struct TensorLoop {
  const TensorSolverConfig& cfg;
  const Tensor3* truth;
  double truth_fro = 0.0;
  TraceClock clock;
  TensorSolveResult* res;
  Tensor3 prev_x;
  std::string pending_event;

  TensorLoop(const TensorSolverConfig& c, const Tensor3* tr, TensorSolveResult* r)
      : cfg(c), truth(tr), res(r) {
    if (truth) truth_fro = truth->norm_fro();
  }

  bool record_and_check(int t, const Tensor3& x, const ErrPair& obs_errors) {
    ErrPair e = truth ? errors_vs_truth(x, *truth, truth_fro) : obs_errors;
    res->trace.iterations.push_back({t, e.fro, e.inf, clock.elapsed(), pending_event});
    pending_event.clear();
    if (cfg.record_iterates) res->iterates.push_back(x);
    bool stop = false;
    if (cfg.stop_tol > 0.0) {
      if (truth) {
        stop = e.fro <= cfg.stop_tol;
      } else if (t > 0) {
        stop = rel_change((x.vec() - prev_x.vec()).norm(), x.norm_fro()) <= cfg.stop_tol;
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

// One ScaledGD step on a Tucker bundle given the (dense) residual tensor and
// a step already divided by p where applicable.  Throws SingularGramError.
inline TuckerFactors tucker_step(const TuckerFactors& f, const Tensor3& resid, double step,
                                 bool vanilla, double sigma1_hat) {
  const BreveFactors br = breve_factors(f);
  TuckerFactors next;
  if (vanilla) {
    const double fstep = step / std::max(sigma1_hat * sigma1_hat, 1e-300);
    next.U = f.U - fstep * (matricize(resid, 1) * br.bu);
    next.V = f.V - fstep * (matricize(resid, 2) * br.bv);
    next.W = f.W - fstep * (matricize(resid, 3) * br.bw);
    next.G = f.G - step * multilinear_product(f.U.transpose(), f.V.transpose(),
                                              f.W.transpose(), resid);
  } else {
    next.U = f.U - step * right_scale_solve(matricize(resid, 1) * br.bu, br.bu);
    next.V = f.V - step * right_scale_solve(matricize(resid, 2) * br.bv, br.bv);
    next.W = f.W - step * right_scale_solve(matricize(resid, 3) * br.bw, br.bw);
    next.G = f.G - step * multilinear_product(pinv_via_gram(f.U), pinv_via_gram(f.V),
                                              pinv_via_gram(f.W), resid);
  }
  return next;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// tensor sensing
// ---------------------------------------------------------------------------

// ScaledGD for A((U,V,W).G) ~ y; init is the rank-(r1,r2,r3) HOSVD of A*(y).
// The residual tensor is formed exactly once per iteration and shared by all
// four updates, which read iteration-start state.
inline TensorSolveResult solve_tensor_sensing(const GaussianSensingOp& op, const Vector& y,
                                              const TensorSolverConfig& cfg,
                                              const Tensor3* truth = nullptr) {
  require_dims(op.dims().size() == 3, "solve_tensor_sensing: operator must be tensor-shaped");
  require_dims(y.size() == op.m(), "solve_tensor_sensing: measurement length mismatch");
  const double eta = cfg.step_size > 0.0 ? cfg.step_size : 0.3;
  const double y_norm = std::max(y.norm(), 1e-300);

  TensorSolveResult res;
  detail::TensorLoop loop(cfg, truth, &res);

  TuckerFactors fac;
  if (cfg.init) {
    fac = *cfg.init;
  } else {
    fac = hosvd(op.adjoint_tensor(y), cfg.ranks[0], cfg.ranks[1], cfg.ranks[2]);
  }
  const double sigma1_hat = cfg.vanilla ? detail::core_sigma_max(fac.G) : 0.0;

  for (int t = 0;; ++t) {
    const Tensor3 x = assemble(fac);
    const Vector yhat = op.apply(x);
    const detail::ErrPair obs{(yhat - y).norm() / y_norm,
                              (yhat - y).cwiseAbs().maxCoeff() / y_norm};
    if (loop.record_and_check(t, x, obs)) break;
    ++res.residual_evals;
    const Tensor3 e = op.adjoint_tensor(yhat - y);
    try {
      fac = detail::tucker_step(fac, e, eta, cfg.vanilla, sigma1_hat);
    } catch (const SingularGramError&) {
      res.status = SolveStatus::singular_preconditioner;
      res.iterations = t;
      break;
    }
  }
  res.factors = fac;
  res.estimate = assemble(fac);
  return res;
}

// ---------------------------------------------------------------------------
// tensor robust PCA
// ---------------------------------------------------------------------------

namespace detail {

inline double abs_quantile(const Tensor3& y, double q) {
  std::vector<double> buf(y.data(), y.data() + y.size());
  for (double& v : buf) v = std::abs(v);
  const std::size_t k = static_cast<std::size_t>(
      std::min<double>(static_cast<double>(buf.size() - 1),
                       std::max(0.0, q * static_cast<double>(buf.size() - 1))));
  std::nth_element(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(k), buf.end());
  return buf[k];
}

}  // namespace detail

// Soft-shrinkage S-step followed by the four scaled updates; thresholds decay
// geometrically: zeta_{t+1} = zeta_1 * rho^t for the S computed at loop t.
// Truth (when given) pins ||X*||_inf, mu, sigma_min for the schedule;
// otherwise they are estimated from the data / the spectral init.
inline TensorSolveResult solve_tensor_rpca(const Tensor3& y, const TensorSolverConfig& cfg,
                                           const Tensor3* truth = nullptr) {
  const Index n1 = y.n1(), n2 = y.n2(), n3 = y.n3();
  const auto [r1, r2, r3] = cfg.ranks;
  require_dims(r1 >= 1 && r1 <= n1 && r2 >= 1 && r2 <= n2 && r3 >= 1 && r3 <= n3,
               "solve_tensor_rpca: ranks outside [1, n_k]");
  require_value(cfg.alpha >= 0.0 && cfg.alpha < 0.5, "solve_tensor_rpca: alpha must lie in [0, 1/2)");
  const double eta = cfg.step_size > 0.0 ? cfg.step_size : 0.2;
  const double y_norm = std::max(y.norm_fro(), 1e-300);
  const double nprod = static_cast<double>(n1) * static_cast<double>(n2) * static_cast<double>(n3);
  const double rprod = static_cast<double>(r1) * static_cast<double>(r2) * static_cast<double>(r3);

  TensorSolveResult res;
  detail::TensorLoop loop(cfg, truth, &res);

  // Threshold schedule.
  double zeta0;
  if (cfg.zeta0) {
    zeta0 = *cfg.zeta0;
  } else if (truth) {
    zeta0 = 1.5 * truth->norm_inf();
  } else {
    zeta0 = 1.5 * detail::abs_quantile(y, 1.0 - 2.0 * cfg.alpha);
  }
  require_value(zeta0 >= 0.0, "solve_tensor_rpca: zeta0 must be >= 0");

  Tensor3 s = soft_shrink(y, zeta0);
  TuckerFactors fac;
  if (cfg.init) {
    fac = *cfg.init;
  } else {
    fac = hosvd(y - s, r1, r2, r3);
  }
  const double sigma1_hat = cfg.vanilla ? detail::core_sigma_max(fac.G) : 0.0;

  double zeta1;
  if (cfg.zeta1) {
    zeta1 = *cfg.zeta1;
  } else {
    double mu, sigma_min;
    if (truth) {
      const TuckerFactors tf = hosvd(*truth, r1, r2, r3);
      mu = incoherence(tf.U, tf.V, tf.W);
      sigma_min = spectral_stats(*truth, r1, r2, r3).sigma_min;
    } else {
      mu = incoherence(fac.U, fac.V, fac.W);
      sigma_min = detail::core_sigma_min(fac.G, cfg.ranks);
    }
    zeta1 = 8.0 * std::sqrt(mu * mu * mu * rprod / nprod) * sigma_min;
  }
  require_value(zeta1 >= 0.0, "solve_tensor_rpca: zeta1 must be >= 0");
  const double rho = cfg.rho ? *cfg.rho : 1.0 - 0.45 * eta;
  require_value(rho > 0.0 && rho < 1.0, "solve_tensor_rpca: rho must lie in (0, 1)");
  res.zeta0_used = zeta0;
  res.zeta1_used = zeta1;
  res.rho_used = rho;

  double zeta_next = zeta1;
  for (int t = 0;; ++t) {
    const Tensor3 x = assemble(fac);
    {
      const Vector resid_obs = x.vec() + s.vec() - y.vec();
      const detail::ErrPair obs{resid_obs.norm() / y_norm,
                                resid_obs.cwiseAbs().maxCoeff() / y_norm};
      if (loop.record_and_check(t, x, obs)) break;
    }
    ++res.residual_evals;
    s = soft_shrink(y - x, zeta_next);
    zeta_next *= rho;
    Tensor3 resid = x;
    resid.vec() += s.vec() - y.vec();
    try {
      fac = detail::tucker_step(fac, resid, eta, cfg.vanilla, sigma1_hat);
    } catch (const SingularGramError&) {
      res.status = SolveStatus::singular_preconditioner;
      res.iterations = t;
      break;
    }
  }
  res.factors = fac;
  res.estimate = assemble(fac);
  res.sparse_estimate = s;
  return res;
}

// ---------------------------------------------------------------------------
// tensor completion
// ---------------------------------------------------------------------------

// Diagonal-deleted spectral init, (eta/p)-weighted masked residual (stored
// sparse when p <= 0.25), and the scaled row projection after the init and
// after every step.
inline TensorSolveResult solve_tensor_completion(const ObservationMask& mask,
                                                 const Tensor3& y_obs,
                                                 const TensorSolverConfig& cfg,
                                                 const Tensor3* truth = nullptr) {
  require_dims(mask.dims().size() == 3, "solve_tensor_completion: mask must be tensor-shaped");
  const Index n1 = mask.dims()[0], n2 = mask.dims()[1], n3 = mask.dims()[2];
  require_dims(y_obs.n1() == n1 && y_obs.n2() == n2 && y_obs.n3() == n3,
               "solve_tensor_completion: observation shape mismatch");
  const auto [r1, r2, r3] = cfg.ranks;
  require_dims(r1 >= 1 && r1 <= n1 && r2 >= 1 && r2 <= n2 && r3 >= 1 && r3 <= n3,
               "solve_tensor_completion: ranks outside [1, n_k]");
  const double p = mask.p();
  require_value(p > 0.0, "solve_tensor_completion: mask density must be > 0");
  const double eta = cfg.step_size > 0.0 ? cfg.step_size : 0.3;
  const double y_norm = std::max(y_obs.norm_fro(), 1e-300);
  const bool sparse_residual = p <= 0.25;

  TensorSolveResult res;
  detail::TensorLoop loop(cfg, truth, &res);

  // Per-mode diagonal-deleted spectral init.
  TuckerFactors spec_init;
  {
    Matrix* dest[3] = {&spec_init.U, &spec_init.V, &spec_init.W};
    const std::array<Index, 3> rr = {r1, r2, r3};
    for (int mode = 1; mode <= 3; ++mode) {
      const Matrix mk = matricize(y_obs, mode);
      Matrix gram = (mk * mk.transpose()) / (p * p);
      gram.diagonal().setZero();
      *dest[mode - 1] = eig_top_r_sym(gram, rr[static_cast<std::size_t>(mode - 1)]).vectors;
    }
    spec_init.G = multilinear_product(spec_init.U.transpose(), spec_init.V.transpose(),
                                      spec_init.W.transpose(), y_obs);
    spec_init.G *= 1.0 / p;
  }
  const double sigma1_hat = detail::core_sigma_max(spec_init.G);
  double b = 0.0;
  if (cfg.projection_radius) {
    b = *cfg.projection_radius;
  } else {
    const double mu_hat = incoherence(spec_init.U, spec_init.V, spec_init.W);
    const double r_max = static_cast<double>(std::max({r1, r2, r3}));
    b = 1.1 * std::sqrt(mu_hat * r_max) * sigma1_hat;
  }
  require_value(b > 0.0, "solve_tensor_completion: projection radius must be > 0");
  res.projection_radius_used = b;

  TuckerFactors fac;
  if (cfg.init) {
    fac = *cfg.init;
  } else {
    bool clipped = false;
    fac = scaled_project_tensor(spec_init, b, &clipped);
    if (clipped) loop.pending_event = "proj";
  }

  for (int t = 0;; ++t) {
    const Tensor3 x = assemble(fac);
    const BreveFactors br = breve_factors(fac);
    Matrix gu = Matrix::Zero(n1, r1), gv = Matrix::Zero(n2, r2), gw = Matrix::Zero(n3, r3);
    Tensor3 core_grad(r1, r2, r3);
    double resid_fro_sq = 0.0, resid_inf = 0.0;
    try {
      Matrix p1, p2, p3;  // r_k x n_k projections for the core update
      if (cfg.vanilla) {
        p1 = fac.U.transpose();
        p2 = fac.V.transpose();
        p3 = fac.W.transpose();
      } else {
        p1 = pinv_via_gram(fac.U);
        p2 = pinv_via_gram(fac.V);
        p3 = pinv_via_gram(fac.W);
      }
      if (sparse_residual) {
        const double* xs = x.data();
        const double* ys = y_obs.data();
        for (std::uint64_t k : mask.indices()) {
          const double v = xs[k] - ys[k];
          const Index i1 = static_cast<Index>(k % static_cast<std::uint64_t>(n1));
          const std::uint64_t rest = k / static_cast<std::uint64_t>(n1);
          const Index i2 = static_cast<Index>(rest % static_cast<std::uint64_t>(n2));
          const Index i3 = static_cast<Index>(rest / static_cast<std::uint64_t>(n2));
          gu.row(i1) += v * br.bu.row(i2 + n2 * i3);
          gv.row(i2) += v * br.bv.row(i1 + n1 * i3);
          gw.row(i3) += v * br.bw.row(i1 + n1 * i2);
          for (Index j3 = 0; j3 < r3; ++j3)
            for (Index j2 = 0; j2 < r2; ++j2) {
              const double w23 = v * p2(j2, i2) * p3(j3, i3);
              for (Index j1 = 0; j1 < r1; ++j1) core_grad(j1, j2, j3) += w23 * p1(j1, i1);
            }
          resid_fro_sq += v * v;
          resid_inf = std::max(resid_inf, std::abs(v));
        }
      } else {
        Tensor3 resid = mask.project(x);
        resid -= y_obs;
        gu = matricize(resid, 1) * br.bu;
        gv = matricize(resid, 2) * br.bv;
        gw = matricize(resid, 3) * br.bw;
        core_grad = multilinear_product(p1, p2, p3, resid);
        resid_fro_sq = resid.vec().squaredNorm();
        resid_inf = resid.norm_inf();
      }
      const detail::ErrPair obs{std::sqrt(resid_fro_sq) / y_norm, resid_inf / y_norm};
      if (loop.record_and_check(t, x, obs)) break;
      ++res.residual_evals;
      TuckerFactors next;
      if (cfg.vanilla) {
        const double fstep = eta / (p * std::max(sigma1_hat * sigma1_hat, 1e-300));
        next.U = fac.U - fstep * gu;
        next.V = fac.V - fstep * gv;
        next.W = fac.W - fstep * gw;
      } else {
        next.U = fac.U - (eta / p) * right_scale_solve(gu, br.bu);
        next.V = fac.V - (eta / p) * right_scale_solve(gv, br.bv);
        next.W = fac.W - (eta / p) * right_scale_solve(gw, br.bw);
      }
      next.G = fac.G;
      core_grad *= eta / p;
      next.G -= core_grad;
      bool clipped = false;
      fac = scaled_project_tensor(next, b, &clipped);
      if (clipped) loop.pending_event = "proj";
    } catch (const SingularGramError&) {
      res.status = SolveStatus::singular_preconditioner;
      res.iterations = t;
      break;
    }
  }
  res.factors = fac;
  res.estimate = assemble(fac);
  return res;
}

}  // namespace scaledgd
