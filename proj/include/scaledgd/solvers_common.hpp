#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>

#include "scaledgd/models.hpp"

namespace scaledgd {

enum class SolveStatus { converged, max_iters, singular_preconditioner };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::converged: return "converged";
    case SolveStatus::max_iters: return "max_iters";
    case SolveStatus::singular_preconditioner: return "singular_preconditioner";
  }
  return "unknown";
}

namespace detail {

struct TraceClock {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double elapsed() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

struct ErrPair {
  double fro = 0.0;
  double inf = 0.0;
};

inline ErrPair errors_vs_truth(const Matrix& x, const Matrix& truth, double truth_fro) {
  const Matrix d = x - truth;
  return {d.norm() / truth_fro, d.cwiseAbs().maxCoeff() / truth_fro};
}

inline ErrPair errors_vs_truth(const Tensor3& x, const Tensor3& truth, double truth_fro) {
  const Vector d = x.vec() - truth.vec();
  return {d.norm() / truth_fro, d.cwiseAbs().maxCoeff() / truth_fro};
}

// Relative change of the iterate, used for stopping when truth is withheld.
inline double rel_change(double diff_norm, double cur_norm) {
  return diff_norm / std::max(cur_norm, 1e-300);
}

}  // namespace detail
}  // namespace scaledgd
