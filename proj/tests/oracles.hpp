// Independent reference implementations used to check the library's linear
// algebra and tensor kernels.  Everything here is written against the
// mathematical definitions with naive algorithms (cyclic Jacobi, explicit
// index loops, closed forms) and deliberately avoids the code paths under
// test.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <utility>
#include <vector>

#include <scaledgd/dense.hpp>

namespace oracle {

using scaledgd::Index;
using scaledgd::Matrix;
using scaledgd::Tensor3;
using scaledgd::Vector;

// ---------------------------------------------------------------------------
// cyclic Jacobi eigensolver for symmetric matrices
// ---------------------------------------------------------------------------

struct JacobiEig {
  Vector values;   // descending
  Matrix vectors;  // columns match values
};

// Classical cyclic Jacobi: rotate away off-diagonal entries until convergence.
inline JacobiEig jacobi_eig_sym(Matrix a) {
  const Index n = a.rows();
  Matrix v = Matrix::Identity(n, n);
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (Index p = 0; p < n; ++p)
      for (Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (std::sqrt(off) < 1e-15 * std::max(1.0, a.norm())) break;
    for (Index p = 0; p < n; ++p) {
      for (Index q = p + 1; q < n; ++q) {
        if (a(p, q) == 0.0) continue;
        Eigen::JacobiRotation<double> rot;
        rot.makeJacobi(a(p, p), a(p, q), a(q, q));
        a.applyOnTheLeft(p, q, rot.adjoint());
        a.applyOnTheRight(p, q, rot);
        v.applyOnTheRight(p, q, rot);
      }
    }
  }
  JacobiEig out;
  out.values = a.diagonal();
  out.vectors = v;
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(),
            [&](Index i, Index j) { return out.values[i] > out.values[j]; });
  Vector sv(n);
  Matrix sm(n, n);
  for (Index k = 0; k < n; ++k) {
    sv[k] = out.values[order[static_cast<std::size_t>(k)]];
    sm.col(k) = out.vectors.col(order[static_cast<std::size_t>(k)]);
  }
  out.values = std::move(sv);
  out.vectors = std::move(sm);
  return out;
}

// Singular values of a general matrix via Jacobi on the smaller Gram matrix.
inline Vector jacobi_singular_values(const Matrix& m) {
  const bool wide = m.cols() > m.rows();
  const Matrix gram = wide ? Matrix(m * m.transpose()) : Matrix(m.transpose() * m);
  Vector ev = jacobi_eig_sym(gram).values;
  for (Index i = 0; i < ev.size(); ++i) ev[i] = std::sqrt(std::max(ev[i], 0.0));
  return ev;
}

// ---------------------------------------------------------------------------
// brute-force tensor kernels
// ---------------------------------------------------------------------------

// Mode-k unfolding from the definition: rows index mode k, the other two modes
// sweep in column-major order with the lower-numbered mode fastest.
inline Matrix unfold(const Tensor3& t, int mode) {
  const Index n1 = t.n1(), n2 = t.n2(), n3 = t.n3();
  Matrix out;
  if (mode == 1) {
    out.resize(n1, n2 * n3);
    for (Index i3 = 0; i3 < n3; ++i3)
      for (Index i2 = 0; i2 < n2; ++i2)
        for (Index i1 = 0; i1 < n1; ++i1) out(i1, i2 + n2 * i3) = t(i1, i2, i3);
  } else if (mode == 2) {
    out.resize(n2, n1 * n3);
    for (Index i3 = 0; i3 < n3; ++i3)
      for (Index i2 = 0; i2 < n2; ++i2)
        for (Index i1 = 0; i1 < n1; ++i1) out(i2, i1 + n1 * i3) = t(i1, i2, i3);
  } else {
    out.resize(n3, n1 * n2);
    for (Index i3 = 0; i3 < n3; ++i3)
      for (Index i2 = 0; i2 < n2; ++i2)
        for (Index i1 = 0; i1 < n1; ++i1) out(i3, i1 + n1 * i2) = t(i1, i2, i3);
  }
  return out;
}

// (A, B, C) . G entry by entry; O(n^3 r^3) sextuple loop.
inline Tensor3 slow_multilinear(const Matrix& a, const Matrix& b, const Matrix& c,
                                const Tensor3& g) {
  Tensor3 out(a.rows(), b.rows(), c.rows());
  for (Index i3 = 0; i3 < c.rows(); ++i3)
    for (Index i2 = 0; i2 < b.rows(); ++i2)
      for (Index i1 = 0; i1 < a.rows(); ++i1) {
        double acc = 0.0;
        for (Index j3 = 0; j3 < g.n3(); ++j3)
          for (Index j2 = 0; j2 < g.n2(); ++j2)
            for (Index j1 = 0; j1 < g.n1(); ++j1)
              acc += a(i1, j1) * b(i2, j2) * c(i3, j3) * g(j1, j2, j3);
        out(i1, i2, i3) = acc;
      }
  return out;
}

// Kronecker product, explicit blocks.
inline Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

// ---------------------------------------------------------------------------
// closed forms
// ---------------------------------------------------------------------------

// Inverse of a 2x2 matrix by the adjugate formula.
inline Matrix inverse_2x2(const Matrix& m) {
  const double det = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
  Matrix out(2, 2);
  out << m(1, 1), -m(0, 1), -m(1, 0), m(0, 0);
  return out / det;
}

// ---------------------------------------------------------------------------
// factor distance at rank one: exact 1-D minimization
// ---------------------------------------------------------------------------

// dist^2 for r = 1 reduces to a scalar problem over q != 0:
//   f(q) = sigma * (||L q - L*||^2 + ||R / q - R*||^2).
// Coarse log-spaced scan over both signs, then golden-section refinement.
inline double dist_rank1(const Vector& l, const Vector& lstar, const Vector& r,
                         const Vector& rstar, double sigma) {
  const auto f = [&](double q) {
    return sigma * ((l * q - lstar).squaredNorm() + (r / q - rstar).squaredNorm());
  };
  double best_q = 1.0, best = f(1.0);
  for (int sign = -1; sign <= 1; sign += 2)
    for (int e = -60; e <= 60; ++e) {
      const double q = sign * std::pow(10.0, e * 0.1);
      const double val = f(q);
      if (val < best) {
        best = val;
        best_q = q;
      }
    }
  double lo = best_q / std::pow(10.0, 0.1), hi = best_q * std::pow(10.0, 0.1);
  if (lo > hi) std::swap(lo, hi);
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double x1 = b - phi * (b - a), x2 = a + phi * (b - a);
  double f1 = f(x1), f2 = f(x2);
  for (int it = 0; it < 200; ++it) {
    if (f1 < f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - phi * (b - a);
      f1 = f(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + phi * (b - a);
      f2 = f(x2);
    }
  }
  return std::min({best, f1, f2});
}

// ---------------------------------------------------------------------------
// finite differences
// ---------------------------------------------------------------------------

// Central-difference gradient of a scalar function of a matrix argument.
inline Matrix fd_gradient(const std::function<double(const Matrix&)>& f, const Matrix& x,
                          double h = 1e-6) {
  Matrix g(x.rows(), x.cols());
  for (Index j = 0; j < x.cols(); ++j)
    for (Index i = 0; i < x.rows(); ++i) {
      Matrix xp = x, xm = x;
      xp(i, j) += h;
      xm(i, j) -= h;
      g(i, j) = (f(xp) - f(xm)) / (2.0 * h);
    }
  return g;
}

inline Tensor3 fd_gradient_tensor(const std::function<double(const Tensor3&)>& f,
                                  const Tensor3& x, double h = 1e-6) {
  Tensor3 g(x.n1(), x.n2(), x.n3());
  for (Index i3 = 0; i3 < x.n3(); ++i3)
    for (Index i2 = 0; i2 < x.n2(); ++i2)
      for (Index i1 = 0; i1 < x.n1(); ++i1) {
        Tensor3 xp = x, xm = x;
        xp(i1, i2, i3) += h;
        xm(i1, i2, i3) -= h;
        g(i1, i2, i3) = (f(xp) - f(xm)) / (2.0 * h);
      }
  return g;
}

// Largest principal angle (radians) between the column spans of two
// orthonormal bases, from the singular values of U1^T U2.
inline double subspace_angle(const Matrix& u1, const Matrix& u2) {
  const Vector s = jacobi_singular_values(u1.transpose() * u2);
  const double c = std::clamp(s.minCoeff(), -1.0, 1.0);
  return std::acos(c);
}

}  // namespace oracle
