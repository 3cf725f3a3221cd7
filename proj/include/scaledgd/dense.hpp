#pragma once

#include <Eigen/Dense>
#include <cassert>
#include <cmath>
#include <string>

#include "scaledgd/errors.hpp"

namespace scaledgd {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Third-order dense tensor, mode-1-major: entry (i1,i2,i3) sits at linear
// index i1 + n1*(i2 + n2*i3).  With that layout the mode-1 matricization of
// shape n1 x (n2*n3) is a plain column-major reshape of the buffer.
class Tensor3 {
 public:
  Tensor3() : n1_(0), n2_(0), n3_(0) {}

  Tensor3(Index n1, Index n2, Index n3)
      : n1_(n1), n2_(n2), n3_(n3), data_(Vector::Zero(n1 * n2 * n3)) {
    require_value(n1 >= 0 && n2 >= 0 && n3 >= 0, "Tensor3: negative dimension");
  }

  Tensor3(Index n1, Index n2, Index n3, Vector data)
      : n1_(n1), n2_(n2), n3_(n3), data_(std::move(data)) {
    require_dims(data_.size() == n1 * n2 * n3,
                 "Tensor3: buffer length does not match dimensions");
    assert(data_.allFinite() && "Tensor3: non-finite entry");
  }

  Index n1() const { return n1_; }
  Index n2() const { return n2_; }
  Index n3() const { return n3_; }
  Index dim(int mode) const {
    require_value(mode >= 1 && mode <= 3, "Tensor3::dim: mode must be 1, 2, or 3");
    return mode == 1 ? n1_ : (mode == 2 ? n2_ : n3_);
  }
  Index size() const { return data_.size(); }

  double& operator()(Index i1, Index i2, Index i3) {
    return data_[i1 + n1_ * (i2 + n2_ * i3)];
  }
  double operator()(Index i1, Index i2, Index i3) const {
    return data_[i1 + n1_ * (i2 + n2_ * i3)];
  }

  Vector& vec() { return data_; }
  const Vector& vec() const { return data_; }
  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  double norm_fro() const { return data_.norm(); }
  double norm_inf() const { return data_.size() == 0 ? 0.0 : data_.cwiseAbs().maxCoeff(); }
  bool all_finite() const { return data_.allFinite(); }

  bool same_dims(const Tensor3& o) const {
    return n1_ == o.n1_ && n2_ == o.n2_ && n3_ == o.n3_;
  }

  Tensor3& operator+=(const Tensor3& o) {
    require_dims(same_dims(o), "Tensor3: dimension mismatch in +=");
    data_ += o.data_;
    return *this;
  }
  Tensor3& operator-=(const Tensor3& o) {
    require_dims(same_dims(o), "Tensor3: dimension mismatch in -=");
    data_ -= o.data_;
    return *this;
  }
  Tensor3& operator*=(double s) {
    data_ *= s;
    return *this;
  }

  friend Tensor3 operator+(Tensor3 a, const Tensor3& b) { return a += b; }
  friend Tensor3 operator-(Tensor3 a, const Tensor3& b) { return a -= b; }
  friend Tensor3 operator*(double s, Tensor3 a) { return a *= s; }

 private:
  Index n1_, n2_, n3_;
  Vector data_;
};

// Flat column-major view of a matrix (used by the sensing operator).
inline Eigen::Map<const Vector> flatten(const Matrix& m) {
  return Eigen::Map<const Vector>(m.data(), m.size());
}

inline void check_finite(const Matrix& m, const std::string& name) {
  require_value(m.allFinite(), name + ": non-finite entry");
}

inline void check_finite(const Tensor3& t, const std::string& name) {
  require_value(t.all_finite(), name + ": non-finite entry");
}

}  // namespace scaledgd
