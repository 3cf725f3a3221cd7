#pragma once

#include <cmath>
#include <cstdint>

#include "scaledgd/dense.hpp"

namespace scaledgd {

// Counter-based generator: the i-th output is a fixed 64-bit hash of
// (key, i), so streams can be replayed or split without carrying state.
// Finalizer is splitmix64; normals come from Box-Muller.

inline std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ULL;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBULL;
  z ^= z >> 31;
  return z;
}

// Derives an independent substream key from a seed and a stream id.
inline std::uint64_t derive_key(std::uint64_t seed, std::uint64_t stream) {
  return mix64(seed + 0x9E3779B97F4A7C15ULL * mix64(stream + 0x632BE59BD9B4E019ULL));
}

class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key) : key_(key) {}
  CounterRng(std::uint64_t seed, std::uint64_t stream) : key_(derive_key(seed, stream)) {}

  std::uint64_t next_u64() {
    ++ctr_;
    return mix64(key_ + 0x9E3779B97F4A7C15ULL * ctr_);
  }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform on (0, 1]; safe to feed into log().
  double uniform_open() {
    return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller; generates pairs and caches the second.
  double normal() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    const double u1 = uniform_open();
    const double u2 = uniform();
    const double rad = std::sqrt(-2.0 * std::log(u1));
    const double ang = 6.283185307179586476925286766559 * u2;
    cached_ = rad * std::sin(ang);
    have_cached_ = true;
    return rad * std::cos(ang);
  }

 private:
  std::uint64_t key_;
  std::uint64_t ctr_ = 0;
  double cached_ = 0.0;
  bool have_cached_ = false;
};

// Fills in storage order (column-major), entries i.i.d. N(0, stddev^2).
inline Matrix gaussian_matrix(CounterRng& rng, Index rows, Index cols, double stddev = 1.0) {
  Matrix m(rows, cols);
  double* p = m.data();
  for (Index k = 0; k < m.size(); ++k) p[k] = stddev * rng.normal();
  return m;
}

inline Tensor3 gaussian_tensor(CounterRng& rng, Index n1, Index n2, Index n3,
                               double stddev = 1.0) {
  Tensor3 t(n1, n2, n3);
  double* p = t.data();
  for (Index k = 0; k < t.size(); ++k) p[k] = stddev * rng.normal();
  return t;
}

}  // namespace scaledgd
