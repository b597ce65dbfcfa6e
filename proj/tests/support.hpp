#pragma once

// Hand-rolled generators for the property tests. Every generator draws from
// an explicitly seeded engine so failures replay.

#include <cmath>
#include <cstdint>
#include <random>

#include "rieszlat/lattice.hpp"

namespace testgen {

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }

  rieszlat::Vec point(int d, double lo, double hi) {
    rieszlat::Vec v(d);
    for (int k = 0; k < d; ++k) v[k] = uniform(lo, hi);
    return v;
  }

  // Product of random elementary integer row operations (determinant +-1).
  rieszlat::Mat unimodular(int d, int steps = 12) {
    rieszlat::Mat u = rieszlat::Mat::Identity(d, d);
    for (int i = 0; i < steps; ++i) {
      const int a = integer(0, d - 1);
      int b = integer(0, d - 2);
      if (b >= a) ++b;
      u.row(a) += integer(-2, 2) * u.row(b);
      if (integer(0, 3) == 0) u.row(a) *= -1.0;
    }
    return u;
  }

  // Well-conditioned random basis rescaled to covolume 1.
  rieszlat::Lattice lattice(int d) {
    rieszlat::Mat b = rieszlat::Mat::Identity(d, d);
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) b(i, j) += uniform(-0.3, 0.3);
    }
    const double det = std::fabs(b.determinant());
    return rieszlat::Lattice(b / std::pow(det, 1.0 / d));
  }

  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

// |a - b| <= tol * max(1, |b|)
inline bool close(double a, double b, double tol) { return std::fabs(a - b) <= tol * std::max(1.0, std::fabs(b)); }

}  // namespace testgen
