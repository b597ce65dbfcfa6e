#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rieszlat/energy.hpp"
#include "rieszlat/kernels.hpp"
#include "rieszlat/lattice.hpp"

namespace rieszlat {

/// N = R^d charges in the cube K_R = [-R/2, R/2]^d.
struct JelliumInstance {
  int d = 2;
  RieszParams params;
  double R = 1.0;
  std::vector<Vec> points;
};

/// Validates the point count (N = round(R^d)) and that points lie in K_R.
/// Non-Coulomb kernels need allow_general_s.
JelliumInstance make_jellium_instance(const RieszParams& params, double R, std::vector<Vec> points,
                                      bool allow_general_s = false);

/// int_{K_R} g(x - y) dy by graded tensor Gauss-Legendre after splitting K_R
/// into the 2^d boxes with a corner at x.
double background_potential(const RieszParams& params, double R, const Vec& x, double tol = 1e-11);
Vec background_gradient(const RieszParams& params, double R, const Vec& x, double tol = 1e-11);

/// int_{K_R} int_{K_R} g(x - y) dx dy. Cached in memory and, when the
/// RIESZLAT_CACHE_DIR environment variable names a directory, on disk.
double background_self_energy(const RieszParams& params, double R, double tol = 1e-12);

/// sum_{i != j} g(a_i - a_j) - 2 sum_i V(a_i) + int int g, not divided by R^d.
double jellium_energy(const JelliumInstance& inst, double tol = 1e-11);
/// Value and per-point gradient.
double jellium_energy_gradient(const JelliumInstance& inst, std::vector<Vec>& grad, double tol = 1e-11);

struct JelliumOptions {
  int restarts = 8;
  std::uint64_t seed = 0;
  double grad_tol = 1e-6;
  int max_iters = 3000;
  double tol = 1e-11;
  bool allow_general_s = false;
};

struct JelliumResult {
  std::vector<Vec> points;
  double value = 0.0;
  /// Best value after each restart (non-increasing).
  std::vector<double> best_by_restart;
  std::vector<double> finals;
};

/// Multi-restart projected gradient descent (points clamped to K_R).
JelliumResult jellium_minimize(int d, const RieszParams& params, double R, const JelliumOptions& opts = {});

struct JelliumComparison {
  std::vector<double> R_list;
  std::vector<double> jellium;   // minimized bracket / R^d
  std::vector<int> n_list;
  std::vector<double> periodic;  // min W over n Lambda_0
  double intercept = 0.0;
  double slope = 0.0;
  bool degenerate_fit = false;   // the fitting half has no spread in W
  std::vector<double> residuals; // on the second half
  double spread = 0.0;           // max - min of the jellium column
  double max_residual_fraction = 0.0;
};

/// Fits jellium ~ intercept + slope * periodic on the first half of the paired
/// rows and reports residuals on the rest.
JelliumComparison jellium_vs_periodic(const RieszParams& params, const std::vector<double>& R_list,
                                      const Lattice& lattice, const std::vector<int>& n_list,
                                      const JelliumOptions& opts = {}, int periodic_restarts = 8);

/// Affine fit used by jellium_vs_periodic, exposed for tests.
void fit_affine_halves(JelliumComparison& cmp);

}  // namespace rieszlat
