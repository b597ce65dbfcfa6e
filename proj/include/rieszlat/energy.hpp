#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <random>
#include <string_view>
#include <vector>

#include "rieszlat/green.hpp"

namespace rieszlat {

/// N labeled points on the torus R^d / (n Lambda).
struct TorusConfiguration {
  Lattice lattice;  // the base lattice Lambda
  int n = 1;
  std::vector<Vec> points;

  std::size_t size() const noexcept { return points.size(); }
  int dim() const noexcept { return lattice.dim(); }
  /// Covolume of n Lambda.
  double torus_volume() const { return lattice.covolume() * std::pow(static_cast<double>(n), dim()); }
};

/// Reduces every point to the half-open cell of n Lambda.
TorusConfiguration make_configuration(const Lattice& lattice, int n, std::vector<Vec> points);

/// The n^d coset representatives of Lambda / (n Lambda).
TorusConfiguration lattice_config(const Lattice& lattice, int n);

/// Uniform on the torus: uniform basis coefficients in [0, n)^d.
TorusConfiguration random_configuration(const Lattice& lattice, int n, std::size_t count, std::mt19937_64& rng);

/// Smallest torus distance between two distinct points (infinity for N < 2).
double min_pair_distance(const TorusConfiguration& config);

struct EnergyReport {
  double value = 0.0;
  std::vector<Vec> gradient;  // empty unless requested
  double per_pair_error = 0.0;
  double madelung = 0.0;
  GreenRoute route = GreenRoute::ewald;
};

/// Periodic energy W = c^2 ((1/N) sum_{i != j} G(a_i - a_j) + M) on a fixed torus,
/// with the Ewald evaluator and Madelung constant cached.
class PeriodicEnergy {
 public:
  PeriodicEnergy(const Lattice& lattice, int n, const RieszParams& params);

  const RieszParams& params() const noexcept { return params_; }
  double madelung() const noexcept { return madelung_; }
  /// Throws CoincidentPointsError when two points are closer than 1e-7 of the cell scale.
  EnergyReport evaluate(const TorusConfiguration& config, bool with_gradient = false) const;
  /// Without the c^2 factor.
  double unscaled(const TorusConfiguration& config) const;

 private:
  Lattice lattice_;
  int n_;
  RieszParams params_;
  std::unique_ptr<EwaldGreen> green_;
  double madelung_;
  double madelung_error_;
};

EnergyReport periodic_energy(const TorusConfiguration& config, const RieszParams& params, bool with_gradient = false);
std::vector<Vec> energy_gradient(const TorusConfiguration& config, const RieszParams& params);

/// Gaussian p-energy of the periodic configuration with p = Psi_t:
/// (1/N) sum over ordered pairs (j, k), including j = k, of sum_{v in n Lambda, v != a_k - a_j} Psi_t(v + a_j - a_k).
double gaussian_p_energy(const TorusConfiguration& config, double t);

/// (1/N) sum_{j != k} Phi_t(a_j - a_k): the part of the p-energy that differs between
/// configurations of equal size.
double gaussian_pair_sum(const TorusConfiguration& config, double t, const TorusHeatKernel& heat);

/// (1/Gamma(alpha)) int_0^inf [pair sum(a) - pair sum(b)] t^(alpha-1) dt, which equals the
/// difference of (1/N) sum_{i != j} G between the two configurations.
SeriesValue gaussian_chain_difference(const TorusConfiguration& a, const TorusConfiguration& b,
                                      const RieszParams& params, double tol = 1e-9);

enum class MinimizeStatus { converged, max_iterations, line_search_failure };
std::string_view to_string(MinimizeStatus status);

struct MinimizeOptions {
  double grad_tol = 1e-7;
  int max_iters = 5000;
  std::uint64_t seed = 0;
};

struct MinimizeResult {
  TorusConfiguration config;
  EnergyReport report;
  std::vector<double> trace;  // accepted energies, non-increasing
  int iterations = 0;
  MinimizeStatus status = MinimizeStatus::max_iterations;
};

/// Gradient descent with backtracking (halving, Armijo 1e-4); points re-reduced after each step.
MinimizeResult local_minimize(const TorusConfiguration& init, const RieszParams& params,
                              const MinimizeOptions& opts = {});

/// Best of `restarts` runs from uniform random starts with N = n^d points.
struct RestartReport {
  std::vector<double> finals;
  std::vector<MinimizeStatus> statuses;
  MinimizeResult best;
};
RestartReport minimize_with_restarts(const Lattice& lattice, int n, const RieszParams& params, int restarts,
                                     const MinimizeOptions& opts = {});

struct CkProbeEntry {
  double t = 0.0;
  double baseline = 0.0;  // p-energy of the lattice configuration
  int trials = 0;
  int violations = 0;
  double min_gap = 0.0;  // smallest (random - baseline); +inf when trials = 0
};

struct CkProbeReport {
  int dim = 0;
  int n = 1;
  std::vector<CkProbeEntry> entries;
  int total_violations() const;
};

/// Compares uniform random N = n^d point configurations against the lattice
/// configuration for every t. A violation is a gap below -1e-12 * baseline.
CkProbeReport ck_probe(const Lattice& lattice, int n, const std::vector<double>& t_list, int trials,
                       std::uint64_t seed);

}  // namespace rieszlat
