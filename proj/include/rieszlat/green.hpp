#pragma once

#include <memory>
#include <mutex>
#include <string_view>
#include <vector>

#include "rieszlat/kernels.hpp"
#include "rieszlat/lattice.hpp"
#include "rieszlat/theta.hpp"

namespace rieszlat {

enum class GreenRoute { fourier, mellin, ewald };
std::string_view to_string(GreenRoute route);

struct GreenEvaluation {
  double value = 0.0;
  GreenRoute route = GreenRoute::ewald;
  double abs_error_estimate = 0.0;
  long long terms_used = 0;
};

/// Largest vector list a single evaluator may hold before BudgetExceededError.
inline constexpr double kDefaultListBudget = 4e6;

/// Distance from x to the nearest point of `torus` (the period lattice itself).
double distance_to_lattice(const Lattice& torus, const Vec& x);

/// Heat kernel of R^d / (n Lambda) with the mean removed:
/// Phi_t(x) = sum_v Psi_t(x - v) - 1/V. Direct sum for t <= t*, Poisson-dual
/// sum above, t* = V^(2/d) / (4 pi) where both truncations are below 1e-16.
class TorusHeatKernel {
 public:
  TorusHeatKernel(const Lattice& base, int n, double list_budget = kDefaultListBudget);

  const Lattice& torus() const noexcept { return torus_; }
  double volume() const noexcept { return volume_; }
  double switch_time() const noexcept { return t_switch_; }

  /// Phi_t at x with a truncation estimate.
  SeriesValue value(const Vec& x, double t) const;
  /// Both routes regardless of t (for the Poisson cross-check).
  double direct(const Vec& x, double t) const;
  double dual(const Vec& x, double t) const;

  /// Phi_t(x) for one fixed x, cheap to call at many t.
  class Bound {
   public:
    double operator()(double t) const;
    /// sum_v Psi_t(x - v), i.e. Phi_t + 1/V.
    double image_sum(double t) const { return (*this)(t) + inv_volume_; }
    std::size_t terms() const noexcept { return r2_.size() + w2_.size(); }
    double nearest_distance() const noexcept { return nearest_; }

   private:
    friend class TorusHeatKernel;
    int d_ = 0;
    double t_switch_ = 0.0;
    double inv_volume_ = 0.0;
    double nearest_ = 0.0;
    std::vector<double> r2_;
    std::vector<double> w2_;
    std::vector<double> cosines_;  // already doubled for the +-w pairing
  };
  Bound bind(const Vec& x) const;

 private:
  const VectorList& direct_list() const;
  const VectorList& dual_list() const;

  Lattice torus_;
  Lattice dual_;
  int d_;
  double volume_;
  double t_switch_;
  double direct_radius_sq_;
  double dual_radius_sq_;
  double list_budget_;
  mutable std::once_flag direct_once_, dual_once_;
  mutable VectorList direct_;
  mutable VectorList dual_half_;  // one of each pair +-w
};

/// Fourier series with the heat regulator exp(-4 pi^2 |w|^2 tau), Richardson
/// extrapolated tau -> 0. Cross-check route; throws NonconvergenceError when the
/// extrapolation residual exceeds tol and CoincidentPointsError when x is on the lattice.
GreenEvaluation green_fourier(const Lattice& base, int n, const RieszParams& params, const Vec& x,
                              double tol = 1e-8);

/// Adaptive quadrature of the heat-kernel time integral (1/Gamma(alpha)) int Phi_t(x) t^(alpha-1) dt.
GreenEvaluation green_mellin(const Lattice& base, int n, const RieszParams& params, const Vec& x,
                             double tol = 1e-10);

struct EwaldParts {
  double direct = 0.0;
  double constant = 0.0;
  double dual = 0.0;
  double total() const noexcept { return direct + constant + dual; }
};

/// Ewald evaluation of G on the torus R^d / (n Lambda), split at heat time T.
/// G(x) = A sum_v f(|x - v|^2) - T^alpha / (alpha V Gamma(alpha)) + sum_{w != 0} h(|w|^2) cos(2 pi w.x)
/// with A = pi^(-d/2) 4^(-alpha) / Gamma(alpha), f(q) = q^(-s/2) Gamma(s/2, q / 4T)
/// (E1(q / 4T) for the log kernel) and h(q) = (4 pi^2 q)^(-alpha) Gamma(alpha, 4 pi^2 q T) / (V Gamma(alpha)).
class EwaldGreen {
 public:
  /// split_time <= 0 selects the balanced split V^(2/d) / (4 pi).
  EwaldGreen(const Lattice& base, int n, const RieszParams& params, double split_time = 0.0,
             double list_budget = kDefaultListBudget);

  const RieszParams& params() const noexcept { return params_; }
  const Lattice& torus() const noexcept { return torus_; }
  double volume() const noexcept { return volume_; }
  double split_time() const noexcept { return split_; }

  GreenEvaluation value(const Vec& x) const;
  EwaldParts parts(const Vec& x) const;
  Vec gradient(const Vec& x) const;
  /// Value and gradient in one pass.
  double value_and_gradient(const Vec& x, Vec& grad) const;

  /// Termwise pieces: A f(q) and h(q), with f'(q) for gradients.
  double direct_term(double q) const;
  double direct_term_derivative(double q) const;
  double dual_term(double q) const;
  double constant_term() const;
  /// lim_{q -> 0} (A f(q) - g(sqrt q) / c).
  double regularized_origin_term() const;

  /// Squared-norm cutoffs used for the direct (around x) and dual sums.
  double direct_cutoff() const noexcept { return direct_cut_; }
  double dual_cutoff() const noexcept { return dual_cut_; }

  /// G = kappa_mult * F + kappa_add (s > 0).
  double kappa_mult() const;
  double kappa_add() const;

 private:
  const VectorList& direct_list() const;
  const VectorList& dual_list() const;

  Lattice torus_;
  Lattice dual_;
  RieszParams params_;
  int d_;
  double volume_;
  double split_;
  double a_coef_;
  double direct_cut_;
  double dual_cut_;
  double list_budget_;
  mutable std::once_flag direct_once_, dual_once_;
  mutable VectorList direct_;
  mutable VectorList dual_half_;
  mutable std::vector<double> dual_coef_;
};

GreenEvaluation green_ewald(const Lattice& base, int n, const RieszParams& params, const Vec& x);

/// The Ewald function F_{s,Lambda}(x) with the split at exp(-|y|^2 t), t = 1:
/// F = sum_v |x+v|^-s Gamma(s/2, |x+v|^2) / Gamma(s/2)
///   + (1/V) sum_{w != 0} cos(2 pi w.x) pi^(d/2) (pi |w|)^(s-d) Gamma((d-s)/2, pi^2 |w|^2) / Gamma(s/2).
/// Requires s > 0, s != d.
SeriesValue ewald_F(const Lattice& lattice, double s, const Vec& x);

/// zeta_Lambda(s, x) = sum_v |x + v|^-s; direct summation for s > d, continuation
/// F - 2 pi^(d/2) / (V Gamma(s/2) (d - s)) for 0 < s < d. Throws DomainError at s = d.
SeriesValue epstein_zeta(const Lattice& lattice, double s, const Vec& x);
/// The continuation formula at any s > 0, s != d (also valid for s > d).
SeriesValue epstein_zeta_continued(const Lattice& lattice, double s, const Vec& x);
/// lim_{x -> 0} (zeta(s, x) - |x|^-s), i.e. the sum over v != 0; any s > 0, s != d.
SeriesValue epstein_zeta_origin_excluded(const Lattice& lattice, double s);
/// Direct sum over |x + v| <= radius with a smoothed tail correction (s > d).
/// exclude_origin drops the v = 0 term.
SeriesValue epstein_zeta_direct(const Lattice& lattice, double s, const Vec& x, double radius,
                                bool exclude_origin = false);

/// Madelung constant M = lim_{x -> 0} (G_{n Lambda}(x) - g(x) / c) in closed Ewald form over shells
/// (theta series for Z^d, E8, Leech). The error estimate covers both truncated tails.
GreenEvaluation madelung(const Lattice& base, int n, const RieszParams& params);
/// Same constant in the Epstein normalization lim_{x -> 0} (c G(x) - g(x)) = c M.
GreenEvaluation madelung_scaled(const Lattice& base, int n, const RieszParams& params);

}  // namespace rieszlat
