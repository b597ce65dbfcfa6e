#pragma once

namespace rieszlat {

/// Riesz kernel |x|^-s on R^d with 0 <= s < d; s = 0 (only in d = 2) is the
/// logarithmic kernel -log|x|.
struct RieszParams {
  int d = 0;
  double s = 0.0;
  double alpha = 0.0;  // order of the fractional Laplacian, (d - s) / 2
  double c = 0.0;      // (-Delta)^alpha g = c delta_0
  bool log = false;

  bool coulomb() const noexcept { return log || s == d - 2; }
};

/// Validates (d, s) and fills the derived fields.
RieszParams make_riesz_params(int d, double s);

/// c_{d,s} = 2^(d-s) pi^(d/2) Gamma((d-s)/2) / Gamma(s/2), and 2 pi for the log kernel.
double riesz_constant(int d, double s);

double riesz_kernel(const RieszParams& params, double r);
/// d/dr of riesz_kernel.
double riesz_kernel_derivative(const RieszParams& params, double r);

/// (4 pi t)^(-d/2) exp(-r^2 / (4 t)).
double heat_kernel(int d, double t, double r);

/// (1/Gamma(s/2)) int_0^inf exp(-t r^2) t^(s/2 - 1) dt by adaptive quadrature.
/// Throws NonconvergenceError when the quadrature misses quad_tol.
double gaussian_superposition(double r, double s, double quad_tol = 1e-10);

/// Upper incomplete gamma Gamma(a, x) = int_x^inf exp(-u) u^(a-1) du for x > 0.
/// Continued fraction for x >= a + 1, series otherwise; a = 0 is E1(x) and
/// a < 0 is reached by downward recurrence. Relative accuracy ~1e-13.
double upper_incomplete_gamma(double a, double x);

/// E1(x) = Gamma(0, x).
double exponential_integral_e1(double x);

}  // namespace rieszlat
