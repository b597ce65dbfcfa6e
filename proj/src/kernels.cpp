#include "rieszlat/kernels.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "rieszlat/error.hpp"
#include "rieszlat/numeric.hpp"

namespace rieszlat {

namespace {

constexpr double kEps = 1e-16;
constexpr double kTiny = 1e-300;

// Modified Lentz evaluation of the Legendre continued fraction; valid for any
// real a once x is not small.
double gamma_continued_fraction(double a, double x) {
  double b = x + 1.0 - a;
  double c = 1.0 / kTiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 10000; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = b + an / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) return std::exp(-x + a * std::log(x)) * h;
  }
  throw NonconvergenceError("incomplete gamma continued fraction did not converge");
}

// gamma(a, x) for a > 0 by the power series.
double lower_gamma_series(double a, double x) {
  double ap = a;
  double del = 1.0 / a;
  double sum = del;
  for (int n = 0; n < 100000; ++n) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::fabs(del) < std::fabs(sum) * kEps) return sum * std::exp(-x + a * std::log(x));
  }
  throw NonconvergenceError("incomplete gamma series did not converge");
}

}  // namespace

RieszParams make_riesz_params(int d, double s) {
  if (d < 1) throw DomainError("dimension must be >= 1");
  if (!(s >= 0.0) || !(s < d)) {
    throw DomainError("Riesz exponent must satisfy 0 <= s < d (got d=" + std::to_string(d) +
                      ", s=" + std::to_string(s) + ")");
  }
  if (s == 0.0 && d != 2) throw DomainError("s = 0 denotes the logarithmic kernel, which needs d = 2");
  RieszParams p;
  p.d = d;
  p.s = s;
  p.log = (s == 0.0);
  p.alpha = 0.5 * (d - s);
  p.c = riesz_constant(d, s);
  return p;
}

double riesz_constant(int d, double s) {
  if (d < 1 || !(s >= 0.0) || !(s < d)) throw DomainError("riesz_constant: need 0 <= s < d");
  if (s == 0.0) {
    if (d != 2) throw DomainError("riesz_constant: s = 0 only in d = 2");
    return 2.0 * std::numbers::pi;
  }
  return std::pow(2.0, d - s) * std::pow(std::numbers::pi, 0.5 * d) * std::tgamma(0.5 * (d - s)) /
         std::tgamma(0.5 * s);
}

double riesz_kernel(const RieszParams& params, double r) {
  if (!(r > 0.0)) throw DomainError("riesz_kernel: distance must be positive");
  return params.log ? -std::log(r) : std::pow(r, -params.s);
}

double riesz_kernel_derivative(const RieszParams& params, double r) {
  if (!(r > 0.0)) throw DomainError("riesz_kernel_derivative: distance must be positive");
  return params.log ? -1.0 / r : -params.s * std::pow(r, -params.s - 1.0);
}

double heat_kernel(int d, double t, double r) {
  if (!(t > 0.0)) throw DomainError("heat_kernel: time must be positive");
  return std::pow(4.0 * std::numbers::pi * t, -0.5 * d) * std::exp(-r * r / (4.0 * t));
}

double gaussian_superposition(double r, double s, double quad_tol) {
  if (!(r > 0.0) || !(s > 0.0)) throw DomainError("gaussian_superposition: need r > 0 and s > 0");
  const double a = 0.5 * s;
  const double r2 = r * r;
  const double t0 = 1.0 / r2;
  const double g = std::tgamma(a);
  const double tol = 0.5 * quad_tol * g;
  // [0, t0]: t = t0 w^(1/a) removes the t^(a-1) endpoint behaviour.
  auto head = [&](double w) {
    if (w <= 0.0) return a >= 1.0 ? 0.0 : std::pow(t0, a) / a;
    return std::pow(t0, a) / a * std::exp(-r2 * t0 * std::pow(w, 1.0 / a));
  };
  auto tail = [&](double t) { return std::exp(-t * r2) * std::pow(t, a - 1.0); };
  QuadResult h = integrate(head, 0.0, 1.0, tol);
  QuadResult tl = integrate_to_infinity(tail, t0, tol);
  if (!h.converged || !tl.converged) {
    throw NonconvergenceError("gaussian_superposition: quadrature error " + std::to_string(h.error + tl.error));
  }
  return (h.value + tl.value) / g;
}

double exponential_integral_e1(double x) {
  if (!(x > 0.0)) throw DomainError("E1 needs x > 0");
  if (x <= 1.0) {
    double sum = 0.0;
    double term = 1.0;
    for (int k = 1; k < 200; ++k) {
      term *= -x / k;
      const double add = -term / k;
      sum += add;
      if (std::fabs(add) < kEps * std::fabs(sum)) break;
    }
    return -std::numbers::egamma - std::log(x) + sum;
  }
  return gamma_continued_fraction(0.0, x);
}

double upper_incomplete_gamma(double a, double x) {
  if (std::isnan(a) || std::isnan(x)) throw DomainError("upper_incomplete_gamma: NaN argument");
  if (x == 0.0 && a > 0.0) return std::tgamma(a);
  if (!(x > 0.0)) throw DomainError("upper_incomplete_gamma: need x > 0");
  if (a == 0.0) return exponential_integral_e1(x);
  if (x >= std::max(1.0, a + 1.0)) return gamma_continued_fraction(a, x);
  if (a > 0.0) return std::tgamma(a) - lower_gamma_series(a, x);
  // a < 0 and x < 1: Gamma(a, x) = (Gamma(a + 1, x) - x^a e^-x) / a.
  if (a < -50.0) throw DomainError("upper_incomplete_gamma: a below -50 is not supported");
  const int steps = static_cast<int>(std::ceil(-a));
  const double top = a + steps;  // in (-1, 0] shifted to [0, 1)
  double value = upper_incomplete_gamma(top, x);
  double cur = top;
  for (int i = 0; i < steps; ++i) {
    cur -= 1.0;
    value = (value - std::exp(cur * std::log(x) - x)) / cur;
  }
  return value;
}

}  // namespace rieszlat
