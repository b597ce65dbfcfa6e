#include "rieszlat/theta.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "rieszlat/error.hpp"
#include "rieszlat/kernels.hpp"
#include "rieszlat/numeric.hpp"

namespace rieszlat {

using boost::multiprecision::cpp_int;

PowerSeries& PowerSeries::operator+=(const PowerSeries& other) {
  coeffs_.resize(std::min(order(), other.order()));
  for (std::size_t i = 0; i < coeffs_.size(); ++i) coeffs_[i] += other.coeffs_[i];
  return *this;
}

PowerSeries& PowerSeries::operator-=(const PowerSeries& other) {
  coeffs_.resize(std::min(order(), other.order()));
  for (std::size_t i = 0; i < coeffs_.size(); ++i) coeffs_[i] -= other.coeffs_[i];
  return *this;
}

PowerSeries& PowerSeries::operator*=(const Coeff& scalar) {
  for (auto& c : coeffs_) c *= scalar;
  return *this;
}

PowerSeries operator*(const PowerSeries& a, const PowerSeries& b) {
  const std::size_t n = std::min(a.order(), b.order());
  PowerSeries out(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (a[i] == 0) continue;
    for (std::size_t j = 0; i + j < n; ++j) {
      if (b[j] != 0) out[i + j] += a[i] * b[j];
    }
  }
  return out;
}

PowerSeries pow(const PowerSeries& base, unsigned exponent) {
  PowerSeries result(base.order());
  if (result.order() > 0) result[0] = 1;
  PowerSeries sq = base;
  while (exponent > 0) {
    if (exponent & 1u) result = result * sq;
    exponent >>= 1;
    if (exponent > 0) sq = sq * sq;
  }
  return result;
}

PowerSeries jacobi_theta3(std::size_t order) {
  PowerSeries out(order);
  for (std::size_t k = 0; k * k < order; ++k) out[k * k] += (k == 0 ? 1 : 2);
  return out;
}

cpp_int divisor_sigma(unsigned long n, unsigned k) {
  if (n == 0) throw DomainError("divisor_sigma: n must be positive");
  cpp_int total = 0;
  for (unsigned long d = 1; d * d <= n; ++d) {
    if (n % d) continue;
    total += boost::multiprecision::pow(cpp_int(d), k);
    const unsigned long e = n / d;
    if (e != d) total += boost::multiprecision::pow(cpp_int(e), k);
  }
  return total;
}

PowerSeries eisenstein_e4(std::size_t order) {
  PowerSeries out(order);
  if (order > 0) out[0] = 1;
  for (std::size_t n = 1; n < order; ++n) out[n] = 240 * PowerSeries::Coeff(divisor_sigma(n, 3));
  return out;
}

PowerSeries modular_discriminant(std::size_t order) {
  if (order == 0) return PowerSeries(0);
  // Euler: prod (1 - q^n) = sum_k (-1)^k q^(k(3k-1)/2) over all integers k.
  PowerSeries eta(order);
  for (std::size_t k = 0;; ++k) {
    const std::size_t lo = k * (3 * k - 1) / 2;  // exponent for +k (k >= 1)
    const std::size_t hi = k * (3 * k + 1) / 2;  // exponent for -k
    const int sign = k % 2 ? -1 : 1;
    if (k == 0) {
      eta[0] = 1;
      continue;
    }
    if (lo >= order) break;
    eta[lo] += sign;
    if (hi < order) eta[hi] += sign;
  }
  const PowerSeries p24 = pow(eta, 24);
  PowerSeries out(order);
  for (std::size_t i = 1; i < order; ++i) out[i] = p24[i - 1];
  return out;
}

ShellSeries theta_enumerated(const Lattice& lattice, double max_norm, const EnumerationOptions& opts) {
  return enumerate_shells(lattice, max_norm, opts);
}

namespace {

int z_dimension(std::string_view name) {
  if (name.size() < 2 || name[0] != 'Z') return 0;
  int d = 0;
  for (char ch : name.substr(1)) {
    if (ch < '0' || ch > '9') return 0;
    d = d * 10 + (ch - '0');
    if (d > 1000) return 0;
  }
  return d;
}

ShellSeries to_shells(const PowerSeries& series, int dim, double norm_step) {
  ShellSeries out;
  out.dim = dim;
  const PowerSeries::Coeff limit(std::numeric_limits<Count>::max());
  for (std::size_t i = 0; i < series.order(); ++i) {
    const auto& c = series[i];
    if (c < 0) throw Error("theta series has a negative coefficient at index " + std::to_string(i));
    if (c == 0) continue;
    if (c > limit) throw Error("theta coefficient exceeds 128 bits at index " + std::to_string(i));
    out.entries.push_back({norm_step * static_cast<double>(i), Count(c)});
  }
  out.max_norm = series.order() == 0 ? 0.0 : norm_step * static_cast<double>(series.order() - 1);
  return out;
}

}  // namespace

ShellSeries theta_modular(std::string_view name, std::size_t max_index) {
  const std::size_t order = max_index + 1;
  if (const int d = z_dimension(name); d >= 1) {
    return to_shells(pow(jacobi_theta3(order), static_cast<unsigned>(d)), d, 1.0);
  }
  if (name == "E8") return to_shells(eisenstein_e4(order), 8, 2.0);
  if (name == "Leech") {
    const PowerSeries e4 = eisenstein_e4(order);
    PowerSeries theta = e4 * e4 * e4;
    theta -= modular_discriminant(order) * PowerSeries::Coeff(720);
    return to_shells(theta, 24, 2.0);
  }
  throw UnknownLatticeError("no modular theta series for '" + std::string(name) + "'");
}

bool has_modular_theta(const Lattice& lattice) {
  const std::string& n = lattice.name();
  return n == "E8" || n == "Leech" || z_dimension(n) == lattice.dim();
}

ShellSeries lattice_shells(const Lattice& lattice, double max_norm, const EnumerationOptions& opts) {
  if (!(max_norm >= 0.0)) throw DomainError("max_norm must be nonnegative");
  if (!has_modular_theta(lattice)) return enumerate_shells(lattice, max_norm, opts);
  const double step = z_dimension(lattice.name()) ? 1.0 : 2.0;
  const auto index = static_cast<std::size_t>(std::floor(max_norm / step + 1e-9));
  ShellSeries s = theta_modular(lattice.name(), index);
  while (!s.entries.empty() && s.entries.back().norm > max_norm * (1 + 1e-12)) s.entries.pop_back();
  // Every norm is a multiple of step, so the series is complete up to max_norm itself.
  s.max_norm = max_norm;
  return s;
}

namespace {

// 10 C beta int_M^inf e^(-beta m) (1 + m)^p dm = 10 C beta^(-p) e^beta Gamma(p + 1, beta (1 + M)).
// For x > a the bound Gamma(a, x) <= x^(a-1) e^-x x / (x - a + 1) (a >= 1) keeps e^beta from overflowing.
double tail_estimate(double c, double p, double beta, double m) {
  const double a = p + 1.0;
  const double x = beta * (1.0 + m);
  double scaled;
  if (x > a) {
    scaled = std::exp(-beta * m + (a - 1.0) * std::log(x)) * x / (x - a + 1.0);
  } else {
    scaled = std::exp(beta) * upper_incomplete_gamma(a, x);
  }
  return 10.0 * c * std::pow(beta, -p) * scaled;
}

}  // namespace

SeriesValue gaussian_lattice_sum(const ShellSeries& shells, double beta, double tail_bound) {
  if (!(beta > 0.0)) throw DomainError("gaussian_lattice_sum: beta must be positive");
  CompensatedSum sum;
  for (const auto& s : shells.entries) {
    if (s.norm > shells.max_norm * (1 + 1e-12)) break;
    sum += static_cast<double>(s.count) * std::exp(-beta * s.norm);
  }
  SeriesValue out;
  out.value = sum.value();
  if (std::isinf(shells.max_norm)) return out;

  // Growth fit N(m) <= C (1 + m)^p over the available shells.
  const double p = 0.5 * shells.dim + 1.0;
  double c = 1.0;
  double cumulative = 0.0;
  for (const auto& s : shells.entries) {
    cumulative += static_cast<double>(s.count);
    c = std::max(c, cumulative / std::pow(1.0 + s.norm, p));
  }
  out.error = tail_estimate(c, p, beta, shells.max_norm);
  if (out.error > tail_bound) {
    double need = std::max(1.0, 2.0 * shells.max_norm);
    while (tail_estimate(c, p, beta, need) > tail_bound && need < 1e12) need *= 2.0;
    throw InsufficientShellsError(shells.max_norm, need);
  }
  return out;
}

}  // namespace rieszlat
