#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "rieszlat/lattice.hpp"

namespace rieszlat {

inline constexpr std::size_t kDefaultSeriesIndex = 256;

/// Truncated power series with exact integer coefficients. Overflow of the
/// 256-bit coefficients throws instead of wrapping.
class PowerSeries {
 public:
  using Coeff = boost::multiprecision::checked_int256_t;

  PowerSeries() = default;
  /// Zero series known up to q^(order - 1).
  explicit PowerSeries(std::size_t order) : coeffs_(order) {}
  PowerSeries(std::vector<Coeff> coeffs) : coeffs_(std::move(coeffs)) {}

  std::size_t order() const noexcept { return coeffs_.size(); }
  const Coeff& operator[](std::size_t i) const { return coeffs_[i]; }
  Coeff& operator[](std::size_t i) { return coeffs_[i]; }
  const std::vector<Coeff>& coefficients() const noexcept { return coeffs_; }

  PowerSeries& operator+=(const PowerSeries& other);
  PowerSeries& operator-=(const PowerSeries& other);
  PowerSeries& operator*=(const Coeff& scalar);

  friend PowerSeries operator+(PowerSeries a, const PowerSeries& b) { return a += b; }
  friend PowerSeries operator-(PowerSeries a, const PowerSeries& b) { return a -= b; }
  friend PowerSeries operator*(PowerSeries a, const Coeff& k) { return a *= k; }
  friend PowerSeries operator*(const PowerSeries& a, const PowerSeries& b);
  friend bool operator==(const PowerSeries&, const PowerSeries&) = default;

 private:
  std::vector<Coeff> coeffs_;
};

PowerSeries pow(const PowerSeries& base, unsigned exponent);

/// theta_3(q) = sum_k q^(k^2).
PowerSeries jacobi_theta3(std::size_t order);
/// E4 = 1 + 240 sum sigma_3(n) q^n.
PowerSeries eisenstein_e4(std::size_t order);
/// Delta = q prod (1 - q^n)^24.
PowerSeries modular_discriminant(std::size_t order);

/// Sum of k-th powers of the divisors of n.
boost::multiprecision::cpp_int divisor_sigma(unsigned long n, unsigned k);

/// Shell series through Fincke-Pohst enumeration (same as enumerate_shells).
ShellSeries theta_enumerated(const Lattice& lattice, double max_norm, const EnumerationOptions& opts = {});

/// Shell series from the classical theta identities: "Z<d>" -> theta_3^d
/// (norm = exponent), "E8" -> E4 (norm 2n), "Leech" -> E4^3 - 720 Delta (norm 2n).
/// max_index is the largest exponent kept.
ShellSeries theta_modular(std::string_view name, std::size_t max_index);

/// True when theta_modular() knows the lattice by name.
bool has_modular_theta(const Lattice& lattice);

/// Shells of `lattice` up to max_norm: modular route for Z^d, E8 and Leech,
/// enumeration otherwise.
ShellSeries lattice_shells(const Lattice& lattice, double max_norm, const EnumerationOptions& opts = {});

struct SeriesValue {
  double value = 0.0;
  double error = 0.0;  // certified tail estimate
};

/// sum_v exp(-beta |v|^2) from a shell list, with a tail estimate from a
/// polynomial growth fit of the cumulative counts (safety factor 10).
/// Throws InsufficientShellsError when the tail estimate exceeds tail_bound.
SeriesValue gaussian_lattice_sum(const ShellSeries& shells, double beta, double tail_bound);

}  // namespace rieszlat
