#include <doctest.h>

#include <cmath>
#include <numbers>

#include "rieszlat/error.hpp"
#include "rieszlat/lattice.hpp"
#include "rieszlat/theta.hpp"
#include "support.hpp"

using namespace rieszlat;
using Coeff = PowerSeries::Coeff;

namespace {

Count count_at(const ShellSeries& s, double norm) {
  for (const Shell& sh : s.entries) {
    if (std::fabs(sh.norm - norm) <= 1e-9 * std::max(1.0, norm)) return sh.count;
  }
  return 0;
}

bool same_shells(const ShellSeries& a, const ShellSeries& b) {
  if (a.entries.size() != b.entries.size()) return false;
  for (std::size_t i = 0; i < a.entries.size(); ++i) {
    if (std::fabs(a.entries[i].norm - b.entries[i].norm) > 1e-9 * std::max(1.0, a.entries[i].norm)) return false;
    if (a.entries[i].count != b.entries[i].count) return false;
  }
  return true;
}

// Independent oracle for sum_k exp(-beta k^2).
double theta1(double beta) {
  double s = 0.0;
  for (int k = -60; k <= 60; ++k) s += std::exp(-beta * k * k);
  return s;
}

}  // namespace

TEST_CASE("power series arithmetic") {
  PowerSeries a(std::vector<Coeff>{1, 2, 3});
  PowerSeries b(std::vector<Coeff>{4, 5, 6, 7});
  PowerSeries sum = a + b;
  CHECK(sum.order() == 3);
  CHECK(sum[2] == 9);
  PowerSeries prod = a * b;
  CHECK(prod.order() == 3);
  CHECK(prod[0] == 4);
  CHECK(prod[1] == 13);
  CHECK(prod[2] == 28);
  CHECK(pow(a, 0)[0] == 1);
  CHECK(pow(a, 3) == a * a * a);
  CHECK((a * Coeff(3))[2] == 9);
}

TEST_CASE("property: series ring laws hold exactly") {
  testgen::Gen g(3);
  for (int trial = 0; trial < 30; ++trial) {
    auto random_series = [&] {
      std::vector<Coeff> c(static_cast<std::size_t>(g.integer(1, 12)));
      for (auto& v : c) v = g.integer(-50, 50);
      return PowerSeries(c);
    };
    PowerSeries a = random_series(), b = random_series(), c = random_series();
    CHECK(a * b == b * a);
    CHECK((a * b) * c == a * (b * c));
    CHECK(a * (b + c) == a * b + a * c);
    CHECK((a + b).order() == std::min(a.order(), b.order()));
    const unsigned e = static_cast<unsigned>(g.integer(0, 5));
    PowerSeries naive(a.order());
    naive[0] = 1;
    for (unsigned i = 0; i < e; ++i) naive = naive * a;
    CHECK(pow(a, e) == naive);
  }
}

TEST_CASE("overflow is reported, not wrapped") {
  PowerSeries big(std::vector<Coeff>{Coeff(1) << 200, 0});
  CHECK_THROWS(big * big);
}

TEST_CASE("theta_3 and divisor sums") {
  PowerSeries t = jacobi_theta3(10);
  CHECK(t[0] == 1);
  CHECK(t[1] == 2);
  CHECK(t[4] == 2);
  CHECK(t[9] == 2);
  CHECK(t[2] == 0);
  CHECK(divisor_sigma(12, 3) == 1 + 8 + 27 + 64 + 216 + 1728);
  CHECK(divisor_sigma(1, 3) == 1);
  CHECK(divisor_sigma(7, 0) == 2);
}

TEST_CASE("Delta coefficients") {
  // Ramanujan tau: 1, -24, 252, -1472, 4830
  PowerSeries delta = modular_discriminant(6);
  CHECK(delta[0] == 0);
  CHECK(delta[1] == 1);
  CHECK(delta[2] == -24);
  CHECK(delta[3] == 252);
  CHECK(delta[4] == -1472);
  CHECK(delta[5] == 4830);
}

TEST_CASE("theta_enumerated examples") {
  ShellSeries z1 = theta_enumerated(named_lattice("Z1"), 4.0);
  REQUIRE(z1.entries.size() == 3);
  CHECK(z1.entries[1].norm == 1.0);
  CHECK(z1.entries[1].count == 2);
  CHECK(z1.entries[2].norm == 4.0);
  CHECK(z1.entries[2].count == 2);

  ShellSeries a2 = theta_enumerated(named_lattice("A2"), 5.0);
  REQUIRE(a2.entries.size() == 4);
  CHECK(a2.entries[0].count == 1);
  CHECK(a2.entries[1].count == 6);
  CHECK(a2.entries[2].count == 6);
  CHECK(a2.entries[3].count == 6);

  // Covolume-one D4 has its 24 roots at norm sqrt(2).
  ShellSeries d4 = theta_enumerated(named_lattice("D4"), std::sqrt(2.0) + 1e-9);
  REQUIRE(d4.entries.size() == 2);
  CHECK(d4.entries[1].count == 24);
}

TEST_CASE("theta_modular examples") {
  ShellSeries e8 = theta_modular("E8", 1);
  CHECK(count_at(e8, 2.0) == 240);
  ShellSeries leech1 = theta_modular("Leech", 1);
  CHECK(count_at(leech1, 2.0) == 0);
  ShellSeries leech2 = theta_modular("Leech", 2);
  CHECK(count_at(leech2, 4.0) == 196560);
  CHECK_THROWS_AS(theta_modular("A2", 3), DomainError);
}

TEST_CASE("E8 counts are 240 sigma_3(n)") {
  ShellSeries e8 = theta_modular("E8", 20);
  for (unsigned n = 1; n <= 20; ++n) {
    CAPTURE(n);
    CHECK(count_at(e8, 2.0 * n) == Count(240 * divisor_sigma(n, 3)));
  }
}

TEST_CASE("modular and enumerated shells agree") {
  for (int d = 1; d <= 4; ++d) {
    const std::string name = "Z" + std::to_string(d);
    CAPTURE(name);
    CHECK(same_shells(theta_modular(name, 50), theta_enumerated(named_lattice(name), 50.0)));
  }
  CHECK(same_shells(theta_modular("E8", 4), theta_enumerated(named_lattice("E8"), 8.0)));
}

TEST_CASE("lattice_shells trims to the requested norm") {
  ShellSeries s = lattice_shells(named_lattice("Z3"), 5.0);
  CHECK(s.max_norm == 5.0);
  CHECK(s.entries.back().norm <= 5.0);
  CHECK(has_modular_theta(named_lattice("Leech")));
  CHECK_FALSE(has_modular_theta(named_lattice("A2")));
  CHECK_FALSE(has_modular_theta(Lattice(named_lattice("E8").basis() * 1.0)));
}

TEST_CASE("gaussian_lattice_sum examples") {
  ShellSeries origin;
  origin.dim = 3;
  origin.entries = {{0.0, 1}};
  origin.max_norm = std::numeric_limits<double>::infinity();
  CHECK(gaussian_lattice_sum(origin, 0.7, 1e-12).value == 1.0);

  ShellSeries z1 = lattice_shells(named_lattice("Z1"), 100.0);
  SeriesValue v = gaussian_lattice_sum(z1, 1.0, 1e-14);
  CHECK(std::fabs(v.value - 1.7726372048) <= 1e-10);
  CHECK(std::fabs(v.value - theta1(1.0)) <= 1e-14);

  ShellSeries z2 = lattice_shells(named_lattice("Z2"), 100.0);
  const double t = theta1(std::numbers::pi);
  SeriesValue w = gaussian_lattice_sum(z2, std::numbers::pi, 1e-14);
  CHECK(std::fabs(w.value - t * t) <= 1e-13);
  CHECK(std::fabs(w.value - 1.18034) <= 1e-5);
}

TEST_CASE("gaussian_lattice_sum asks for more shells when needed") {
  ShellSeries z2 = lattice_shells(named_lattice("Z2"), 2.0);
  try {
    gaussian_lattice_sum(z2, 0.1, 1e-14);
    FAIL("expected InsufficientShellsError");
  } catch (const InsufficientShellsError& e) {
    ShellSeries more = lattice_shells(named_lattice("Z2"), e.required_max_norm());
    SeriesValue v = gaussian_lattice_sum(more, 0.1, 1e-14);
    CHECK(v.error <= 1e-14);
    CHECK(std::fabs(v.value - theta1(0.1) * theta1(0.1)) <= 1e-12);
  }
}

TEST_CASE("property: certified error covers the truth") {
  testgen::Gen g(17);
  for (int trial = 0; trial < 30; ++trial) {
    const double beta = g.uniform(0.3, 4.0);
    const double m = g.uniform(4.0, 30.0);
    ShellSeries z2 = lattice_shells(named_lattice("Z2"), m);
    try {
      SeriesValue v = gaussian_lattice_sum(z2, beta, 1e-6);
      const double truth = theta1(beta) * theta1(beta);
      CHECK(std::fabs(v.value - truth) <= v.error + 1e-15);
    } catch (const InsufficientShellsError&) {
      // too few shells for this beta; nothing to certify
    }
  }
}

TEST_CASE("Poisson summation for Z2, A2, D4, E8") {
  for (const char* name : {"Z2", "A2", "D4", "E8"}) {
    Lattice l = named_lattice(name);
    ShellSeries direct = lattice_shells(l, 60.0);
    ShellSeries dualsh = lattice_shells(dual(l), 60.0);
    for (double t : {0.5, 1.0, 2.0}) {
      CAPTURE(name);
      CAPTURE(t);
      const double lhs = gaussian_lattice_sum(direct, std::numbers::pi * t, 1e-15).value;
      const double rhs = std::pow(t, -0.5 * l.dim()) / l.covolume() *
                         gaussian_lattice_sum(dualsh, std::numbers::pi / t, 1e-15).value;
      CHECK(std::fabs(lhs - rhs) <= 1e-10 * std::fabs(rhs));
    }
  }
}
