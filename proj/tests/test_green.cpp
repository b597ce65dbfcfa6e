#include <doctest.h>

#include <cmath>
#include <numbers>
#include <string>

#include "rieszlat/error.hpp"
#include "rieszlat/green.hpp"
#include "rieszlat/kernels.hpp"
#include "rieszlat/numeric.hpp"
#include "support.hpp"

using namespace rieszlat;
using std::numbers::pi;

namespace {

// A random point of the cell of n * lattice kept away from the lattice itself.
Vec random_point(testgen::Gen& g, const Lattice& l, int n) {
  const Lattice torus = l.scaled(n);
  for (;;) {
    Vec x = l.point(g.point(l.dim(), 0.0, static_cast<double>(n)));
    if (distance_to_lattice(torus, x) > 0.05) return x;
  }
}

// Cell integral of G over the centered cell of n * lattice. The singularity at
// the origin is removed with a Duffy split of each quadrant of coefficient space.
double cell_integral(const EwaldGreen& green, const Lattice& base, int n) {
  const auto& gl = gauss_legendre(48);
  const int m = static_cast<int>(gl.nodes.size());
  CompensatedSum acc;
  for (int sx : {-1, 1}) {
    for (int sy : {-1, 1}) {
      for (int swap = 0; swap < 2; ++swap) {
        for (int i = 0; i < m; ++i) {
          const double a = 0.25 * (1 + gl.nodes[i]), wa = 0.25 * gl.weights[i];
          for (int j = 0; j < m; ++j) {
            const double b = 0.5 * (1 + gl.nodes[j]), wb = 0.5 * gl.weights[j];
            Vec c(2);
            c[swap] = sx * a;
            c[1 - swap] = sy * a * b;
            const Vec x = base.point(c) * n;
            acc += wa * wb * a * green.value(x).value;
          }
        }
      }
    }
  }
  return acc.value() * green.volume();
}

}  // namespace

TEST_CASE("torus heat kernel example") {
  TorusHeatKernel heat(named_lattice("Z1"), 1);
  // theta_3(exp(-pi)) - 1
  double theta = 0.0;
  for (int k = -30; k <= 30; ++k) theta += std::exp(-pi * k * k);
  const SeriesValue v = heat.value(Vec::Zero(1), 1.0 / (4 * pi));
  CHECK(std::fabs(v.value - (theta - 1.0)) <= 1e-14);
  CHECK(std::fabs(v.value - 0.0864348) <= 1e-7);
}

TEST_CASE("heat kernel: direct and Poisson-dual sums agree") {
  testgen::Gen g(21);
  for (const char* name : {"Z2", "A2"}) {
    const Lattice l = named_lattice(name);
    for (int n : {1, 2}) {
      TorusHeatKernel heat(l, n);
      for (int i = 0; i < 10; ++i) {
        const Vec x = l.point(g.point(2, 0.0, n));
        CAPTURE(std::string(name));
        CHECK(std::fabs(heat.direct(x, heat.switch_time()) - heat.dual(x, heat.switch_time())) <= 1e-12);
      }
    }
  }
}

TEST_CASE("heat kernel has mean zero") {
  for (const char* name : {"Z2", "A2"}) {
    const Lattice l = named_lattice(name);
    TorusHeatKernel heat(l, 1);
    // Periodic trapezoid rule, exact up to exp(-4 pi^2 |16 w|^2 t)
    const int m = 16;
    CompensatedSum acc;
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < m; ++j) {
        Vec c(2);
        c << (i + 0.3) / m, (j + 0.6) / m;
        acc += heat.value(l.point(c), 0.05).value;
      }
    }
    CHECK(std::fabs(acc.value() / (m * m)) <= 1e-12);
  }
}

TEST_CASE("Fourier route") {
  const Lattice z2 = named_lattice("Z2");
  const RieszParams logp = make_riesz_params(2, 0.0);
  Vec half(2);
  half << 0.5, 0.5;
  const GreenEvaluation f = green_fourier(z2, 1, logp, half);
  const GreenEvaluation e = green_ewald(z2, 1, logp, half);
  CHECK(f.route == GreenRoute::fourier);
  CHECK(std::fabs(f.value - e.value) <= 1e-7);

  testgen::Gen g(3);
  const Lattice a2 = named_lattice("A2");
  const RieszParams p = make_riesz_params(2, 1.0);
  for (int i = 0; i < 5; ++i) {
    const Vec x = random_point(g, a2, 2);
    const double fx = green_fourier(a2, 2, p, x).value;
    CHECK(std::fabs(fx - green_fourier(a2, 2, p, -x).value) <= 1e-10);
    CHECK(std::fabs(fx - green_mellin(a2, 2, p, x).value) <= 1e-7);
  }
}

TEST_CASE("Mellin route") {
  const Lattice z3 = named_lattice("Z3");
  const RieszParams p = make_riesz_params(3, 1.0);
  Vec x = Vec::Constant(3, 0.5);
  const GreenEvaluation m = green_mellin(z3, 1, p, x);
  CHECK(m.route == GreenRoute::mellin);
  CHECK(std::fabs(m.value - green_ewald(z3, 1, p, x).value) <= 1e-8);

  const Lattice z2 = named_lattice("Z2");
  const RieszParams p2 = make_riesz_params(2, 1.0);
  Vec near(2), far(2);
  near << 1e-2, 0.0;
  far << 1e-1, 0.0;
  CHECK(green_mellin(z2, 1, p2, near).value > green_mellin(z2, 1, p2, far).value);
  CHECK_THROWS_AS(green_mellin(z2, 1, p2, Vec::Zero(2)), CoincidentPointsError);
  Vec lp(2);
  lp << 2.0, -1.0;
  CHECK_THROWS_AS(green_ewald(z2, 2, p2, lp * 2.0), CoincidentPointsError);
}

TEST_CASE("Ewald route against Mellin on A2, n = 2") {
  testgen::Gen g(44);
  const Lattice a2 = named_lattice("A2");
  const RieszParams p = make_riesz_params(2, 1.0);
  const EwaldGreen ewald(a2, 2, p);
  for (int i = 0; i < 10; ++i) {
    const Vec x = random_point(g, a2, 2);
    CHECK(std::fabs(ewald.value(x).value - green_mellin(a2, 2, p, x).value) <= 1e-8);
  }
}

TEST_CASE("property: three routes agree") {
  testgen::Gen g(9);
  struct Case {
    int d;
    double s;
    const char* lattice;
  };
  for (const Case& c : {Case{2, 0.0, "Z2"}, Case{2, 0.0, "A2"}, Case{2, 1.0, "Z2"}, Case{2, 1.0, "A2"},
                        Case{3, 1.0, "Z3"}}) {
    const Lattice l = named_lattice(c.lattice);
    const RieszParams p = make_riesz_params(c.d, c.s);
    for (int n : {1, 2}) {
      for (int i = 0; i < 3; ++i) {
        const Vec x = random_point(g, l, n);
        const double a = green_fourier(l, n, p, x).value;
        const double b = green_mellin(l, n, p, x).value;
        const double e = green_ewald(l, n, p, x).value;
        CAPTURE(std::string(c.lattice));
        CAPTURE(c.s);
        CAPTURE(n);
        CHECK(std::max({std::fabs(a - b), std::fabs(a - e), std::fabs(b - e)}) <= 1e-7);
      }
    }
  }
}

TEST_CASE("property: every route is even and periodic") {
  testgen::Gen g(10);
  const Lattice a2 = named_lattice("A2");
  for (double s : {0.0, 1.0}) {
    const RieszParams p = make_riesz_params(2, s);
    const EwaldGreen ewald(a2, 2, p);
    for (int i = 0; i < 4; ++i) {
      const Vec x = random_point(g, a2, 2);
      Vec k(2);
      k << g.integer(-3, 3), g.integer(-3, 3);
      const Vec shift = a2.point(k) * 2.0;
      CHECK(std::fabs(ewald.value(x).value - ewald.value(-x).value) <= 1e-10);
      CHECK(std::fabs(ewald.value(x).value - ewald.value(x + shift).value) <= 1e-10);
      CHECK(std::fabs(green_mellin(a2, 2, p, x).value - green_mellin(a2, 2, p, -x).value) <= 1e-10);
      CHECK(std::fabs(green_mellin(a2, 2, p, x).value - green_mellin(a2, 2, p, x + shift).value) <= 1e-10);
      CHECK(std::fabs(green_fourier(a2, 2, p, x).value - green_fourier(a2, 2, p, x + shift).value) <= 1e-10);
    }
  }
}

TEST_CASE("Ewald gradient against central differences") {
  testgen::Gen g(12);
  const Lattice a2 = named_lattice("A2");
  for (double s : {0.0, 1.0, 1.5}) {
    const EwaldGreen ewald(a2, 2, make_riesz_params(2, s));
    for (int i = 0; i < 5; ++i) {
      const Vec x = random_point(g, a2, 2);
      const Vec grad = ewald.gradient(x);
      for (int k = 0; k < 2; ++k) {
        Vec e = Vec::Zero(2);
        e[k] = 1e-5;
        const double fd = (ewald.value(x + e).value - ewald.value(x - e).value) / 2e-5;
        CHECK(std::fabs(grad[k] - fd) <= 1e-6 * std::max(1.0, std::fabs(fd)));
      }
    }
  }
}

TEST_CASE("G has mean zero over the cell") {
  for (const char* name : {"Z2", "A2"}) {
    for (double s : {0.0, 1.0}) {
      const Lattice l = named_lattice(name);
      const EwaldGreen ewald(l, 1, make_riesz_params(2, s));
      CAPTURE(std::string(name));
      CAPTURE(s);
      CHECK(std::fabs(cell_integral(ewald, l, 1)) <= 1e-6);
    }
  }
}

TEST_CASE("balanced split and self-duality of E8 at s = d/2") {
  const EwaldGreen e8(named_lattice("E8"), 1, make_riesz_params(8, 4.0));
  CHECK(std::fabs(e8.split_time() - 1.0 / (4 * pi)) <= 1e-15);
  for (double q : {2.0, 4.0, 6.0, 8.0}) {
    CHECK(std::fabs(e8.direct_term(q) - e8.dual_term(q)) <= 1e-14 * std::fabs(e8.dual_term(q)));
  }
}

TEST_CASE("Ewald value does not depend on the split") {
  testgen::Gen g(13);
  const Lattice a2 = named_lattice("A2");
  const RieszParams p = make_riesz_params(2, 1.0);
  const EwaldGreen balanced(a2, 1, p), early(a2, 1, p, 0.02), late(a2, 1, p, 0.3);
  for (int i = 0; i < 5; ++i) {
    const Vec x = random_point(g, a2, 1);
    CHECK(std::fabs(balanced.value(x).value - early.value(x).value) <= 1e-11);
    CHECK(std::fabs(balanced.value(x).value - late.value(x).value) <= 1e-11);
  }
}

TEST_CASE("Ewald function F") {
  testgen::Gen g(14);
  const Lattice z2 = named_lattice("Z2");
  for (int i = 0; i < 5; ++i) {
    const Vec x = random_point(g, z2, 1);
    Vec k(2);
    k << g.integer(-5, 5), g.integer(-5, 5);
    CHECK(std::fabs(ewald_F(z2, 1.0, x).value - ewald_F(z2, 1.0, x + k).value) <= 1e-12);
  }
  Vec x(2);
  x << 0.3, 0.4;
  const double s = 3.0;
  const double continued = ewald_F(z2, s, x).value - 2 * pi / (std::tgamma(1.5) * (2 - s));
  CHECK(std::fabs(continued - epstein_zeta_direct(z2, s, x, 50.0).value) <= 1e-9);
  CHECK_THROWS_AS(ewald_F(z2, 2.0, x), DomainError);
  CHECK_THROWS_AS(ewald_F(z2, 0.0, x), DomainError);
}

TEST_CASE("G = kappa_mult F + kappa_add") {
  testgen::Gen g(15);
  const Lattice a2 = named_lattice("A2");
  for (double s : {0.5, 1.0, 1.5}) {
    for (int n : {1, 2}) {
      const RieszParams p = make_riesz_params(2, s);
      const EwaldGreen ewald(a2, n, p);
      CHECK(std::fabs(ewald.kappa_mult() - 1.0 / p.c) <= 1e-15);
      for (int i = 0; i < 3; ++i) {
        const Vec x = random_point(g, a2, n);
        const double f = ewald_F(a2.scaled(n), s, x).value;
        CHECK(std::fabs(ewald.kappa_mult() * f + ewald.kappa_add() - green_mellin(a2, n, p, x).value) <= 1e-8);
      }
    }
  }
}

TEST_CASE("Epstein zeta") {
  const Lattice z2 = named_lattice("Z2");
  const SeriesValue direct = epstein_zeta_direct(z2, 4.0, Vec::Zero(2), 200.0, true);
  // Lorenz: 4 zeta(2) beta(2), Catalan's constant G = beta(2)
  const double lorenz = 4.0 * (pi * pi / 6.0) * 0.915965594177219015054603514932;
  CHECK(std::fabs(direct.value - 6.0268120) <= 1e-7);
  CHECK(std::fabs(direct.value - lorenz) <= 1e-12);
  CHECK(std::fabs(epstein_zeta_origin_excluded(z2, 4.0).value - lorenz) <= 1e-12);

  Vec half(2);
  half << 0.5, 0.5;
  CHECK(std::fabs(epstein_zeta(z2, 4.0, half).value - epstein_zeta_continued(z2, 4.0, half).value) <= 1e-8);
  CHECK_THROWS_AS(epstein_zeta(z2, 2.0, half), DomainError);
}

TEST_CASE("property: Epstein zeta is homogeneous") {
  testgen::Gen g(16);
  for (const char* name : {"Z2", "A2"}) {
    const Lattice l = named_lattice(name);
    const Lattice l2 = l.scaled(2.0);
    for (double s : {0.7, 1.5, 3.0, 4.5}) {
      const Vec x = random_point(g, l, 1);
      const double a = epstein_zeta(l2, s, 2.0 * x).value;
      const double b = std::pow(2.0, -s) * epstein_zeta(l, s, x).value;
      CAPTURE(std::string(name));
      CAPTURE(s);
      CHECK(std::fabs(a - b) <= 1e-9 * std::max(1.0, std::fabs(b)));
    }
  }
}

TEST_CASE("property: continuation reproduces direct sums for s > d") {
  testgen::Gen g(18);
  for (const char* name : {"Z2", "A2", "Z3"}) {
    const Lattice l = named_lattice(name);
    for (int i = 0; i < 3; ++i) {
      const double s = l.dim() + g.uniform(0.5, 3.0);
      const Vec x = random_point(g, l, 1);
      const double a = epstein_zeta_continued(l, s, x).value;
      const double b = epstein_zeta(l, s, x).value;
      CHECK(std::fabs(a - b) <= 1e-8 * std::fabs(b));
    }
  }
}

TEST_CASE("Madelung constant") {
  const Lattice z2 = named_lattice("Z2");
  const RieszParams p = make_riesz_params(2, 1.0);
  const GreenEvaluation m = madelung(z2, 1, p);
  // Richardson extrapolation of G(x) - g(x)/c along x = h (cos 0.3, sin 0.3)
  auto f = [&](double h) {
    Vec x(2);
    x << h * std::cos(0.3), h * std::sin(0.3);
    return green_mellin(z2, 1, p, x, 1e-12).value - riesz_kernel(p, h) / p.c;
  };
  const double f1 = f(1e-1), f2 = f(1e-2), f3 = f(1e-3);
  const double r1 = (100 * f2 - f1) / 99, r2 = (100 * f3 - f2) / 99;
  const double limit = (10000 * r2 - r1) / 9999;
  CHECK(std::fabs(limit - m.value) <= 1e-6);
  CHECK(m.abs_error_estimate <= 1e-12);

  CHECK(std::fabs(madelung_scaled(z2, 1, p).value - p.c * m.value) <= 1e-15);
}

TEST_CASE("Madelung scaling in n") {
  for (const char* name : {"Z2", "A2"}) {
    const Lattice l = named_lattice(name);
    const RieszParams p = make_riesz_params(2, 1.0);
    const double m1 = madelung(l, 1, p).value;
    CHECK(std::fabs(madelung(l, 2, p).value - m1 / 2.0) <= 1e-12);
    CHECK(std::fabs(madelung(l, 3, p).value - m1 / 3.0) <= 1e-12);
    const RieszParams logp = make_riesz_params(2, 0.0);
    const double l1 = madelung(l, 1, logp).value;
    CHECK(std::fabs(madelung(l, 2, logp).value - (l1 + std::log(2.0) / (2 * pi))) <= 1e-12);
  }
}

TEST_CASE("Madelung orderings in d = 2") {
  for (double s : {0.0, 0.5, 1.0, 1.5}) {
    const RieszParams p = make_riesz_params(2, s);
    CAPTURE(s);
    CHECK(madelung(named_lattice("A2"), 1, p).value < madelung(named_lattice("Z2"), 1, p).value);
  }
}

TEST_CASE("list budget") {
  Vec x = Vec::Constant(8, 0.3);
  CHECK_THROWS_AS(EwaldGreen(named_lattice("E8"), 3, make_riesz_params(8, 6.0), 0.0, 1e3).value(x),
                  BudgetExceededError);
}
