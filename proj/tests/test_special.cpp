#include "doctest.h"

#include <cmath>
#include <complex>

#include "blochlap/special.hpp"

using namespace blochlap;

TEST_CASE("series leading values") {
  CHECK(bessel_j0(0.0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(struve_h0(0.0) == 0.0);
  CHECK(std::abs(bessel_j0(2.404825557695773)) < 1e-10);
  CHECK_THROWS_AS(bessel_y0(0.0), std::domain_error);
  CHECK_THROWS_AS(hankel1_0(-1.0), std::domain_error);
}

TEST_CASE("hankel definition") {
  for (double r : {0.3, 1.0, 5.0, 11.9, 12.1, 20.0}) {
    auto h = hankel1_0(r);
    CHECK(h.real() == doctest::Approx(bessel_j0(r)).epsilon(1e-12));
    CHECK(h.imag() == doctest::Approx(bessel_y0(r)).epsilon(1e-12));
  }
}

// Wronskian J0 Y0' - J0' Y0 = 2/(pi r), derivatives by central differences
// on the same implementations.
TEST_CASE("wronskian identity") {
  const double h = 1e-5;
  for (double r = 0.1; r <= 20.0; r += 0.73) {
    const double dj = (bessel_j0(r + h) - bessel_j0(r - h)) / (2 * h);
    const double dy = (bessel_y0(r + h) - bessel_y0(r - h)) / (2 * h);
    const double w = bessel_j0(r) * dy - dj * bessel_y0(r);
    CHECK(w == doctest::Approx(2.0 / (M_PI * r)).epsilon(1e-7));
  }
}

// Independent quadrature oracle: integral_0^{pi/2} e^{i z cos t} dt
// = (pi/2)(J0(z) + i H0(z)).
TEST_CASE("struve-bessel integral identity") {
  for (double z : {0.05, 0.6, 2.0, 7.5, 13.0, 20.0}) {
    Cplx q = adaptive_tensor_integral(
        [&](const std::vector<double>& t) {
          return std::exp(Cplx(0.0, z * std::cos(t[0])));
        },
        {0.0}, {0.5 * M_PI}, 1e-13);
    const Cplx rhs = 0.5 * M_PI * Cplx(bessel_j0(z), struve_h0(z));
    CHECK(std::abs(q - rhs) < 1e-9);
  }
}

TEST_CASE("series/asymptotic seam") {
  // both branches agree in a window around the switch point
  for (double r = 11.5; r <= 12.5; r += 0.05) {
    const Cplx a = detail::hankel1_0_asym(r);
    CHECK(std::abs(a.real() - detail::j0_series(r)) < 1e-11);
    CHECK(std::abs(a.imag() - detail::y0_series(r)) < 1e-11);
    const double s = detail::struve_h0_series(r);
    const double asym = detail::y0_series(r) + detail::struve_minus_y0_asym(r);
    CHECK(std::abs(s - asym) < 1e-10);
  }
}

TEST_CASE("greens_free_2d") {
  // term-wise recombination of the Hankel identity
  for (double kr : {0.6, 2.0, 9.0}) {
    const Cplx lhs = greens_free_2d(1.0, kr);
    const Cplx rhs = Cplx(-0.25 * bessel_y0(kr) + 0.25 * struve_h0(kr), 0.0) +
                     Cplx(0.0, 0.25) * bessel_j0(kr) - Cplx(0.25 * struve_h0(kr), 0.0);
    CHECK(std::abs(lhs - rhs) < 1e-12);
  }
  // large-argument amplitude
  const double k = 1.0, r = 20.0;
  const double amp = 0.25 * std::sqrt(2.0 / (M_PI * k * r));
  CHECK(std::abs(std::abs(greens_free_2d(k, r)) - amp) < 0.02 * amp);
  // log singularity sign as r -> 0+
  CHECK(greens_free_2d(1.0, 1e-4).real() > 1.0);
}

TEST_CASE("greens_free_1d") {
  const double k = 0.7;
  CHECK(std::abs(greens_free_1d(k, 0.0) - Cplx(0.0, 1.0 / (2.0 * k))) < 1e-15);
  CHECK(std::abs(greens_free_1d(k, 2.3) - greens_free_1d(k, -2.3)) < 1e-15);
  // -u'' - k^2 u = 0 away from the origin, by finite differences
  const double h = 1e-4;
  for (double x : {1.0, 3.7}) {
    const Cplx upp =
        (greens_free_1d(k, x + h) - 2.0 * greens_free_1d(k, x) + greens_free_1d(k, x - h)) /
        (h * h);
    CHECK(std::abs(-upp - k * k * greens_free_1d(k, x)) < 1e-6);
  }
}
