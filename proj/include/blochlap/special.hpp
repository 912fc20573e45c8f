#pragma once

// Bessel, Struve and Hankel functions plus the closed-form outgoing
// Green's functions used as reference solutions. Power series up to
// r = 12, Hankel-type asymptotic expansions beyond; no external
// special-function dependency.

#include <cmath>
#include <complex>
#include <functional>
#include <stdexcept>
#include <vector>

namespace blochlap {

using Cplx = std::complex<double>;

namespace detail {

inline constexpr double kSeriesSwitch = 12.0;
inline constexpr double kEulerGamma = 0.57721566490153286060651209008;

// J0 power series: sum (-1)^k (x^2/4)^k / (k!)^2.
inline double j0_series(double x) {
  const double q = 0.25 * x * x;
  double term = 1.0, sum = 1.0;
  for (int k = 1; k < 80; ++k) {
    term *= -q / (static_cast<double>(k) * k);
    sum += term;
    if (std::abs(term) < 1e-18 * (1.0 + std::abs(sum))) break;
  }
  return sum;
}

// Y0 power series: (2/pi)[(ln(x/2)+gamma) J0 + sum (-1)^{k+1} H_k q^k/(k!)^2].
inline double y0_series(double x) {
  const double q = 0.25 * x * x;
  double term = 1.0, harmonic = 0.0, sum = 0.0;
  for (int k = 1; k < 80; ++k) {
    term *= -q / (static_cast<double>(k) * k);
    harmonic += 1.0 / k;
    const double contrib = -term * harmonic;
    sum += contrib;
    if (std::abs(contrib) < 1e-18 * (1.0 + std::abs(sum))) break;
  }
  return 2.0 / M_PI * ((std::log(0.5 * x) + kEulerGamma) * j0_series(x) + sum);
}

// Hankel asymptotic: H0^(1)(x) ~ sqrt(2/(pi x)) e^{i(x-pi/4)} sum (-i)^m b_m / x^m,
// b_0 = 1, b_{m+1} = b_m (2m+1)^2 / (8(m+1)). Truncated at the smallest term.
inline Cplx hankel1_0_asym(double x) {
  Cplx sum = 0.0;
  double b = 1.0;
  double prev = std::numeric_limits<double>::infinity();
  Cplx ipow = 1.0;
  double xm = 1.0;
  for (int m = 0; m < 60; ++m) {
    const double mag = b / xm;
    if (mag > prev) break;  // divergence onset
    sum += ipow * mag;
    prev = mag;
    ipow *= Cplx(0.0, -1.0);
    b *= (2.0 * m + 1.0) * (2.0 * m + 1.0) / (8.0 * (m + 1.0));
    xm *= x;
    if (mag < 1e-17) break;
  }
  const Cplx phase = std::polar(1.0, x - 0.25 * M_PI);
  return std::sqrt(2.0 / (M_PI * x)) * phase * sum;
}

// Struve H0 power series: sum (-1)^k (x/2)^{2k+1} / Gamma(k+3/2)^2.
inline double struve_h0_series(double x) {
  const double h = 0.5 * x;
  // Gamma(3/2) = sqrt(pi)/2.
  double g = 0.5 * std::sqrt(M_PI);
  double term = h / (g * g);
  double sum = term;
  for (int k = 1; k < 90; ++k) {
    // Gamma(k+3/2) = (k+1/2) Gamma(k+1/2).
    const double r = (k + 0.5);
    term *= -h * h / (r * r);
    sum += term;
    if (std::abs(term) < 1e-18 * (1.0 + std::abs(sum))) break;
  }
  return sum;
}

inline void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights) {
  nodes.resize(n);
  weights.resize(n);
  for (int i = 0; i < n; ++i) {
    // Newton on Legendre P_n from the Chebyshev initial guess.
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double p0 = 0, p1 = 0;
    for (int it = 0; it < 100; ++it) {
      p0 = 1.0;
      p1 = x;
      for (int j = 2; j <= n; ++j) {
        const double p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
        p0 = p1;
        p1 = p2;
      }
      const double dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    p0 = 1.0;
    p1 = x;
    for (int j = 2; j <= n; ++j) {
      const double p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
      p0 = p1;
      p1 = p2;
    }
    const double dp = n * (x * p1 - p0) / (x * x - 1.0);
    nodes[i] = x;
    weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
}

// Exact Laplace representation of the difference (DLMF 11.5.2, nu = 0):
//   H0(x) - Y0(x) = (2/pi) Integral_0^inf e^{-x t} (1+t^2)^{-1/2} dt.
// Substituting t = u/x and cutting at u = 60 leaves a tail below 1e-26;
// the remaining integrand is smooth, so fixed Gauss-Legendre suffices.
// The divergent asymptotic series bottoms out near 6e-7 at x = 12, this
// stays at rounding level.
inline double struve_minus_y0_asym(double x) {
  static const auto rule = [] {
    std::pair<std::vector<double>, std::vector<double>> r;
    gauss_legendre(96, r.first, r.second);
    return r;
  }();
  const double cut = 60.0;
  double sum = 0.0;
  for (size_t i = 0; i < rule.first.size(); ++i) {
    const double u = 0.5 * cut * (rule.first[i] + 1.0);
    const double t = u / x;
    sum += rule.second[i] * std::exp(-u) / std::sqrt(1.0 + t * t);
  }
  return sum * 0.5 * cut * 2.0 / (M_PI * x);
}

}  // namespace detail

inline double bessel_j0(double r) {
  const double x = std::abs(r);
  if (x <= detail::kSeriesSwitch) return detail::j0_series(x);
  return detail::hankel1_0_asym(x).real();
}

inline double bessel_y0(double r) {
  if (r <= 0.0) throw std::domain_error("bessel_y0: argument must be positive");
  if (r <= detail::kSeriesSwitch) return detail::y0_series(r);
  return detail::hankel1_0_asym(r).imag();
}

inline double struve_h0(double r) {
  const double x = std::abs(r);
  double v;
  if (x <= detail::kSeriesSwitch)
    v = detail::struve_h0_series(x);
  else
    v = bessel_y0(x) + detail::struve_minus_y0_asym(x);
  return r < 0.0 ? -v : v;
}

inline Cplx hankel1_0(double r) {
  if (r <= 0.0) throw std::domain_error("hankel1_0: argument must be positive");
  if (r <= detail::kSeriesSwitch) return {detail::j0_series(r), detail::y0_series(r)};
  return detail::hankel1_0_asym(r);
}

/// Outgoing 2D free-space Green's function (i/4) H0^(1)(k r).
inline Cplx greens_free_2d(double k, double r) {
  if (k <= 0.0) throw std::domain_error("greens_free_2d: k must be positive");
  return Cplx(0.0, 0.25) * hankel1_0(k * r);
}

/// Outgoing 1D Green's function i e^{ik|x|}/(2k) of -u'' - k^2 u = delta.
inline Cplx greens_free_1d(double k, double x) {
  if (k <= 0.0) throw std::domain_error("greens_free_1d: k must be positive");
  return Cplx(0.0, 1.0) * std::exp(Cplx(0.0, k * std::abs(x))) / (2.0 * k);
}

/// Tensor Gauss-Legendre integral of fn over [a1,b1] x ... (dim 1 or 2),
/// order raised until the change drops below tol.
inline Cplx adaptive_tensor_integral(const std::function<Cplx(const std::vector<double>&)>& fn,
                                     const std::vector<double>& lo, const std::vector<double>& hi,
                                     double tol, int max_order = 200) {
  const int dim = static_cast<int>(lo.size());
  Cplx prev = 0.0;
  for (int n = 16; n <= max_order; n = n * 3 / 2) {
    std::vector<double> xs, ws;
    detail::gauss_legendre(n, xs, ws);
    Cplx sum = 0.0;
    if (dim == 1) {
      const double c = 0.5 * (hi[0] + lo[0]), h = 0.5 * (hi[0] - lo[0]);
      for (int i = 0; i < n; ++i) sum += ws[i] * h * fn({c + h * xs[i]});
    } else {
      const double c0 = 0.5 * (hi[0] + lo[0]), h0 = 0.5 * (hi[0] - lo[0]);
      const double c1 = 0.5 * (hi[1] + lo[1]), h1 = 0.5 * (hi[1] - lo[1]);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          sum += ws[i] * ws[j] * h0 * h1 * fn({c0 + h0 * xs[i], c1 + h1 * xs[j]});
    }
    if (n > 16 && std::abs(sum - prev) <= tol * (1.0 + std::abs(sum))) return sum;
    prev = sum;
  }
  return prev;
}

/// Reference u = G * f by tensor quadrature over the cell (-pi, pi]^dim.
/// The kernel takes the difference x - y; probe points inside the cell
/// are refused because the kernel is singular there.
inline Cplx convolve_reference(const std::function<Cplx(const std::vector<double>&)>& kernel,
                               const std::function<Cplx(const std::vector<double>&)>& source,
                               const std::vector<double>& x, double tol = 1e-8) {
  const int dim = static_cast<int>(x.size());
  bool inside = true;
  for (int d = 0; d < dim; ++d) inside = inside && std::abs(x[d]) <= M_PI;
  if (inside)
    throw std::domain_error("convolve_reference: probe point inside the source support");
  const std::vector<double> lo(dim, -M_PI), hi(dim, M_PI);
  return adaptive_tensor_integral(
      [&](const std::vector<double>& y) {
        std::vector<double> d(dim);
        for (int i = 0; i < dim; ++i) d[i] = x[i] - y[i];
        return kernel(d) * source(y);
      },
      lo, hi, tol);
}

}  // namespace blochlap
