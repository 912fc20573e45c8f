#pragma once

// Plane-wave Galerkin discretization of the conjugated cell operator:
// assembly at real or complex quasi-momentum, Hermitian eigensolve,
// Hellmann-Feynman gradients, and direct linear solves on the deformed
// contour.

#include <complex>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "blochlap/medium.hpp"

namespace blochlap {

using CplxVec = Eigen::VectorXcd;

struct DegenerateBand : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct PoleProximity : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Dense Galerkin matrix of the shifted cell operator on the basis
/// e^{i j.x}/(2 pi)^{dim/2}, |j|_inf <= J_max:
///   H[j,j'] = (alpha+j)^T A_hat(j-j') (alpha+j') + V_hat(j-j').
/// The entries are quadratic polynomials in alpha, so evaluating the
/// same formula at complex alpha is the analytic continuation.
struct BlochMatrix {
  int dim = 1;
  int J_max = 0;
  CplxVec alpha;       // complex quasi-momentum
  CMat entries;        // dense form; empty when diagonal
  CVec diag;           // populated iff diagonal
  bool diagonal = false;  // constant-coefficient fast path

  int n_per_axis() const { return 2 * J_max + 1; }
  int size() const { return dim == 1 ? n_per_axis() : n_per_axis() * n_per_axis(); }
  MultiIndex index_of(int row) const {
    const int n1 = n_per_axis();
    if (dim == 1) return make_index(row - J_max);
    return make_index(row / n1 - J_max, row % n1 - J_max);
  }
  int row_of(const MultiIndex& j) const {
    const int n1 = n_per_axis();
    if (dim == 1) return j[0] + J_max;
    return (j[0] + J_max) * n1 + (j[1] + J_max);
  }
  double norm_est() const {
    return diagonal ? diag.cwiseAbs().maxCoeff()
                    : entries.cwiseAbs().rowwise().sum().maxCoeff();
  }
  CMat dense() const { return diagonal ? CMat(diag.asDiagonal()) : entries; }
};

inline BlochMatrix assemble(const MediumSpec& medium, const CplxVec& alpha, int J_max) {
  if (J_max < 1) throw std::invalid_argument("assemble: J_max must be >= 1");
  BlochMatrix H;
  H.dim = medium.dim;
  H.J_max = J_max;
  H.alpha = alpha;
  H.diagonal = medium.is_constant();
  const int N = H.size();
  const CMat A0 = medium.A_at(make_index(0, 0));
  const Cplx V0 = medium.V_at(make_index(0, 0));
  if (H.diagonal) {
    H.diag.resize(N);
    for (int r = 0; r < N; ++r) {
      const MultiIndex j = H.index_of(r);
      CplxVec k(medium.dim);
      k[0] = alpha[0] + static_cast<double>(j[0]);
      if (medium.dim > 1) k[1] = alpha[1] + static_cast<double>(j[1]);
      Cplx val = V0;
      for (int a = 0; a < medium.dim; ++a)
        for (int b = 0; b < medium.dim; ++b) val += k[a] * A0(a, b) * k[b];
      H.diag[r] = val;
    }
    return H;
  }
  H.entries = CMat::Zero(N, N);
  for (int r = 0; r < N; ++r) {
    const MultiIndex j = H.index_of(r);
    CplxVec kr(medium.dim);
    kr[0] = alpha[0] + static_cast<double>(j[0]);
    if (medium.dim > 1) kr[1] = alpha[1] + static_cast<double>(j[1]);
    for (int c = 0; c < N; ++c) {
      const MultiIndex jp = H.index_of(c);
      const MultiIndex d = sub(j, jp);
      const CMat Ad = medium.A_at(d);
      const Cplx Vd = medium.V_at(d);
      if (Ad.cwiseAbs().maxCoeff() == 0.0 && Vd == 0.0) continue;
      CplxVec kc(medium.dim);
      kc[0] = alpha[0] + static_cast<double>(jp[0]);
      if (medium.dim > 1) kc[1] = alpha[1] + static_cast<double>(jp[1]);
      Cplx val = Vd;
      for (int a = 0; a < medium.dim; ++a)
        for (int b = 0; b < medium.dim; ++b) val += kr[a] * Ad(a, b) * kc[b];
      H.entries(r, c) += val;
    }
  }
  return H;
}

inline CplxVec to_cvec(const Vec& v) {
  CplxVec c(v.size());
  for (int i = 0; i < v.size(); ++i) c[i] = v[i];
  return c;
}

/// One band at one quasi-momentum: ascending index, eigenvalue mu and the
/// unit Fourier coefficient vector of the periodic eigenfunction part.
struct BandEigen {
  int band_index = 1;  // 1-based
  double mu = 0.0;
  CVec coeffs;
  bool degenerate = false;  // another eigenvalue within the relative gap tolerance
};

inline constexpr double kDegenerateGap = 1e-10;

inline std::vector<BandEigen> eigensolve(const BlochMatrix& H, int num_bands) {
  for (int i = 0; i < H.alpha.size(); ++i)
    if (std::abs(H.alpha[i].imag()) > 1e-14)
      throw std::invalid_argument("eigensolve: complex alpha unsupported, use solve_cell");
  const int N = H.size();
  num_bands = std::min(num_bands, N);
  std::vector<BandEigen> out;
  out.reserve(num_bands);
  Eigen::VectorXd evals;
  CMat evecs;
  if (H.diagonal) {
    std::vector<int> order(N);
    for (int i = 0; i < N; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      return H.diag[a].real() < H.diag[b].real();
    });
    evals.resize(num_bands);
    evecs = CMat::Zero(N, num_bands);
    for (int b = 0; b < num_bands; ++b) {
      evals[b] = H.diag[order[b]].real();
      evecs(order[b], b) = 1.0;
    }
    // gap check needs the next value up
    double next = std::numeric_limits<double>::infinity();
    if (num_bands < N) next = H.diag[order[num_bands]].real();
    const double scale = std::max(1.0, H.norm_est());
    for (int b = 0; b < num_bands; ++b) {
      BandEigen be;
      be.band_index = b + 1;
      be.mu = evals[b];
      be.coeffs = evecs.col(b);
      const double lo = b > 0 ? evals[b] - evals[b - 1] : std::numeric_limits<double>::infinity();
      const double hi = (b + 1 < num_bands ? evals[b + 1] : next) - evals[b];
      be.degenerate = std::min(lo, hi) <= kDegenerateGap * scale;
      out.push_back(std::move(be));
    }
    return out;
  }
  Eigen::SelfAdjointEigenSolver<CMat> es(H.entries);
  if (es.info() != Eigen::Success) throw std::runtime_error("eigensolve failed");
  const double scale = std::max(1.0, std::abs(es.eigenvalues().cwiseAbs().maxCoeff()));
  for (int b = 0; b < num_bands; ++b) {
    BandEigen be;
    be.band_index = b + 1;
    be.mu = es.eigenvalues()[b];
    be.coeffs = es.eigenvectors().col(b);
    const double lo =
        b > 0 ? be.mu - es.eigenvalues()[b - 1] : std::numeric_limits<double>::infinity();
    const double hi =
        b + 1 < N ? es.eigenvalues()[b + 1] - be.mu : std::numeric_limits<double>::infinity();
    be.degenerate = std::min(lo, hi) <= kDegenerateGap * scale;
    out.push_back(std::move(be));
  }
  return out;
}

/// d H / d alpha_k at the matrix level:
///   (dH)[j,j'] = e_k^T A_hat(j-j') (alpha+j') + (alpha+j)^T A_hat(j-j') e_k.
inline CMat assemble_gradient(const MediumSpec& medium, const BlochMatrix& H, int k) {
  const int N = H.size();
  CMat G = CMat::Zero(N, N);
  if (H.diagonal) {
    const CMat A0 = medium.A_at(make_index(0, 0));
    for (int r = 0; r < N; ++r) {
      const MultiIndex j = H.index_of(r);
      Cplx val = 0.0;
      for (int b = 0; b < medium.dim; ++b)
        val += 2.0 * A0(k, b) * (H.alpha[b] + static_cast<double>(j[b]));
      G(r, r) = val;
    }
    return G;
  }
  for (int r = 0; r < N; ++r) {
    const MultiIndex j = H.index_of(r);
    CplxVec kr(medium.dim);
    kr[0] = H.alpha[0] + static_cast<double>(j[0]);
    if (medium.dim > 1) kr[1] = H.alpha[1] + static_cast<double>(j[1]);
    for (int c = 0; c < N; ++c) {
      const MultiIndex jp = H.index_of(c);
      const CMat Ad = medium.A_at(sub(j, jp));
      if (Ad.cwiseAbs().maxCoeff() == 0.0) continue;
      CplxVec kc(medium.dim);
      kc[0] = H.alpha[0] + static_cast<double>(jp[0]);
      if (medium.dim > 1) kc[1] = H.alpha[1] + static_cast<double>(jp[1]);
      Cplx val = 0.0;
      for (int b = 0; b < medium.dim; ++b) val += Ad(k, b) * kc[b];
      for (int a = 0; a < medium.dim; ++a) val += kr[a] * Ad(a, k);
      G(r, c) += val;
    }
  }
  return G;
}

/// Hellmann-Feynman gradient of a simple band: grad mu = c* (dH) c.
inline Vec hf_gradient(const MediumSpec& medium, const BlochMatrix& H, const BandEigen& band) {
  if (band.degenerate)
    throw DegenerateBand("hf_gradient: band is degenerate at this quasi-momentum");
  Vec g(medium.dim);
  if (H.diagonal) {
    Eigen::Index i;
    band.coeffs.cwiseAbs().maxCoeff(&i);
    const MultiIndex j = H.index_of(static_cast<int>(i));
    const CMat A0 = medium.A_at(make_index(0, 0));
    for (int k = 0; k < medium.dim; ++k) {
      Cplx val = 0.0;
      for (int b = 0; b < medium.dim; ++b)
        val += 2.0 * A0(k, b) * (H.alpha[b] + static_cast<double>(j[b]));
      g[k] = val.real();
    }
    return g;
  }
  for (int k = 0; k < medium.dim; ++k) {
    const CMat G = assemble_gradient(medium, H, k);
    const Cplx v = band.coeffs.adjoint() * G * band.coeffs;
    if (std::abs(v.imag()) > 1e-10 * (1.0 + std::abs(v)))
      throw std::runtime_error("hf_gradient: non-real gradient component");
    g[k] = v.real();
  }
  return g;
}

/// Complex directional derivative d mu/d alpha_k of a simple eigenvalue
/// at complex alpha. H is not Hermitian there, so the perturbation
/// formula needs the left eigenvector u: d mu = (u* dH v)/(u* v). u is
/// obtained by inverse iteration on the adjoint, seeded with conj(v)
/// (exact for complex-symmetric H, a good guess close to the real axis).
inline Cplx matrix_gradient_component(const MediumSpec& medium, const BlochMatrix& H,
                                      const CVec& coeffs, Cplx mu, int k) {
  const int N = H.size();
  if (H.diagonal) {
    Eigen::Index i;
    coeffs.cwiseAbs().maxCoeff(&i);
    const MultiIndex j = H.index_of(static_cast<int>(i));
    const CMat A0 = medium.A_at(make_index(0, 0));
    Cplx val = 0.0;
    for (int b = 0; b < medium.dim; ++b)
      val += 2.0 * A0(k, b) * (H.alpha[b] + static_cast<double>(j[b]));
    return val;
  }
  CVec u = coeffs.conjugate();
  u.normalize();
  CMat M = H.entries.adjoint();
  M.diagonal().array() -= std::conj(mu);
  Eigen::PartialPivLU<CMat> lu(M + 1e-14 * CMat::Identity(N, N));
  for (int it = 0; it < 3; ++it) {
    CVec w = lu.solve(u);
    const double nw = w.norm();
    if (!(nw > 0) || !std::isfinite(nw))
      throw std::runtime_error("matrix_gradient_component: left iteration stagnated");
    u = w / nw;
  }
  const CMat G = assemble_gradient(medium, H, k);
  const Cplx den = u.adjoint() * coeffs;
  if (std::abs(den) < 1e-10 * coeffs.norm())
    throw std::runtime_error("matrix_gradient_component: near-defective eigenvalue");
  const Cplx num = u.adjoint() * G * coeffs;
  return num / den;
}

/// Eigen-expansion coefficient of a source vector: f_hat = <g, coeffs>.
inline Cplx eigen_source_coeff(const BandEigen& band, const CVec& g) {
  if (band.coeffs.size() != g.size())
    throw std::invalid_argument("eigen_source_coeff: truncation mismatch");
  return band.coeffs.dot(g);  // Eigen dot conjugates the left argument
}

struct CellSolution {
  CVec coeffs;
  double margin = 0.0;  // smallest pivot magnitude / matrix norm
};

inline constexpr double kPoleMargin = 1e-12;

/// Direct solve (H(alpha) - shift) c = g with pivot-based singularity
/// detection. Diagonal media bypass the LU.
inline CellSolution solve_cell(const BlochMatrix& H, Cplx shift, const CVec& g) {
  const int N = H.size();
  if (g.size() != N) throw std::invalid_argument("solve_cell: truncation mismatch");
  const double scale = std::max(1.0, H.norm_est());
  CellSolution sol;
  if (H.diagonal) {
    sol.coeffs.resize(N);
    double min_piv = std::numeric_limits<double>::infinity();
    for (int i = 0; i < N; ++i) {
      const Cplx d = H.diag[i] - shift;
      min_piv = std::min(min_piv, std::abs(d));
      sol.coeffs[i] = g[i] / d;
    }
    sol.margin = min_piv / scale;
    if (sol.margin < kPoleMargin)
      throw PoleProximity("solve_cell: spectral shift at an eigenvalue (diagonal)");
    return sol;
  }
  CMat M = H.entries;
  M.diagonal().array() -= shift;
  Eigen::PartialPivLU<CMat> lu(M);
  const double min_piv = lu.matrixLU().diagonal().cwiseAbs().minCoeff();
  sol.margin = min_piv / scale;
  if (sol.margin < kPoleMargin) throw PoleProximity("solve_cell: near-singular system");
  sol.coeffs = lu.solve(g);
  return sol;
}

struct PoleCheck {
  bool pass = false;
  double margin = 0.0;
};

inline constexpr double kContourMargin = 1e-8;

/// Verifies that lambda is not in the spectrum of H(alpha_complex):
/// margin = smallest pivot / norm, pass iff margin >= 1e-8.
inline PoleCheck pole_free_check(const BlochMatrix& H, double lambda) {
  PoleCheck pc;
  const double scale = std::max(1.0, H.norm_est());
  if (H.diagonal) {
    double min_piv = std::numeric_limits<double>::infinity();
    for (int i = 0; i < H.size(); ++i)
      min_piv = std::min(min_piv, std::abs(H.diag[i] - lambda));
    pc.margin = min_piv / scale;
  } else {
    CMat M = H.entries;
    M.diagonal().array() -= lambda;
    Eigen::PartialPivLU<CMat> lu(M);
    pc.margin = lu.matrixLU().diagonal().cwiseAbs().minCoeff() / scale;
  }
  pc.pass = pc.margin >= kContourMargin;
  return pc;
}

/// Quasi-periodic point evaluation of a coefficient vector:
///   w(alpha, x) = e^{i alpha.x} sum_j c_j e^{i j.x} / (2 pi)^{dim/2}.
/// Valid at any x; complex alpha produces the directional decay.
inline Cplx evaluate_field(const BlochMatrix& H, const CVec& c, const Vec& x) {
  const int N = H.size();
  Cplx phase_arg = H.alpha[0] * x[0];
  if (H.dim > 1) phase_arg += H.alpha[1] * x[1];
  const Cplx outer = std::exp(Cplx(0.0, 1.0) * phase_arg);
  Cplx s = 0.0;
  for (int r = 0; r < N; ++r) {
    const MultiIndex j = H.index_of(r);
    double parg = j[0] * x[0] + (H.dim > 1 ? j[1] * x[1] : 0.0);
    s += c[r] * std::exp(Cplx(0.0, parg));
  }
  return outer * s * std::pow(2.0 * M_PI, -0.5 * H.dim);
}

/// Analytic continuation of an eigenpair to complex alpha by shifted
/// inverse iteration from a real-side seed; the phase is aligned with
/// the seed gauge.
struct ContinuedPair {
  Cplx mu;
  CVec coeffs;
};

inline ContinuedPair continue_eigenpair(const BlochMatrix& H, const CVec& seed, Cplx mu_guess,
                                        int iterations = 5) {
  const int N = H.size();
  if (H.diagonal) {
    // eigenvectors are basis vectors at any alpha; keep the seed branch
    Eigen::Index i;
    seed.cwiseAbs().maxCoeff(&i);
    ContinuedPair cp;
    cp.mu = H.diag[i];
    cp.coeffs = CVec::Zero(N);
    cp.coeffs[i] = seed[i] / std::abs(seed[i]);
    return cp;
  }
  CVec v = seed.normalized();
  Cplx mu = mu_guess;
  for (int it = 0; it < iterations; ++it) {
    CMat M = H.entries;
    M.diagonal().array() -= mu;
    // small regularization keeps the factorization usable at the exact pole
    Eigen::PartialPivLU<CMat> lu(M + 1e-14 * CMat::Identity(N, N));
    CVec w = lu.solve(v);
    const double nw = w.norm();
    if (!(nw > 0) || !std::isfinite(nw)) throw std::runtime_error("inverse iteration stagnated");
    v = w / nw;
    const Cplx num = v.adjoint() * H.entries * v;
    mu = num / v.squaredNorm();
  }
  const Cplx overlap = seed.dot(v);
  if (std::abs(overlap) < 1e-8)
    throw std::runtime_error("continue_eigenpair: lost the seeded branch");
  v *= std::conj(overlap) / std::abs(overlap);
  ContinuedPair cp;
  cp.mu = mu;
  cp.coeffs = v;
  return cp;
}

}  // namespace blochlap
