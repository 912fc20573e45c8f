#pragma once

// Periodic coefficients A, V given by Fourier tables on the cell
// (-pi,pi]^n, compactly supported sources, and the discrete
// Floquet-Bloch transform with its inverse.

#include <array>
#include <cmath>
#include <complex>
#include <map>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "blochlap/lattice.hpp"

namespace blochlap {

using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;
using MultiIndex = std::array<int, 2>;  // second entry unused for dim=1

inline MultiIndex make_index(int j0, int j1 = 0) { return {j0, j1}; }

inline MultiIndex negate(const MultiIndex& j) { return {-j[0], -j[1]}; }

inline MultiIndex sub(const MultiIndex& a, const MultiIndex& b) {
  return {a[0] - b[0], a[1] - b[1]};
}

struct MediumError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Fourier-coefficient description of the periodic matrix A(x) and the
/// potential V(x):
///   A(x) = sum_j A_coeffs[j] e^{i j.x},   V(x) = sum_j V_coeffs[j] e^{i j.x}.
/// Reality requires table(-j) = conj(table(j)); each A matrix must be
/// symmetric; c0 is the claimed ellipticity constant, checked on a
/// sampled grid.
struct MediumSpec {
  int dim = 1;
  std::map<MultiIndex, CMat> A_coeffs;
  std::map<MultiIndex, Cplx> V_coeffs;
  double c0 = 1.0;

  CMat A_at(const MultiIndex& j) const {
    auto it = A_coeffs.find(j);
    if (it != A_coeffs.end()) return it->second;
    return CMat::Zero(dim, dim);
  }
  Cplx V_at(const MultiIndex& j) const {
    auto it = V_coeffs.find(j);
    if (it != V_coeffs.end()) return it->second;
    return 0.0;
  }
  int support_radius() const {
    int r = 0;
    for (const auto& [j, m] : A_coeffs) r = std::max({r, std::abs(j[0]), std::abs(j[1])});
    for (const auto& [j, v] : V_coeffs) r = std::max({r, std::abs(j[0]), std::abs(j[1])});
    return r;
  }
  /// True when the Galerkin matrix is diagonal for every alpha: constant
  /// A and constant V (only the zero Fourier index present).
  bool is_constant() const {
    for (const auto& [j, m] : A_coeffs)
      if ((j[0] || j[1]) && m.cwiseAbs().maxCoeff() > 0) return false;
    for (const auto& [j, v] : V_coeffs)
      if ((j[0] || j[1]) && std::abs(v) > 0) return false;
    return true;
  }

  CMat A_point(const Vec& x) const {
    CMat a = CMat::Zero(dim, dim);
    for (const auto& [j, m] : A_coeffs) {
      double phase = j[0] * x[0] + (dim > 1 ? j[1] * x[1] : 0.0);
      a += m * std::exp(Cplx(0.0, phase));
    }
    return a;
  }

  /// Validates reality, symmetry and sampled ellipticity (32^dim grid).
  void validate() const {
    for (const auto& [j, m] : A_coeffs) {
      const CMat neg = A_at(negate(j));
      if ((neg - m.conjugate()).cwiseAbs().maxCoeff() > 1e-12)
        throw MediumError("A coefficients violate the reality condition");
      if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12)
        throw MediumError("A coefficient matrix is not symmetric");
    }
    for (const auto& [j, v] : V_coeffs)
      if (std::abs(V_at(negate(j)) - std::conj(v)) > 1e-12)
        throw MediumError("V coefficients violate the reality condition");
    const int n = 32;
    double min_eig = std::numeric_limits<double>::infinity();
    const int n1 = dim > 1 ? n : 1;
    for (int i = 0; i < n; ++i)
      for (int l = 0; l < n1; ++l) {
        Vec x(dim);
        x[0] = -M_PI + 2.0 * M_PI * i / n;
        if (dim > 1) x[1] = -M_PI + 2.0 * M_PI * l / n;
        const CMat a = A_point(x);
        Eigen::SelfAdjointEigenSolver<CMat> es(0.5 * (a + a.adjoint()));
        min_eig = std::min(min_eig, es.eigenvalues().minCoeff());
      }
    if (min_eig < c0)
      throw MediumError("sampled ellipticity below the claimed constant c0");
  }

  static MediumSpec free_space(int dim) {
    MediumSpec m;
    m.dim = dim;
    m.A_coeffs[make_index(0, 0)] = CMat::Identity(dim, dim);
    m.c0 = 1.0;
    return m;
  }
};

/// Source f with supp(f) inside the periodicity cell. Either the exact
/// delta at the origin (transform identically (2 pi)^{-dim/2}) or a
/// truncated Fourier table on the orthonormal basis e^{i j.x}/(2 pi)^{dim/2},
/// windowed to the cell.
struct SourceSpec {
  enum class Kind { delta_at_origin, fourier_table };
  Kind kind = Kind::delta_at_origin;
  int dim = 1;
  std::map<MultiIndex, Cplx> fourier_table;

  bool is_zero() const {
    if (kind == Kind::delta_at_origin) return false;
    for (const auto& [j, v] : fourier_table)
      if (std::abs(v) > 0) return false;
    return true;
  }
  int support_radius() const {
    int r = 0;
    for (const auto& [j, v] : fourier_table) r = std::max({r, std::abs(j[0]), std::abs(j[1])});
    return r;
  }
  /// Largest coefficient magnitude on the outermost truncation shell;
  /// a decay diagnostic for user-supplied tables.
  double shell_max() const {
    const int r = support_radius();
    double m = 0.0;
    for (const auto& [j, v] : fourier_table)
      if (std::max(std::abs(j[0]), std::abs(j[1])) == r) m = std::max(m, std::abs(v));
    return m;
  }
  /// Pointwise value of the tabulated series (cell restriction).
  Cplx value_at(const Vec& x) const {
    if (kind == Kind::delta_at_origin)
      throw MediumError("delta source has no pointwise values");
    const double norm = std::pow(2.0 * M_PI, -0.5 * dim);
    Cplx s = 0.0;
    for (const auto& [j, v] : fourier_table) {
      double phase = j[0] * x[0] + (dim > 1 ? j[1] * x[1] : 0.0);
      s += v * std::exp(Cplx(0.0, phase));
    }
    return s * norm;
  }
};

namespace detail {
// (1/2pi) Integral over (-pi,pi] of e^{i p x} dx = sin(pi p)/(pi p),
// continued analytically; equals delta_{p,0} at integers.
inline Cplx cell_sinc(Cplx p) {
  if (std::abs(p) < 1e-8) {
    const Cplx q = M_PI * p;
    return 1.0 - q * q / 6.0 + q * q * q * q / 120.0;
  }
  return std::sin(M_PI * p) / (M_PI * p);
}
}  // namespace detail

/// Representation of e^{-i alpha.x} f in the orthonormal Fourier basis,
/// i.e. the cell-windowed Fourier transform of f evaluated at the
/// shifted frequencies alpha + j. For the delta this is the constant
/// (2 pi)^{-dim/2}; for tables it is the exact windowed transform of the
/// tabulated trigonometric series (diagonal when alpha is an integer
/// vector).
inline CVec source_fourier_vector(const SourceSpec& source, const Eigen::VectorXcd& alpha,
                                  int J_max) {
  const int dim = source.dim;
  const int n1 = 2 * J_max + 1;
  const int N = dim == 1 ? n1 : n1 * n1;
  CVec g = CVec::Zero(N);
  const double norm = std::pow(2.0 * M_PI, -0.5 * dim);
  if (source.kind == SourceSpec::Kind::delta_at_origin) {
    g.setConstant(norm);
    return g;
  }
  auto flat = [&](int j0, int j1) {
    return dim == 1 ? (j0 + J_max) : (j0 + J_max) * n1 + (j1 + J_max);
  };
  // the window factor separates per axis: precompute one row of
  // cell_sinc values per distinct table index on each axis
  std::map<int, CVec> rows0, rows1;
  for (const auto& [m, t] : source.fourier_table) {
    if (!rows0.count(m[0])) {
      CVec v(n1);
      for (int j = -J_max; j <= J_max; ++j)
        v[j + J_max] = detail::cell_sinc(static_cast<double>(m[0]) - alpha[0] - static_cast<double>(j));
      rows0.emplace(m[0], std::move(v));
    }
    if (dim > 1 && !rows1.count(m[1])) {
      CVec v(n1);
      for (int j = -J_max; j <= J_max; ++j)
        v[j + J_max] = detail::cell_sinc(static_cast<double>(m[1]) - alpha[1] - static_cast<double>(j));
      rows1.emplace(m[1], std::move(v));
    }
  }
  struct Term {
    Cplx t;
    const Cplx* r0;
    const Cplx* r1;
  };
  std::vector<Term> terms;
  terms.reserve(source.fourier_table.size());
  for (const auto& [m, t] : source.fourier_table)
    terms.push_back({t, rows0.at(m[0]).data(), dim > 1 ? rows1.at(m[1]).data() : nullptr});
  for (int j0 = -J_max; j0 <= J_max; ++j0) {
    const int j1_lo = dim == 1 ? 0 : -J_max;
    const int j1_hi = dim == 1 ? 0 : J_max;
    for (int j1 = j1_lo; j1 <= j1_hi; ++j1) {
      Cplx val = 0.0;
      for (const auto& tm : terms)
        val += tm.t * tm.r0[j0 + J_max] * (tm.r1 ? tm.r1[j1 + J_max] : Cplx(1.0));
      g[flat(j0, j1)] = val;
    }
  }
  return g;
}

/// Floquet-Bloch data on a uniform alpha grid over B: one coefficient
/// (or sample) vector per node, all of equal length.
struct BlochField {
  int dim = 1;
  int nodes_per_axis = 0;               // N; nodes at -1/2 + i/N, i = 0..N-1
  std::vector<CVec> values;             // row-major over the alpha grid
  Vec alpha_node(int flat) const {
    Vec a(dim);
    if (dim == 1) {
      a[0] = -0.5 + static_cast<double>(flat) / nodes_per_axis;
    } else {
      a[0] = -0.5 + static_cast<double>(flat / nodes_per_axis) / nodes_per_axis;
      a[1] = -0.5 + static_cast<double>(flat % nodes_per_axis) / nodes_per_axis;
    }
    return a;
  }
  int node_count() const { return static_cast<int>(values.size()); }
};

/// Cell-indexed samples of a compactly supported function: one value
/// vector per occupied cell translate.
using CellArray = std::map<MultiIndex, CVec>;

/// Discrete Floquet-Bloch transform: (J phi)(alpha,.) =
/// sum_m phi(. + 2 pi m) e^{-2 pi i alpha.m} over the occupied cells.
inline BlochField floquet_transform(const CellArray& cells, int dim, int nodes_per_axis) {
  if (nodes_per_axis < 1) throw MediumError("floquet_transform: empty alpha grid");
  BlochField field;
  field.dim = dim;
  field.nodes_per_axis = nodes_per_axis;
  const int total = dim == 1 ? nodes_per_axis : nodes_per_axis * nodes_per_axis;
  Eigen::Index len = 0;
  for (const auto& [m, v] : cells) {
    if (len == 0) len = v.size();
    if (v.size() != len) throw MediumError("floquet_transform: ragged cell arrays");
  }
  field.values.assign(total, CVec::Zero(len));
  for (int i = 0; i < total; ++i) {
    const Vec a = field.alpha_node(i);
    for (const auto& [m, v] : cells) {
      const double phase = -2.0 * M_PI * (a[0] * m[0] + (dim > 1 ? a[1] * m[1] : 0.0));
      field.values[i] += std::exp(Cplx(0.0, phase)) * v;
    }
  }
  return field;
}

/// Inverse transform by the trapezoidal rule over the uniform alpha grid:
/// phi(. + 2 pi m) = integral_B psi(alpha,.) e^{2 pi i alpha.m} d alpha.
inline CVec inverse_floquet(const BlochField& field, const MultiIndex& m) {
  const int total = field.node_count();
  if (total == 0) throw MediumError("inverse_floquet: empty field");
  CVec out = CVec::Zero(field.values.front().size());
  for (int i = 0; i < total; ++i) {
    const Vec a = field.alpha_node(i);
    const double phase = 2.0 * M_PI * (a[0] * m[0] + (field.dim > 1 ? a[1] * m[1] : 0.0));
    out += std::exp(Cplx(0.0, phase)) * field.values[i];
  }
  return out / static_cast<double>(total);
}

}  // namespace blochlap
