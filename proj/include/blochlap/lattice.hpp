#pragma once

// Geometry of the periodicity cell (-pi,pi]^n and its dual cell
// B = (-1/2,1/2]^n: directional frames, line-cell clipping and the
// boundary translation map.

#include <array>
#include <cmath>
#include <complex>
#include <optional>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace blochlap {

using Vec = Eigen::VectorXd;
using Cplx = std::complex<double>;

inline constexpr double kFaceTol = 1e-12;

struct InvalidDirection : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Observation direction n_hat with its orthonormal tangent set.
/// dim=1 has no tangents; dim=2 carries a single tangent, the 90-degree
/// counter-clockwise rotation of n_hat (deterministic, no Gram-Schmidt).
struct DirectionalFrame {
  int dim = 0;
  Vec n_hat;
  std::vector<Vec> tangents;

  // alpha = gamma_1 t_1 + ... + s n
  Vec point(const Vec& gamma, double s) const {
    Vec a = s * n_hat;
    for (int i = 0; i < dim - 1; ++i) a += gamma[i] * tangents[i];
    return a;
  }
  double s_coord(const Vec& alpha) const { return n_hat.dot(alpha); }
  Vec gamma_coord(const Vec& alpha) const {
    Vec g(dim - 1);
    for (int i = 0; i < dim - 1; ++i) g[i] = tangents[i].dot(alpha);
    return g;
  }
};

inline DirectionalFrame build_frame(const Vec& n_hat) {
  const int dim = static_cast<int>(n_hat.size());
  if (dim < 1 || dim > 2) throw InvalidDirection("direction must have dimension 1 or 2");
  const double norm = n_hat.norm();
  if (norm < 1e-300) throw InvalidDirection("zero direction vector");
  DirectionalFrame f;
  f.dim = dim;
  f.n_hat = n_hat / norm;
  if (dim == 2) {
    Vec t(2);
    t << -f.n_hat[1], f.n_hat[0];
    f.tangents.push_back(t);
  }
  return f;
}

/// s-range of one slice line {gamma. t + s n} inside the closed dual cell.
struct LineSegment {
  Vec gamma;
  double ell1 = 0.0;
  double ell2 = 0.0;
  double length() const { return ell2 - ell1; }
};

/// Clip the line through gamma along n against [-1/2,1/2]^2.
/// Empty when the line misses the square or the intersection degenerates
/// to a point.
inline std::optional<LineSegment> clip_line(const DirectionalFrame& frame, const Vec& gamma) {
  if (frame.dim == 1) {
    LineSegment seg;
    seg.gamma = Vec(0);
    seg.ell1 = -0.5;
    seg.ell2 = 0.5;
    return seg;
  }
  // Liang-Barsky against each coordinate slab.
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  const Vec p0 = gamma[0] * frame.tangents[0];
  for (int k = 0; k < 2; ++k) {
    const double d = frame.n_hat[k];
    const double p = p0[k];
    if (std::abs(d) < 1e-15) {
      if (p < -0.5 - kFaceTol || p > 0.5 + kFaceTol) return std::nullopt;
      continue;
    }
    double a = (-0.5 - p) / d;
    double b = (0.5 - p) / d;
    if (a > b) std::swap(a, b);
    lo = std::max(lo, a);
    hi = std::min(hi, b);
  }
  if (!(hi - lo > kFaceTol)) return std::nullopt;
  LineSegment seg;
  seg.gamma = gamma;
  seg.ell1 = lo;
  seg.ell2 = hi;
  return seg;
}

/// Face index of a boundary point: returns coordinate k with |alpha_k| = 1/2.
inline int boundary_face(const Vec& alpha, double tol = kFaceTol) {
  for (int k = 0; k < alpha.size(); ++k)
    if (std::abs(std::abs(alpha[k]) - 0.5) <= tol) return k;
  return -1;
}

/// Translation map on the boundary of B: flips the sign of the face
/// coordinate, so T maps C_j^+ onto C_j^- and T.T = id.
inline Vec translate_boundary(const Vec& alpha) {
  const int j = boundary_face(alpha);
  if (j < 0) throw std::domain_error("translate_boundary: point not on the dual cell boundary");
  Vec out = alpha;
  out[j] = -alpha[j];
  return out;
}

/// Canonical representative in B = (-1/2,1/2]: each coordinate reduced
/// mod 1, with -1/2 mapped to +1/2.
inline Vec wrap_to_B(const Vec& alpha) {
  Vec out = alpha;
  for (int k = 0; k < out.size(); ++k) {
    double v = out[k] - std::floor(out[k] + 0.5);
    if (v <= -0.5) v += 1.0;
    out[k] = v;
  }
  return out;
}

}  // namespace blochlap
