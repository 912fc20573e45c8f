#pragma once

// Sampled dispersion relation over the dual cell, analytic relabeling of
// bands along directional slices, and the regularity diagnostics that
// gate the contour construction.

#include <optional>
#include <ostream>
#include <set>
#include <vector>

#include "blochlap/cell.hpp"

namespace blochlap {

struct CrossingAmbiguity : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Tensor grid over [-1/2,1/2]^dim with N+1 nodes per axis (both faces
/// present so the symmetric pair alpha, -alpha is always on-grid).
struct GridNode {
  Vec alpha;
  std::vector<BandEigen> bands;                // ascending
  std::vector<std::optional<Vec>> gradients;   // present iff band simple
};

struct BandGrid {
  int dim = 1;
  int N = 0;      // intervals per axis; N+1 nodes
  int J_max = 0;
  int num_bands = 0;
  std::vector<GridNode> nodes;  // row-major
  double max_asymmetry = 0.0;   // max |mu_j(alpha) - mu_j(-alpha)| observed

  int nodes_per_axis() const { return N + 1; }
  int node_count() const { return static_cast<int>(nodes.size()); }
  int flat(int i, int l = 0) const { return dim == 1 ? i : i * nodes_per_axis() + l; }
};

namespace detail {

inline Vec grid_alpha(int dim, int N, int i, int l) {
  Vec a(dim);
  a[0] = -0.5 + static_cast<double>(i) / N;
  if (dim > 1) a[1] = -0.5 + static_cast<double>(l) / N;
  return a;
}

inline BandEigen band_at(const MediumSpec& medium, const Vec& alpha, int band, int J_max) {
  const auto H = assemble(medium, to_cvec(alpha), J_max);
  return eigensolve(H, band + 1)[band];
}

}  // namespace detail

inline BandGrid sample_grid(const MediumSpec& medium, int N, int num_bands, int J_max) {
  if (N < 8) throw std::invalid_argument("sample_grid: N must be >= 8");
  BandGrid grid;
  grid.dim = medium.dim;
  grid.N = N;
  grid.J_max = J_max;
  grid.num_bands = num_bands;
  const int n1 = N + 1;
  const int total = medium.dim == 1 ? n1 : n1 * n1;
  grid.nodes.resize(total);
  for (int i = 0; i < n1; ++i) {
    const int l_hi = medium.dim == 1 ? 1 : n1;
    for (int l = 0; l < l_hi; ++l) {
      GridNode& node = grid.nodes[grid.flat(i, l)];
      node.alpha = detail::grid_alpha(medium.dim, N, i, l);
      const auto H = assemble(medium, to_cvec(node.alpha), J_max);
      node.bands = eigensolve(H, num_bands);
      node.gradients.resize(num_bands);
      for (int b = 0; b < num_bands; ++b)
        if (!node.bands[b].degenerate) node.gradients[b] = hf_gradient(medium, H, node.bands[b]);
    }
  }
  // mu_j(alpha) = mu_j(-alpha) on the matched node pairs
  for (int i = 0; i < n1; ++i) {
    const int l_hi = medium.dim == 1 ? 1 : n1;
    for (int l = 0; l < l_hi; ++l) {
      const auto& a = grid.nodes[grid.flat(i, l)];
      const auto& b = grid.nodes[grid.flat(N - i, medium.dim == 1 ? 0 : N - l)];
      for (int k = 0; k < num_bands; ++k)
        grid.max_asymmetry = std::max(grid.max_asymmetry, std::abs(a.bands[k].mu - b.bands[k].mu));
    }
  }
  return grid;
}

/// Kato-style relabeling of the first branches along the slice through
/// gamma: eigenvectors are matched greedily across consecutive s nodes,
/// so labels follow analytic branches through crossings instead of the
/// sort order.
struct SliceBranches {
  Vec gamma;                       // empty for dim=1
  std::vector<double> s_nodes;     // on [l1, l2]
  struct Branch {
    std::vector<double> mu;
    std::vector<CVec> coeffs;
    std::vector<double> dmu_ds;    // directional derivative along n_hat
  };
  std::vector<Branch> branches;
};

inline SliceBranches relabel_slice(const MediumSpec& medium, const DirectionalFrame& frame,
                                   const Vec& gamma, int num_branches, int s_resolution,
                                   int J_max) {
  SliceBranches out;
  out.gamma = gamma;
  double l1 = -0.5, l2 = 0.5;
  if (medium.dim > 1) {
    const auto seg = clip_line(frame, gamma);
    if (!seg) throw std::invalid_argument("relabel_slice: slice misses the dual cell");
    l1 = seg->ell1;
    l2 = seg->ell2;
  }
  const int nodes = std::max(1, s_resolution + 1);
  for (int k = 0; k < nodes; ++k)
    out.s_nodes.push_back(nodes == 1 ? l1 : l1 + (l2 - l1) * k / (nodes - 1));
  out.branches.resize(num_branches);

  // the buffer keeps both members of boundary-tied pairs inside the
  // candidate pool so matching never runs off the end at a crossing
  const int pool = std::min(num_branches + 4, 2 * J_max + 1);
  std::vector<CVec> prev_vecs;
  for (int k = 0; k < nodes; ++k) {
    const Vec alpha = frame.point(gamma, out.s_nodes[k]);
    const auto H = assemble(medium, to_cvec(alpha), J_max);
    const auto bands = eigensolve(H, pool);
    CMat Hn = CMat::Zero(H.size(), H.size());
    for (int c = 0; c < medium.dim; ++c) Hn += frame.n_hat[c] * assemble_gradient(medium, H, c);

    std::vector<int> pick(num_branches);
    if (k == 0) {
      for (int b = 0; b < num_branches; ++b) pick[b] = b;
    } else {
      std::vector<bool> used(bands.size(), false);
      for (int b = 0; b < num_branches; ++b) {
        double best = -1.0, second = -1.0;
        int arg = -1;
        for (size_t c = 0; c < bands.size(); ++c) {
          const double ov = std::abs(prev_vecs[b].dot(bands[c].coeffs));
          if (ov > best) {
            second = best;
            best = ov;
            arg = static_cast<int>(c);
          } else if (ov > second) {
            second = ov;
          }
        }
        if (best < 0.9 || best - second < 0.05 || used[arg])
          throw CrossingAmbiguity("relabel_slice: ambiguous branch matching at s = " +
                                  std::to_string(out.s_nodes[k]));
        used[arg] = true;
        pick[b] = arg;
      }
    }
    prev_vecs.resize(num_branches);
    for (int b = 0; b < num_branches; ++b) {
      const auto& band = bands[pick[b]];
      prev_vecs[b] = band.coeffs;
      const Cplx d = band.coeffs.adjoint() * Hn * band.coeffs;
      out.branches[b].mu.push_back(band.mu);
      out.branches[b].coeffs.push_back(band.coeffs);
      out.branches[b].dmu_ds.push_back(d.real());
    }
  }
  return out;
}

struct RegularityReport {
  std::vector<int> J;                   // 1-based bands whose range brackets lambda
  double min_grad_norm = std::numeric_limits<double>::infinity();
  int level_point_count = 0;
  int degenerate_direction_count = 0;   // |grad mu . n| <= 1e-8 ||grad mu||
  int degenerate_band_count = 0;
  bool trivially_regular = false;       // J empty
  bool regular = false;
};

namespace detail {

// Bisection along the segment alpha(t) = a + t (b - a) for mu_band = lambda.
inline Vec bisect_level(const MediumSpec& medium, const Vec& a, const Vec& b, int band,
                        double lambda, int J_max) {
  double lo = 0.0, hi = 1.0;
  double flo = band_at(medium, a, band, J_max).mu - lambda;
  for (int it = 0; it < 50; ++it) {
    const double mid = 0.5 * (lo + hi);
    const Vec am = a + mid * (b - a);
    const double fm = band_at(medium, am, band, J_max).mu - lambda;
    if ((fm < 0) == (flo < 0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return a + 0.5 * (lo + hi) * (b - a);
}

// Golden-section refinement of a bracketed interior extremum.
inline double refine_extremum(const MediumSpec& medium, const Vec& a, const Vec& b, int band,
                              int J_max, bool minimum) {
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double lo = 0.0, hi = 1.0;
  double c = hi - gr * (hi - lo), d = lo + gr * (hi - lo);
  auto val = [&](double t) {
    const Vec at = a + t * (b - a);
    const double v = band_at(medium, at, band, J_max).mu;
    return minimum ? v : -v;
  };
  double fc = val(c), fd = val(d);
  for (int it = 0; it < 60 && hi - lo > 1e-12; ++it) {
    if (fc < fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - gr * (hi - lo);
      fc = val(c);
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + gr * (hi - lo);
      fd = val(d);
    }
  }
  const double v = val(0.5 * (lo + hi));
  return minimum ? v : -v;
}

}  // namespace detail

/// Report on Assumptions 1-2 at the level lambda: member bands J, the
/// worst gradient norm over refined level-set points, and counts of
/// directionally degenerate / band-degenerate points.
inline RegularityReport check_regularity(const MediumSpec& medium, const BandGrid& grid,
                                         double lambda, const DirectionalFrame& frame) {
  RegularityReport rep;
  const int n1 = grid.nodes_per_axis();
  // sampled band ranges, refined at interior grid-line extrema
  for (int b = 0; b < grid.num_bands; ++b) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& node : grid.nodes) {
      lo = std::min(lo, node.bands[b].mu);
      hi = std::max(hi, node.bands[b].mu);
    }
    // interior extrema can undershoot the sampled range; refine triples
    auto mu_at = [&](int i, int l) { return grid.nodes[grid.flat(i, l)].bands[b].mu; };
    const int l_hi = grid.dim == 1 ? 1 : n1;
    for (int l = 0; l < l_hi; ++l)
      for (int i = 1; i + 1 < n1; ++i) {
        const double m0 = mu_at(i - 1, l), m1 = mu_at(i, l), m2 = mu_at(i + 1, l);
        const auto& a = grid.nodes[grid.flat(i - 1, l)].alpha;
        const auto& c = grid.nodes[grid.flat(i + 1, l)].alpha;
        // non-strict on the right so symmetric plateau pairs still qualify
        if (m1 < m0 && m1 <= m2)
          lo = std::min(lo, detail::refine_extremum(medium, a, c, b, grid.J_max, true));
        if (m1 > m0 && m1 >= m2)
          hi = std::max(hi, detail::refine_extremum(medium, a, c, b, grid.J_max, false));
      }
    if (lo - 1e-6 <= lambda && lambda <= hi + 1e-6) rep.J.push_back(b + 1);
  }
  if (rep.J.empty()) {
    rep.trivially_regular = true;
    rep.regular = true;
    return rep;
  }

  for (int band1 : rep.J) {
    const int b = band1 - 1;
    std::vector<Vec> points;
    auto scan_edge = [&](int i0, int l0, int i1, int l1) {
      const auto& na = grid.nodes[grid.flat(i0, l0)];
      const auto& nb = grid.nodes[grid.flat(i1, l1)];
      const double fa = na.bands[b].mu - lambda, fb = nb.bands[b].mu - lambda;
      if ((fa < 0) != (fb < 0))
        points.push_back(detail::bisect_level(medium, na.alpha, nb.alpha, b, lambda, grid.J_max));
    };
    if (grid.dim == 1) {
      for (int i = 0; i + 1 < n1; ++i) scan_edge(i, 0, i + 1, 0);
    } else {
      for (int l = 0; l < n1; ++l)
        for (int i = 0; i + 1 < n1; ++i) scan_edge(i, l, i + 1, l);
      for (int i = 0; i < n1; ++i)
        for (int l = 0; l + 1 < n1; ++l) scan_edge(i, l, i, l + 1);
    }
    // grazing points (band touches the level without a sign change)
    for (const auto& node : grid.nodes)
      if (std::abs(node.bands[b].mu - lambda) <= 1e-8) points.push_back(node.alpha);

    for (const auto& p : points) {
      const auto H = assemble(medium, to_cvec(p), grid.J_max);
      const auto band = eigensolve(H, b + 1)[b];
      ++rep.level_point_count;
      if (band.degenerate) {
        ++rep.degenerate_band_count;
        continue;
      }
      const Vec g = hf_gradient(medium, H, band);
      const double gn = g.norm();
      rep.min_grad_norm = std::min(rep.min_grad_norm, gn);
      if (std::abs(g.dot(frame.n_hat)) <= 1e-8 * gn) ++rep.degenerate_direction_count;
    }
  }
  rep.regular = rep.degenerate_band_count == 0 && rep.min_grad_norm > 1e-6;
  return rep;
}

inline void write_bands_csv(const BandGrid& grid, std::ostream& os) {
  os << (grid.dim == 1 ? "alpha1,band,mu,dmu1\n" : "alpha1,alpha2,band,mu,dmu1,dmu2\n");
  char buf[32];
  auto put = [&](double v, char tail) {
    std::snprintf(buf, sizeof buf, "%.17g%c", v, tail);
    os << buf;
  };
  for (const auto& node : grid.nodes)
    for (int b = 0; b < grid.num_bands; ++b) {
      put(node.alpha[0], ',');
      if (grid.dim > 1) put(node.alpha[1], ',');
      os << (b + 1) << ',';
      put(node.bands[b].mu, ',');
      // degenerate bands carry empty gradient fields
      if (!node.gradients[b].has_value()) {
        os << (grid.dim == 1 ? "\n" : ",\n");
        continue;
      }
      if (grid.dim == 1) {
        put((*node.gradients[b])[0], '\n');
      } else {
        put((*node.gradients[b])[0], ',');
        put((*node.gradients[b])[1], '\n');
      }
    }
}

}  // namespace blochlap
