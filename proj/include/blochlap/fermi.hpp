#pragma once

// Level-set machinery for the dispersion surface mu_j = lambda:
// isocontour extraction on a sampled band grid, Newton refinement onto
// the surface, classification by the sign of grad mu . n, and the local
// complex extension across directionally degenerate points.

#include <ostream>

#include "blochlap/bands.hpp"
#include "blochlap/special.hpp"

namespace blochlap {

struct HigherOrderDegeneracy : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Tag { plus, minus, degenerate };

struct FermiPoint {
  Vec alpha;
  Vec grad;
  double grad_dot_n = 0.0;
  Tag tag = Tag::minus;
  bool band_degenerate = false;
  double weight = 0.0;  // arclength weight; nonzero only on plus runs
};

/// Raw isocontour piece before refinement.
struct FermiSegment {
  std::vector<Vec> raw;
  bool closed = false;
};

struct RefinedSegment {
  std::vector<FermiPoint> pts;
  bool closed = false;
  int dropped = 0;  // Newton non-convergence count
};

struct LevelSetData {
  int band = 1;  // 1-based
  std::vector<RefinedSegment> segments;
  std::vector<Vec> anchors;  // D: boundary points of the plus region
  double min_grad_norm = std::numeric_limits<double>::infinity();
};

namespace detail {

struct EdgeKey {
  int orient;  // 0: node (i,l)-(i+1,l), 1: node (i,l)-(i,l+1)
  int i, l;
  bool operator<(const EdgeKey& o) const {
    return std::tie(orient, i, l) < std::tie(o.orient, o.i, o.l);
  }
  bool operator==(const EdgeKey& o) const {
    return orient == o.orient && i == o.i && l == o.l;
  }
};

}  // namespace detail

/// Marching-squares polylines (dim 2) or per-interval root brackets
/// (dim 1) of mu_band = lambda on the sampled grid. Polylines are
/// oriented with grad mu on the left.
inline std::vector<FermiSegment> extract_level_set(const BandGrid& grid, double lambda, int band1) {
  const int b = band1 - 1;
  std::vector<FermiSegment> out;
  const int n1 = grid.nodes_per_axis();
  auto mu = [&](int i, int l) { return grid.nodes[grid.flat(i, l)].bands[b].mu - lambda; };
  if (grid.dim == 1) {
    for (int i = 0; i + 1 < n1; ++i) {
      const double fa = mu(i, 0), fb = mu(i + 1, 0);
      if ((fa < 0) == (fb < 0)) continue;
      FermiSegment seg;
      const double t = fa / (fa - fb);
      Vec p(1);
      p[0] = grid.nodes[i].alpha[0] + t * (grid.nodes[i + 1].alpha[0] - grid.nodes[i].alpha[0]);
      seg.raw.push_back(p);
      out.push_back(std::move(seg));
    }
    return out;
  }

  using detail::EdgeKey;
  std::map<EdgeKey, Vec> cut;  // interpolated crossing per edge
  auto edge_point = [&](const EdgeKey& e) -> std::optional<Vec> {
    const int i2 = e.orient == 0 ? e.i + 1 : e.i;
    const int l2 = e.orient == 0 ? e.l : e.l + 1;
    const double fa = mu(e.i, e.l), fb = mu(i2, l2);
    if ((fa < 0) == (fb < 0)) return std::nullopt;
    const double t = fa / (fa - fb);
    const Vec& a = grid.nodes[grid.flat(e.i, e.l)].alpha;
    const Vec& c = grid.nodes[grid.flat(i2, l2)].alpha;
    return Vec(a + t * (c - a));
  };

  // mini segments: pairs of edge keys per cell
  std::vector<std::array<EdgeKey, 2>> minis;
  std::map<EdgeKey, std::vector<int>> incident;
  for (int i = 0; i + 1 < n1; ++i)
    for (int l = 0; l + 1 < n1; ++l) {
      const EdgeKey bottom{0, i, l}, top{0, i, l + 1}, left{1, i, l}, right{1, i + 1, l};
      std::vector<EdgeKey> hit;
      for (const auto& e : {bottom, right, top, left}) {
        auto p = edge_point(e);
        if (p) {
          hit.push_back(e);
          cut.emplace(e, *p);
        }
      }
      std::vector<std::array<EdgeKey, 2>> cell_segs;
      if (hit.size() == 2) {
        cell_segs.push_back({hit[0], hit[1]});
      } else if (hit.size() == 4) {
        // saddle: pair by the center sign so same-sign corners connect
        const double center = 0.25 * (mu(i, l) + mu(i + 1, l) + mu(i, l + 1) + mu(i + 1, l + 1));
        const bool c00_side = (center < 0) == (mu(i, l) < 0);
        if (c00_side) {
          cell_segs.push_back({left, bottom});
          cell_segs.push_back({right, top});
        } else {
          cell_segs.push_back({bottom, right});
          cell_segs.push_back({top, left});
        }
      }
      for (auto& s : cell_segs) {
        const int idx = static_cast<int>(minis.size());
        minis.push_back(s);
        incident[s[0]].push_back(idx);
        incident[s[1]].push_back(idx);
      }
    }

  std::vector<bool> used(minis.size(), false);
  for (size_t start = 0; start < minis.size(); ++start) {
    if (used[start]) continue;
    // walk both directions from the starting mini segment
    std::vector<EdgeKey> chain{minis[start][0], minis[start][1]};
    used[start] = true;
    bool closed = false;
    for (int dir = 0; dir < 2; ++dir) {
      while (true) {
        const EdgeKey& tip = dir == 0 ? chain.back() : chain.front();
        int next = -1;
        for (int idx : incident[tip])
          if (!used[idx]) next = idx;
        if (next < 0) break;
        used[next] = true;
        const EdgeKey other = minis[next][0] == tip ? minis[next][1] : minis[next][0];
        if (other == (dir == 0 ? chain.front() : chain.back())) {
          closed = true;
          break;
        }
        if (dir == 0)
          chain.push_back(other);
        else
          chain.insert(chain.begin(), other);
      }
      if (closed) break;
    }
    FermiSegment seg;
    seg.closed = closed;
    for (const auto& e : chain) seg.raw.push_back(cut.at(e));
    // orient with the discrete gradient on the left of the travel direction
    if (seg.raw.size() >= 2) {
      const Vec t = seg.raw[1] - seg.raw[0];
      Vec mid = 0.5 * (seg.raw[0] + seg.raw[1]);
      const double h = 1.0 / grid.N;
      // central difference of the sampled band via nearest-node stencil
      auto mu_near = [&](double x, double y) {
        const int i = std::clamp(static_cast<int>(std::lround((x + 0.5) * grid.N)), 0, n1 - 1);
        const int l = std::clamp(static_cast<int>(std::lround((y + 0.5) * grid.N)), 0, n1 - 1);
        return mu(i, l);
      };
      const double gx = mu_near(mid[0] + h, mid[1]) - mu_near(mid[0] - h, mid[1]);
      const double gy = mu_near(mid[0], mid[1] + h) - mu_near(mid[0], mid[1] - h);
      const double cross = t[0] * gy - t[1] * gx;  // >0 iff grad on the left
      if (cross < 0) std::reverse(seg.raw.begin(), seg.raw.end());
    }
    out.push_back(std::move(seg));
  }
  return out;
}

/// Newton projection of raw points onto the level set: alpha <-
/// alpha - (mu - lambda) grad mu / ||grad mu||^2 until |mu - lambda|
/// <= 1e-10 (max 20 iterations). Non-convergent points are dropped.
inline RefinedSegment refine_points(const MediumSpec& medium, const FermiSegment& seg,
                                    double lambda, int band1, int J_max) {
  const int b = band1 - 1;
  RefinedSegment out;
  out.closed = seg.closed;
  for (const Vec& raw : seg.raw) {
    Vec alpha = raw;
    bool ok = false, degen = false;
    Vec grad = Vec::Zero(medium.dim);
    for (int it = 0; it < 20; ++it) {
      const auto H = assemble(medium, to_cvec(alpha), J_max);
      const auto band = eigensolve(H, b + 1)[b];
      if (band.degenerate) {
        degen = true;
        ok = true;  // keep flagged for Case II handling
        break;
      }
      grad = hf_gradient(medium, H, band);
      if (std::abs(band.mu - lambda) <= 1e-10) {
        ok = true;
        break;
      }
      alpha -= (band.mu - lambda) / grad.squaredNorm() * grad;
    }
    if (!ok) {
      ++out.dropped;
      continue;
    }
    FermiPoint p;
    p.alpha = alpha;
    p.grad = grad;
    p.band_degenerate = degen;
    out.pts.push_back(std::move(p));
  }
  return out;
}

namespace detail {

// Newton onto the level set from a nearby start (shared with anchors).
inline Vec project_to_level(const MediumSpec& medium, Vec alpha, double lambda, int b, int J_max) {
  for (int it = 0; it < 20; ++it) {
    const auto H = assemble(medium, to_cvec(alpha), J_max);
    const auto band = eigensolve(H, b + 1)[b];
    if (std::abs(band.mu - lambda) <= 1e-12) break;
    const Vec g = hf_gradient(medium, H, band);
    alpha -= (band.mu - lambda) / g.squaredNorm() * g;
  }
  return alpha;
}

inline double grad_dot_n_at(const MediumSpec& medium, const Vec& alpha, int b, int J_max,
                            const DirectionalFrame& frame) {
  const auto H = assemble(medium, to_cvec(alpha), J_max);
  const auto band = eigensolve(H, b + 1)[b];
  return hf_gradient(medium, H, band).dot(frame.n_hat);
}

}  // namespace detail

/// G_s for a real surface point, with ds/dgamma taken from the gradient
/// itself; algebraically equal to ||grad mu|| away from D.
inline double real_surface_factor(const Vec& grad, const DirectionalFrame& frame) {
  const double gn = grad.dot(frame.n_hat);
  if (frame.dim == 1) return std::abs(gn);
  const double gt = grad.dot(frame.tangents[0]);
  const double ds_dgamma = -gt / gn;
  return std::abs(gn) * std::sqrt(1.0 + ds_dgamma * ds_dgamma);
}

/// Tags every refined point by the sign of grad mu . n, locates the
/// anchor set D by bisection along the surface, splices the anchors into
/// the plus runs, and assigns trapezoid arclength weights over each run.
inline LevelSetData classify(const MediumSpec& medium, std::vector<RefinedSegment> segments,
                             const DirectionalFrame& frame, int band1, double lambda, int J_max) {
  const int b = band1 - 1;
  LevelSetData data;
  data.band = band1;
  for (auto& seg : segments) {
    for (auto& p : seg.pts) {
      p.grad_dot_n = p.grad.dot(frame.n_hat);
      const double gn = p.grad.norm();
      if (!p.band_degenerate) data.min_grad_norm = std::min(data.min_grad_norm, gn);
      if (p.band_degenerate || std::abs(p.grad_dot_n) <= 1e-8 * gn)
        p.tag = Tag::degenerate;
      else
        p.tag = p.grad_dot_n > 0 ? Tag::plus : Tag::minus;
    }
  }

  if (frame.dim == 1) {
    for (auto& seg : segments)
      for (auto& p : seg.pts)
        if (p.tag == Tag::plus) p.weight = 1.0;  // counting measure
    data.segments = std::move(segments);
    return data;
  }

  for (auto& seg : segments) {
    const int n = static_cast<int>(seg.pts.size());
    if (n == 0) continue;
    if (n == 1) {
      data.segments.push_back(std::move(seg));
      continue;
    }
    // insert an exact anchor between each plus/non-plus adjacent pair
    std::vector<FermiPoint> spliced;
    const int pairs = seg.closed ? n : n - 1;
    for (int k = 0; k < n; ++k) {
      spliced.push_back(seg.pts[k]);
      if (k >= pairs && !seg.closed) break;
      const FermiPoint& a = seg.pts[k];
      const FermiPoint& c = seg.pts[(k + 1) % n];
      if (k >= pairs) break;
      const bool ap = a.tag == Tag::plus, cp = c.tag == Tag::plus;
      if (ap == cp || a.tag == Tag::degenerate || c.tag == Tag::degenerate) continue;
      // bisection of grad mu . n along the surface arc between a and c
      double lo = 0.0, hi = 1.0;
      double flo = a.grad_dot_n;
      Vec anchor;
      for (int it = 0; it < 40; ++it) {
        const double mid = 0.5 * (lo + hi);
        anchor = detail::project_to_level(medium, Vec(a.alpha + mid * (c.alpha - a.alpha)), lambda,
                                          b, J_max);
        const double fm = detail::grad_dot_n_at(medium, anchor, b, J_max, frame);
        if ((fm < 0) == (flo < 0)) {
          lo = mid;
          flo = fm;
        } else {
          hi = mid;
        }
      }
      FermiPoint ap2;
      ap2.alpha = anchor;
      const auto H = assemble(medium, to_cvec(anchor), J_max);
      const auto band = eigensolve(H, b + 1)[b];
      ap2.grad = band.degenerate ? Vec::Zero(frame.dim) : hf_gradient(medium, H, band);
      ap2.grad_dot_n = ap2.grad.dot(frame.n_hat);
      ap2.tag = Tag::degenerate;
      ap2.band_degenerate = band.degenerate;
      data.anchors.push_back(anchor);
      spliced.push_back(std::move(ap2));
    }
    seg.pts = std::move(spliced);

    // degenerate-tagged points bordering a plus run are anchors themselves
    {
      const int mm = static_cast<int>(seg.pts.size());
      for (int k = 0; k < mm; ++k) {
        const auto& p = seg.pts[k];
        if (p.tag != Tag::degenerate || p.band_degenerate) continue;
        bool near_plus = false;
        for (int d : {-1, +1}) {
          const int q = k + d;
          if (seg.closed)
            near_plus |= seg.pts[(q % mm + mm) % mm].tag == Tag::plus;
          else if (q >= 0 && q < mm)
            near_plus |= seg.pts[q].tag == Tag::plus;
        }
        if (near_plus) data.anchors.push_back(p.alpha);
      }
    }

    // trapezoid weights on maximal runs of plus points, extended to the
    // adjacent degenerate endpoints (anchors or D members)
    const int m = static_cast<int>(seg.pts.size());
    auto in_run = [&](int k) {
      return seg.pts[(k % m + m) % m].tag != Tag::minus;
    };
    auto has_plus = [&](int k0, int k1) {
      for (int k = k0; k <= k1; ++k)
        if (seg.pts[(k % m + m) % m].tag == Tag::plus) return true;
      return false;
    };
    auto dist = [&](int u, int v) {
      return (seg.pts[(u % m + m) % m].alpha - seg.pts[(v % m + m) % m].alpha).norm();
    };
    std::vector<bool> visited(m, false);
    for (int k = 0; k < m; ++k) {
      if (visited[k] || !in_run(k)) continue;
      // expand to the maximal run containing k
      int lo = k, hi = k;
      if (seg.closed) {
        while (hi - lo + 1 < m && in_run(hi + 1)) ++hi;
        while (hi - lo + 1 < m && in_run(lo - 1)) --lo;
      } else {
        while (hi + 1 < m && in_run(hi + 1)) ++hi;
        while (lo - 1 >= 0 && in_run(lo - 1)) --lo;
      }
      for (int u = lo; u <= hi; ++u) visited[(u % m + m) % m] = true;
      if (!has_plus(lo, hi)) continue;
      const bool full_cycle = seg.closed && hi - lo + 1 == m;
      for (int u = lo; u <= hi; ++u) {
        double w = 0.0;
        if (u > lo || full_cycle) w += 0.5 * dist(u - 1, u);
        if (u < hi || full_cycle) w += 0.5 * dist(u, u + 1);
        seg.pts[(u % m + m) % m].weight = w;
      }
    }
    data.segments.push_back(std::move(seg));
  }
  return data;
}

/// Locally complexified surface branch across one anchor in D.
struct ComplexBranch {
  int band = 1;
  Vec anchor;
  double a0 = 0.0;  // half the directional second derivative at the anchor
  int sign_s = 1;   // reporting convention; assembly uses dmu_ds directly
  std::vector<double> gamma_samples;
  std::vector<double> quad_weights;  // includes the sqrt-substitution factor
  std::vector<Cplx> s_values;        // Im > 0
  std::vector<Cplx> dmu_ds;          // continued derivative along n_hat
  std::vector<double> G_s;
  std::vector<Cplx> mu;              // continued eigenvalue (residual check)
  std::vector<CVec> coeffs;          // continued eigenvectors, real-side gauge
};

namespace detail {

struct QuadraticFit {
  double a, b, c;  // mu(s0 + t) - lambda ~ a t^2 + b t + c
  double delta() const { return b * b - 4.0 * a * c; }
};

inline QuadraticFit fit_slice_quadratic(const MediumSpec& medium, const DirectionalFrame& frame,
                                        const Vec& gamma, double s0, double lambda, int b,
                                        int J_max, double ds) {
  auto mu_at = [&](double s) {
    return band_at(medium, frame.point(gamma, s), b, J_max).mu;
  };
  const double m0 = mu_at(s0 - ds), m1 = mu_at(s0), m2 = mu_at(s0 + ds);
  QuadraticFit f;
  f.a = (m2 - 2.0 * m1 + m0) / (2.0 * ds * ds);
  f.b = (m2 - m0) / (2.0 * ds);
  f.c = m1 - lambda;
  return f;
}

}  // namespace detail

inline ComplexBranch complex_extension(const MediumSpec& medium, const Vec& anchor,
                                       const DirectionalFrame& frame, int band1, double lambda,
                                       double im_cap, int samples, int J_max) {
  const int b = band1 - 1;
  ComplexBranch br;
  br.band = band1;
  br.anchor = anchor;
  const double s0 = frame.s_coord(anchor);
  const Vec gamma0 = frame.gamma_coord(anchor);

  // a0 = (1/2) d/ds (grad mu . n) by Richardson-extrapolated central
  // differences, h = 1e-3
  auto gdn = [&](double s) {
    return detail::grad_dot_n_at(medium, frame.point(gamma0, s), b, J_max, frame);
  };
  const double h = 1e-3;
  const double d1 = (gdn(s0 + h) - gdn(s0 - h)) / (2.0 * h);
  const double d2 = (gdn(s0 + 0.5 * h) - gdn(s0 - 0.5 * h)) / h;
  br.a0 = 0.5 * (4.0 * d2 - d1) / 3.0;
  if (std::abs(br.a0) < 1e-6)
    throw HigherOrderDegeneracy(
        "complex_extension: vanishing directional curvature at the anchor (K >= 3 branch "
        "structure, not modeled)");

  const double ds = 2e-2;
  const double dg = 1e-2;
  // side where the real roots vanish: discriminant goes negative
  int side = 0;
  for (int trial : {+1, -1}) {
    Vec g = gamma0;
    g[0] += trial * dg;
    if (detail::fit_slice_quadratic(medium, frame, g, s0, lambda, b, J_max, ds).delta() < 0.0) {
      side = trial;
      break;
    }
  }
  if (side == 0)
    throw std::runtime_error("complex_extension: no vanishing side found at the anchor");

  // march outward to find the window edge
  double width = 0.0;
  for (int k = 1; k < 400; ++k) {
    Vec g = gamma0;
    g[0] += side * k * dg;
    if (!clip_line(frame, g)) break;
    const auto fit = detail::fit_slice_quadratic(medium, frame, g, s0, lambda, b, J_max, ds);
    if (fit.delta() >= 0.0) break;
    width = k * dg;
    const double im = std::sqrt(-fit.delta()) / (2.0 * std::abs(fit.a));
    if (im >= im_cap) break;
  }
  if (width == 0.0) return br;  // empty window

  // gamma = gamma0 + side u^2 removes the sqrt singularity of s(gamma);
  // samples ascending in u (innermost first)
  std::vector<double> gx, gw;
  detail::gauss_legendre(samples, gx, gw);
  const double u_max = std::sqrt(width);
  std::vector<std::pair<double, double>> uw;
  for (int k = 0; k < samples; ++k) {
    const double u = 0.5 * u_max * (gx[k] + 1.0);
    uw.emplace_back(u, gw[k] * 0.5 * u_max * 2.0 * u);  // d gamma = 2 u du
  }
  std::sort(uw.begin(), uw.end());
  std::vector<double> u_samples;
  for (const auto& [u, w] : uw) {
    Vec g = gamma0;
    g[0] += side * u * u;

    const auto fit = detail::fit_slice_quadratic(medium, frame, g, s0, lambda, b, J_max, ds);
    if (fit.delta() >= 0.0) continue;  // grazing sample, skip
    const double sgn_a = fit.a >= 0 ? 1.0 : -1.0;
    Cplx t(-fit.b / (2.0 * fit.a), sgn_a * std::sqrt(-fit.delta()) / (2.0 * fit.a));
    Cplx s = s0 + t;

    // Newton refinement of the true analytic root, seeded from the real
    // vertex point of the slice parabola
    const double s_vertex = s0 - fit.b / (2.0 * fit.a);
    CVec seed = detail::band_at(medium, frame.point(g, s_vertex), b, J_max).coeffs;
    ContinuedPair cp;
    Cplx dmu = 0.0;
    for (int it = 0; it < 15; ++it) {
      CplxVec alpha_c(frame.dim);
      for (int c = 0; c < frame.dim; ++c)
        alpha_c[c] = frame.point(g, 0.0)[c] + s * frame.n_hat[c];
      const auto H = assemble(medium, alpha_c, J_max);
      cp = continue_eigenpair(H, seed, lambda);
      seed = cp.coeffs;
      dmu = 0.0;
      for (int c = 0; c < frame.dim; ++c)
        dmu += frame.n_hat[c] * matrix_gradient_component(medium, H, cp.coeffs, cp.mu, c);
      if (std::abs(cp.mu - lambda) <= 1e-12 * (1.0 + std::abs(lambda))) break;
      s -= (cp.mu - lambda) / dmu;
    }
    if (s.imag() <= 0.0)
      throw std::runtime_error("complex_extension: root left the upper half plane");

    br.gamma_samples.push_back(g[0]);
    br.quad_weights.push_back(w);
    br.s_values.push_back(s);
    br.dmu_ds.push_back(dmu);
    br.mu.push_back(cp.mu);
    br.coeffs.push_back(cp.coeffs);
    u_samples.push_back(u);
  }

  // ds/dgamma = (ds/du) / (2 u side): s(u) is smooth through the anchor
  // while s(gamma) has the square-root singularity, so differentiate in u
  const int n = static_cast<int>(br.s_values.size());
  br.G_s.resize(n);
  for (int k = 0; k < n; ++k) {
    Cplx dsdu;
    if (n == 1) {
      dsdu = 0.0;
    } else if (k == 0 || k == n - 1) {
      const int a = k == 0 ? 0 : n - 2;
      dsdu = (br.s_values[a + 1] - br.s_values[a]) / (u_samples[a + 1] - u_samples[a]);
    } else {
      // three-point Lagrange derivative on the nonuniform stencil
      const double x0 = u_samples[k - 1], x1 = u_samples[k], x2 = u_samples[k + 1];
      const Cplx y0 = br.s_values[k - 1], y1 = br.s_values[k], y2 = br.s_values[k + 1];
      dsdu = y0 * (x1 - x2) / ((x0 - x1) * (x0 - x2)) +
             y1 * (2.0 * x1 - x0 - x2) / ((x1 - x0) * (x1 - x2)) +
             y2 * (x1 - x0) / ((x2 - x0) * (x2 - x1));
    }
    const Cplx dsdg = dsdu / (2.0 * u_samples[k] * side);
    br.G_s[k] = std::abs(br.dmu_ds[k]) * std::sqrt(1.0 + std::norm(dsdg));
  }
  return br;
}

inline void write_fermi_csv(const std::vector<LevelSetData>& levels, int dim, std::ostream& os) {
  os << (dim == 1 ? "band,segment,point,alpha1,grad1,grad_dot_n,tag\n"
                  : "band,segment,point,alpha1,alpha2,grad1,grad2,grad_dot_n,tag\n");
  char buf[32];
  auto put = [&](double v, char tail) {
    std::snprintf(buf, sizeof buf, "%.17g%c", v, tail);
    os << buf;
  };
  auto tag_name = [](Tag t) {
    return t == Tag::plus ? "plus" : t == Tag::minus ? "minus" : "degenerate";
  };
  for (const auto& lv : levels) {
    int si = 0;
    for (const auto& seg : lv.segments) {
      int pi = 0;
      for (const auto& p : seg.pts) {
        os << lv.band << ',' << si << ',' << pi++ << ',';
        put(p.alpha[0], ',');
        if (dim > 1) put(p.alpha[1], ',');
        put(p.grad[0], ',');
        if (dim > 1) put(p.grad[1], ',');
        put(p.grad_dot_n, ',');
        os << tag_name(p.tag) << '\n';
      }
      ++si;
    }
  }
}

inline void write_fermi_complex_csv(const std::vector<ComplexBranch>& branches, int dim,
                                    std::ostream& os) {
  os << (dim == 1 ? "band,anchor1,gamma,re_s,im_s,G,sign\n"
                  : "band,anchor1,anchor2,gamma,re_s,im_s,G,sign\n");
  char buf[32];
  auto put = [&](double v, char tail) {
    std::snprintf(buf, sizeof buf, "%.17g%c", v, tail);
    os << buf;
  };
  for (const auto& br : branches)
    for (size_t k = 0; k < br.s_values.size(); ++k) {
      os << br.band << ',';
      put(br.anchor[0], ',');
      if (dim > 1) put(br.anchor[1], ',');
      put(br.gamma_samples[k], ',');
      put(br.s_values[k].real(), ',');
      put(br.s_values[k].imag(), ',');
      put(br.G_s[k], ',');
      os << br.sign_s << '\n';
    }
}

}  // namespace blochlap
