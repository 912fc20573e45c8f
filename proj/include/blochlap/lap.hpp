#pragma once

// Deformed-contour assembly of the limiting-absorption solution: the
// directional Brillouin-zone contour B_sigma, the three-term split
// (contour integral + surface residues + captured complex residues),
// the damped reference solve, and a single-line residue verifier.
//
// Accuracy rests on per-slice pole subtraction: near-contour poles of
// the resolvent are removed with a periodic cotangent kernel whose
// contour integral is known exactly (-i pi below the line, +i pi
// above), so the trapezoid only ever sees a smooth periodic remainder.

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "blochlap/bands.hpp"
#include "blochlap/fermi.hpp"
#include "blochlap/special.hpp"

namespace blochlap {

struct ContourFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

/// w(alpha, x) for a coefficient vector without a BlochMatrix at hand.
inline Cplx field_value(int dim, int J_max, const CplxVec& alpha, const CVec& c, const Vec& x) {
  const int n1 = 2 * J_max + 1;
  const int N = dim == 1 ? n1 : n1 * n1;
  Cplx phase_arg = alpha[0] * x[0];
  if (dim > 1) phase_arg += alpha[1] * x[1];
  const Cplx outer = std::exp(Cplx(0.0, 1.0) * phase_arg);
  Cplx s = 0.0;
  for (int r = 0; r < N; ++r) {
    const int j0 = dim == 1 ? r - J_max : r / n1 - J_max;
    const int j1 = dim == 1 ? 0 : r % n1 - J_max;
    const double parg = j0 * x[0] + (dim > 1 ? j1 * x[1] : 0.0);
    s += c[r] * std::exp(Cplx(0.0, parg));
  }
  return outer * s * std::pow(2.0 * M_PI, -0.5 * dim);
}

/// C-infinity blend: 1 at t <= 0, 0 at t >= 1. Smoothness matters: a
/// merely C^1 profile caps the s-trapezoid at second order.
inline double bump_blend(double t) {
  if (t <= 0.0) return 1.0;
  if (t >= 1.0) return 0.0;
  const double a = std::exp(-1.0 / (1.0 - t));
  const double b = std::exp(-1.0 / t);
  return a / (a + b);
}

inline double wrap_periodic(double d, double period) {
  d = std::fmod(d, period);
  if (d < -0.5 * period) d += period;
  if (d >= 0.5 * period) d -= period;
  return d;
}

/// cot(pi z), overflow-free for large |Im z|.
inline Cplx periodic_cot(Cplx z) {
  const Cplx I(0.0, 1.0);
  if (z.imag() >= 0.0) {
    const Cplx q = std::exp(2.0 * M_PI * I * z);  // |q| <= 1
    return I * (q + 1.0) / (q - 1.0);
  }
  const Cplx w = std::exp(-2.0 * M_PI * I * z);  // |w| < 1
  return I * (1.0 + w) / (1.0 - w);
}

/// Left eigenvector of H at eigenvalue mu by inverse iteration on H^H.
inline CVec left_eigvec(const BlochMatrix& H, Cplx mu, const CVec& seed, int iterations = 4) {
  const int N = H.size();
  if (H.diagonal) {
    Eigen::Index i;
    seed.cwiseAbs().maxCoeff(&i);
    CVec u = CVec::Zero(N);
    u[i] = seed[i] / std::abs(seed[i]);
    return u;
  }
  CVec u = seed.conjugate().eval();
  u.normalize();
  for (int it = 0; it < iterations; ++it) {
    CMat M = H.entries.adjoint();
    M.diagonal().array() -= std::conj(mu);
    Eigen::PartialPivLU<CMat> lu(M + 1e-14 * CMat::Identity(N, N));
    CVec w = lu.solve(u);
    const double nw = w.norm();
    if (!(nw > 0) || !std::isfinite(nw))
      throw std::runtime_error("left_eigvec: inverse iteration stagnated");
    u = w / nw;
  }
  return u;
}

/// Shortest dual-lattice vector along n_hat; its length is the slice
/// period P, and slices tile B with tangential extent 1/P.
inline double slice_period(const DirectionalFrame& frame) {
  if (frame.dim == 1) return 1.0;
  for (int q = 0; q <= 12; ++q)
    for (int p = -12; p <= 12; ++p) {
      if (p == 0 && q == 0) continue;
      const double len = std::hypot(double(p), double(q));
      if (std::abs(p * frame.n_hat[1] - q * frame.n_hat[0]) < 1e-12 * len &&
          p * frame.n_hat[0] + q * frame.n_hat[1] > 0)
        return len;
    }
  throw ContourFailure("slice_period: direction is not commensurate with the lattice");
}

}  // namespace detail

/// One pole of s -> (H(gamma t + s n) - lambda)^{-1} on a slice, with
/// the spectral data needed for residues: R(x) = (u^H g / u^H v) phi_v(x) / mu'.
struct SlicePole {
  int band = 1;  // 1-based
  Cplx s;
  CplxVec alpha;
  CVec right;
  CVec left;
  Cplx norm;     // left^H right
  Cplx dmu_ds;   // directional eigenvalue derivative at the pole
  bool below = false;     // under the deformed line
  bool captured = false;  // carries a nonzero anchor window weight
  double chi = 0.0;       // anchor window weight, 0 away from anchors
};

/// Quadrature node of the windowed residue integral along an anchor
/// branch, parameterized by t with gamma = gamma_a + side t^2 so the
/// integrand stays bounded through the anchor.
struct BranchNode {
  SlicePole pole;
  double weight = 0.0;  // GL weight x 2t x window
};

struct ContourNode {
  double s = 0.0;
  double sigma = 0.0;
  Cplx z;    // s + i sigma
  Cplx jac;  // 1 + i dsigma/ds
};

struct ContourSlice {
  Vec gamma;           // size dim-1
  double weight = 1.0;  // tangential measure carried by the slice
  double node_weight = 0.0;  // s-period / node count
  std::vector<ContourNode> nodes;
  std::vector<SlicePole> poles;
};

struct ContourSpec {
  DirectionalFrame frame;
  double lambda = 0.0;
  int J_max = 0;
  double sigma1 = 0.0;
  double sigma2 = 0.0;  // value actually used, after retries
  double halo = 0.0;
  double period = 1.0;
  int retries = 0;
  double worst_margin = std::numeric_limits<double>::infinity();
  std::vector<Vec> halo_cloud;  // F+ and anchor points steering sigma
  std::vector<ContourSlice> slices;
  std::vector<BranchNode> branch_nodes;   // full anchor window
  std::vector<BranchNode> capture_nodes;  // swept subregion Im s < sigma2

  struct AnchorSite {
    int band = 1;
    double gamma = 0.0;  // tangential coordinate, periodic mod 1/period
    double s = 0.0;      // coordinate along n_hat, periodic mod period
    Vec alpha;           // anchor point in quasimomentum coordinates
  };
  std::vector<AnchorSite> anchor_sites;

  /// Window weight of a pole near the anchors of its band. The same
  /// weight is subtracted from the slice sum and restored by the
  /// branch integral, so the tangential integrand stays smooth.
  double chi_single(const AnchorSite& a, int band, double gamma, Cplx s) const {
    if (frame.dim == 1 || !(s.imag() > 1e-12) || halo <= 0.0 || a.band != band) return 0.0;
    // Distance on the quasimomentum torus: for tilted directions the
    // (gamma, s) identifications are skew (a gamma wrap shifts s), so
    // independent coordinate wraps would miss anchor images near the
    // slice-domain boundary.
    Vec g(frame.dim - 1);
    g[0] = gamma;
    const Vec p = frame.point(g, s.real());
    double d2 = std::numeric_limits<double>::infinity();
    for (int m0 = -1; m0 <= 1; ++m0)
      for (int m1 = -1; m1 <= 1; ++m1) {
        const double d0 = p[0] + m0 - a.alpha[0];
        const double d1 = p[1] + m1 - a.alpha[1];
        d2 = std::min(d2, d0 * d0 + d1 * d1);
      }
    return detail::bump_blend(std::sqrt(d2) / halo);
  }

  double chi_at(int band, double gamma, Cplx s) const {
    double w = 0.0;
    for (const auto& a : anchor_sites) w += chi_single(a, band, gamma, s);
    return w;
  }

  /// C-infinity height profile over the periodic distance to the cloud.
  double sigma_at(const Vec& alpha) const {
    if (halo_cloud.empty() || halo <= 0.0) return sigma1;
    double d = std::numeric_limits<double>::infinity();
    const int dim = frame.dim;
    for (const auto& p : halo_cloud)
      for (int m0 = -1; m0 <= 1; ++m0)
        for (int m1 = -(dim > 1); m1 <= (dim > 1); ++m1) {
          double dd = alpha[0] + m0 - p[0];
          double r2 = dd * dd;
          if (dim > 1) {
            dd = alpha[1] + m1 - p[1];
            r2 += dd * dd;
          }
          d = std::min(d, std::sqrt(r2));
        }
    return sigma1 + (sigma2 - sigma1) * detail::bump_blend((d - halo) / halo);
  }
};

namespace detail {

/// Real roots and near-real complex pole pairs of mu_b(s) = lambda on
/// one slice, located by a scan + bisection / quadratic-fit Newton.
inline std::vector<SlicePole> find_slice_poles(const MediumSpec& medium,
                                               const DirectionalFrame& frame, const Vec& gamma,
                                               double lambda, const std::vector<int>& bands,
                                               int J_max, double period, double im_window) {
  std::vector<SlicePole> poles;
  const int M = 96;
  const double h = period / M;
  const double s_lo = -0.5 * period;
  auto alpha_real = [&](double s) { return frame.point(gamma, s); };
  auto alpha_cplx = [&](Cplx s) {
    CplxVec a(frame.dim);
    const Vec base = frame.point(gamma, 0.0);
    for (int i = 0; i < frame.dim; ++i) a[i] = base[i] + s * frame.n_hat[i];
    return a;
  };

  for (int b1 : bands) {
    const int b = b1 - 1;
    std::vector<double> m(M);
    std::vector<CVec> vecs(M);
    for (int i = 0; i < M; ++i) {
      const auto eig = detail::band_at(medium, alpha_real(s_lo + i * h), b, J_max);
      m[i] = eig.mu - lambda;
      vecs[i] = eig.coeffs;
    }

    // real roots: sign changes, bisection
    for (int i = 0; i < M; ++i) {
      const int j = (i + 1) % M;
      if (!(m[i] == 0.0) && !((m[i] < 0.0) != (m[j] < 0.0))) continue;
      double lo = s_lo + i * h, hi = s_lo + (i + 1) * h;
      double flo = m[i];
      for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm = detail::band_at(medium, alpha_real(mid), b, J_max).mu - lambda;
        if ((fm < 0.0) == (flo < 0.0)) {
          lo = mid;
          flo = fm;
        } else {
          hi = mid;
        }
      }
      const double s_root = 0.5 * (lo + hi);
      const auto H = assemble(medium, to_cvec(alpha_real(s_root)), J_max);
      const auto eig = eigensolve(H, b + 1)[b];
      const Vec grad = hf_gradient(medium, H, eig);
      SlicePole p;
      p.band = b1;
      p.s = s_root;
      p.alpha = to_cvec(alpha_real(s_root));
      p.right = eig.coeffs;
      p.left = eig.coeffs;
      p.norm = 1.0;
      p.dmu_ds = grad.dot(frame.n_hat);
      poles.push_back(std::move(p));
    }

    // complex pairs: interior extrema of mu - lambda that do not cross zero
    for (int i = 0; i < M; ++i) {
      const double m0 = m[(i + M - 1) % M], m1 = m[i], m2 = m[(i + 1) % M];
      const bool vmin = m1 > 0.0 && m1 <= m0 && m1 < m2;
      const bool vmax = m1 < 0.0 && m1 >= m0 && m1 > m2;
      if (!vmin && !vmax) continue;
      const double a = (m2 - 2.0 * m1 + m0) / (2.0 * h * h);
      const double bb = (m2 - m0) / (2.0 * h);
      const double disc = bb * bb - 4.0 * a * m1;
      if (!(disc < 0.0) || a == 0.0) continue;
      const double im_est = std::sqrt(-disc) / (2.0 * std::abs(a));
      if (im_est > im_window) continue;
      Cplx s = s_lo + i * h + Cplx(-bb / (2.0 * a), im_est);
      // Newton on the continued eigenvalue
      CVec seed = vecs[i];
      Cplx mu_guess = m1 + lambda;
      bool ok = false;
      CVec v;
      Cplx mu = 0.0, dmu = 0.0;
      for (int it = 0; it < 30; ++it) {
        const auto Hc = assemble(medium, alpha_cplx(s), J_max);
        const auto cp = continue_eigenpair(Hc, seed, mu_guess);
        mu = cp.mu;
        v = cp.coeffs;
        dmu = 0.0;
        for (int k = 0; k < frame.dim; ++k)
          dmu += frame.n_hat[k] * matrix_gradient_component(medium, Hc, v, mu, k);
        if (std::abs(mu - lambda) <= 1e-11) {
          ok = true;
          break;
        }
        s -= (mu - lambda) / dmu;
        seed = v;
        mu_guess = lambda;
      }
      if (!ok || s.imag() <= 1e-12) continue;
      bool dup = false;
      for (const auto& q : poles)
        if (q.band == b1 && std::abs(q.s - s) < 1e-7) dup = true;
      if (dup) continue;

      const auto Hc = assemble(medium, alpha_cplx(s), J_max);
      const CVec u = left_eigvec(Hc, mu, v);
      SlicePole p;
      p.band = b1;
      p.s = s;
      p.alpha = alpha_cplx(s);
      p.right = v;
      p.left = u;
      p.norm = u.dot(v);
      p.dmu_ds = dmu;
      if (std::abs(p.norm) < 1e-10)
        throw std::runtime_error("find_slice_poles: near-defective complex pole");
      poles.push_back(p);
      // conjugate partner: H(conj s) = H(s)^H swaps left and right
      SlicePole q;
      q.band = b1;
      q.s = std::conj(s);
      q.alpha = alpha_cplx(std::conj(s));
      q.right = u;
      q.left = v;
      q.norm = v.dot(u);
      q.dmu_ds = std::conj(dmu);
      poles.push_back(std::move(q));
    }
  }
  return poles;
}

}  // namespace detail

/// Deformed contour over B: slices along n_hat with a raised-cosine
/// height profile around the level set, annotated with the nearby
/// resolvent poles. sigma2 is halved (max 6 retries) until every node
/// passes pole_free_check.
inline ContourSpec build_contour(const MediumSpec& medium, const std::vector<LevelSetData>& levels,
                                 const DirectionalFrame& frame, double lambda, double sigma1,
                                 double sigma2, double halo_width, int n_slices,
                                 int nodes_per_slice, int J_max) {
  if (n_slices < 1 || nodes_per_slice < 8)
    throw std::invalid_argument("build_contour: need >= 1 slice and >= 8 nodes");
  ContourSpec contour;
  contour.frame = frame;
  contour.lambda = lambda;
  contour.J_max = J_max;
  contour.sigma1 = sigma1;
  contour.halo = halo_width;
  contour.period = detail::slice_period(frame);

  std::vector<int> bands;
  for (const auto& lv : levels) {
    bands.push_back(lv.band);
    for (const auto& seg : lv.segments)
      for (const auto& pt : seg.pts)
        if (pt.tag == Tag::plus) contour.halo_cloud.push_back(pt.alpha);
    for (const auto& a : lv.anchors) {
      contour.halo_cloud.push_back(a);
      if (frame.dim > 1)
        contour.anchor_sites.push_back(
            {lv.band, frame.gamma_coord(a)[0], frame.s_coord(a), a});
    }
  }

  const double P = contour.period;
  const double L = frame.dim == 1 ? 1.0 : 1.0 / P;
  const int NS = frame.dim == 1 ? 1 : n_slices;
  const double im_window = std::max(0.35, 1.2 * std::max(sigma1, sigma2));

  // pole geometry is sigma-independent: scan once
  std::vector<ContourSlice> slices(NS);
  for (int i = 0; i < NS; ++i) {
    ContourSlice& sl = slices[i];
    sl.gamma = Vec(frame.dim - 1);
    // midpoint offset keeps slices off tangency configurations (anchors)
    if (frame.dim > 1) sl.gamma[0] = -0.5 * L + (i + 0.5) * L / NS;
    sl.weight = frame.dim == 1 ? 1.0 : L / NS;
    sl.node_weight = P / nodes_per_slice;
    if (!levels.empty()) {
      sl.poles =
          detail::find_slice_poles(medium, frame, sl.gamma, lambda, bands, J_max, P, im_window);
      for (auto& p : sl.poles) {
        p.chi = contour.chi_at(p.band, frame.dim > 1 ? sl.gamma[0] : 0.0, p.s);
        p.captured = p.chi > 0.0;
      }
    }
  }

  // branch poles of one anchor at gamma = gamma_a + side t^2; the
  // substitution absorbs the 1/|s| residue growth through the anchor
  auto branch_poles = [&](const ContourSpec::AnchorSite& a, int side, double t) {
    Vec gamma(1);
    gamma[0] = a.gamma + side * t * t;
    auto poles =
        detail::find_slice_poles(medium, frame, gamma, lambda, {a.band}, J_max, P, im_window);
    std::vector<std::pair<SlicePole, double>> out;
    for (auto& p : poles) {
      const double chi = contour.chi_single(a, p.band, gamma[0], p.s);
      if (chi > 0.0) out.emplace_back(std::move(p), chi);
    }
    return out;
  };
  const double t_max = std::sqrt(std::max(halo_width, 0.0));

  // windowed residue integral along each anchor branch
  if (frame.dim > 1 && halo_width > 0.0) {
    std::vector<double> gx, gw;
    detail::gauss_legendre(24, gx, gw);
    for (const auto& a : contour.anchor_sites)
      for (int side : {-1, 1})
        for (size_t i = 0; i < gx.size(); ++i) {
          const double t = 0.5 * t_max * (gx[i] + 1.0);
          for (auto& [p, chi] : branch_poles(a, side, t))
            contour.branch_nodes.push_back({std::move(p), 0.5 * t_max * gw[i] * 2.0 * t * chi});
        }
  }

  double s2 = sigma2;
  for (int attempt = 0;; ++attempt) {
    contour.sigma2 = s2;
    contour.retries = attempt;
    contour.worst_margin = std::numeric_limits<double>::infinity();
    Vec worst_alpha;
    bool pass = true;
    for (auto& sl : slices) {
      sl.nodes.assign(nodes_per_slice, ContourNode{});
      for (int k = 0; k < nodes_per_slice; ++k) {
        ContourNode& nd = sl.nodes[k];
        nd.s = -0.5 * P + k * P / nodes_per_slice;
        const Vec a = frame.point(sl.gamma, nd.s);
        nd.sigma = contour.sigma_at(a);
        const double hd = 1e-5;
        const double sp = contour.sigma_at(frame.point(sl.gamma, nd.s + hd));
        const double sm = contour.sigma_at(frame.point(sl.gamma, nd.s - hd));
        nd.z = Cplx(nd.s, nd.sigma);
        nd.jac = Cplx(1.0, (sp - sm) / (2.0 * hd));
        CplxVec ac(frame.dim);
        for (int d = 0; d < frame.dim; ++d) ac[d] = a[d] + Cplx(0.0, nd.sigma) * frame.n_hat[d];
        const auto pc = pole_free_check(assemble(medium, ac, J_max), lambda);
        if (pc.margin < contour.worst_margin) {
          contour.worst_margin = pc.margin;
          worst_alpha = a;
        }
        if (!pc.pass) pass = false;
      }
      for (auto& p : sl.poles) {
        const double sig = contour.sigma_at(frame.point(sl.gamma, p.s.real()));
        p.below = p.s.imag() < sig;
      }
    }
    if (pass) break;
    if (attempt >= 6) {
      std::string msg = "build_contour: retries exhausted, worst margin " +
                        std::to_string(contour.worst_margin) + " at alpha = (";
      for (int d = 0; d < worst_alpha.size(); ++d)
        msg += (d ? ", " : "") + std::to_string(worst_alpha[d]);
      throw ContourFailure(msg + ")");
    }
    s2 *= 0.5;
  }

  // swept subregion of each branch: poles under the final contour
  // height, Im s < sigma2. This is the part the deformation actually
  // crosses; it vanishes with sigma2 and is reported separately.
  if (frame.dim > 1 && halo_width > 0.0) {
    std::vector<double> gx, gw;
    detail::gauss_legendre(16, gx, gw);
    for (const auto& a : contour.anchor_sites)
      for (int side : {-1, 1}) {
        auto im_at = [&](double t) {
          double q = 0.0;
          for (const auto& [p, chi] : branch_poles(a, side, t))
            if (p.s.imag() > q) q = p.s.imag();
          return q;
        };
        if (branch_poles(a, side, 0.05 * t_max).empty()) continue;
        double t_c = t_max;
        if (im_at(t_max) > contour.sigma2) {
          double lo = 0.0, hi = t_max;
          for (int it = 0; it < 25; ++it) {
            const double mid = 0.5 * (lo + hi);
            (im_at(mid) > contour.sigma2 ? hi : lo) = mid;
          }
          t_c = 0.5 * (lo + hi);
        }
        for (size_t i = 0; i < gx.size(); ++i) {
          const double t = 0.5 * t_c * (gx[i] + 1.0);
          for (auto& [p, chi] : branch_poles(a, side, t)) {
            if (!(p.s.imag() > 0.0) || p.s.imag() > contour.sigma2) continue;
            contour.capture_nodes.push_back({std::move(p), 0.5 * t_c * gw[i] * 2.0 * t});
          }
        }
      }
  }
  contour.slices = std::move(slices);
  return contour;
}

namespace detail {

/// Residue weight of one pole at an evaluation point.
inline Cplx pole_residue(const SlicePole& p, const SourceSpec& source, const Vec& x, int dim,
                         int J_max) {
  const CVec g = source_fourier_vector(source, p.alpha, J_max);
  const Cplx f_hat = p.left.dot(g) / p.norm;
  return f_hat * field_value(dim, J_max, p.alpha, p.right, x) / p.dmu_ds;
}

}  // namespace detail

/// Contour integral over B_sigma with per-slice pole subtraction.
inline Cplx evanescent_term(const MediumSpec& medium, const SourceSpec& source,
                            const ContourSpec& contour, double lambda, const Vec& x, int J_max) {
  if (J_max != contour.J_max)
    throw std::invalid_argument("evanescent_term: J_max differs from the contour's");
  const DirectionalFrame& frame = contour.frame;
  const double P = contour.period;
  const Cplx I(0.0, 1.0);
  Cplx total = 0.0;
  for (const auto& sl : contour.slices) {
    std::vector<Cplx> R(sl.poles.size());
    for (size_t pi = 0; pi < sl.poles.size(); ++pi)
      R[pi] = detail::pole_residue(sl.poles[pi], source, x, frame.dim, J_max);
    Cplx slice_val = 0.0;
    for (const auto& nd : sl.nodes) {
      CplxVec ac(frame.dim);
      const Vec base = frame.point(sl.gamma, 0.0);
      for (int d = 0; d < frame.dim; ++d) ac[d] = base[d] + nd.z * frame.n_hat[d];
      const auto H = assemble(medium, ac, J_max);
      const CVec g = source_fourier_vector(source, ac, J_max);
      const auto sol = solve_cell(H, lambda, g);
      Cplx integrand = evaluate_field(H, sol.coeffs, x);
      for (size_t pi = 0; pi < sl.poles.size(); ++pi)
        integrand -= R[pi] * (M_PI / P) * detail::periodic_cot((nd.z - sl.poles[pi].s) / P);
      slice_val += sl.node_weight * integrand * nd.jac;
    }
    for (size_t pi = 0; pi < sl.poles.size(); ++pi) {
      const auto& p = sl.poles[pi];
      // kernel add-back (geometric) plus the 2 pi i sweep compensation
      // for complex poles between the real line and the contour: the
      // combination only depends on the half-plane of the pole
      Cplx add = p.below ? -I * M_PI : I * M_PI;
      if (p.s.imag() > 1e-12 && p.below) add += 2.0 * M_PI * I;
      slice_val += R[pi] * add;
      // windowed anchor residues move to the branch integral
      if (p.chi > 0.0) slice_val -= R[pi] * 2.0 * M_PI * I * p.chi;
    }
    total += sl.weight * slice_val;
  }
  // restore the windowed branch content, minus the swept part that
  // complex_extension_term reports on its own
  for (const auto& bn : contour.branch_nodes)
    total += 2.0 * M_PI * I * bn.weight *
             detail::pole_residue(bn.pole, source, x, frame.dim, J_max);
  for (const auto& bn : contour.capture_nodes)
    total -= 2.0 * M_PI * I * bn.weight *
             detail::pole_residue(bn.pole, source, x, frame.dim, J_max);
  return total;
}

/// Surface residue sum 2 pi i sum w_arc f_hat phi / ||grad mu|| over F+.
inline Cplx propagating_term(const MediumSpec& medium, const LevelSetData& level,
                             const SourceSpec& source, const DirectionalFrame& frame, const Vec& x,
                             int J_max) {
  Cplx sum = 0.0;
  const int b = level.band - 1;
  for (const auto& seg : level.segments)
    for (const auto& pt : seg.pts) {
      if (pt.weight <= 0.0) continue;
      if (pt.band_degenerate)
        throw DegenerateBand("propagating_term: degenerate band at a quadrature point");
      const auto H = assemble(medium, to_cvec(pt.alpha), J_max);
      const auto eig = eigensolve(H, b + 1)[b];
      const CVec g = source_fourier_vector(source, to_cvec(pt.alpha), J_max);
      const Cplx f_hat = eigen_source_coeff(eig, g);
      const Cplx phi = evaluate_field(H, eig.coeffs, x);
      sum += pt.weight * f_hat * phi / pt.grad.norm();
    }
  (void)frame;
  return Cplx(0.0, 2.0 * M_PI) * sum;
}

/// Residue integral over the swept part of the anchor branches: the
/// complex poles the contour deformation actually crosses (Im s <
/// sigma2). Vanishes with sigma2; the t^2 branch parameterization
/// keeps the integrand bounded through the anchors.
inline Cplx complex_extension_term(const SourceSpec& source, const ContourSpec& contour,
                                   const Vec& x, int J_max) {
  if (J_max != contour.J_max)
    throw std::invalid_argument("complex_extension_term: J_max differs from the contour's");
  Cplx sum = 0.0;
  for (const auto& bn : contour.capture_nodes)
    sum += bn.weight * detail::pole_residue(bn.pole, source, x, contour.frame.dim, J_max);
  return Cplx(0.0, 2.0 * M_PI) * sum;
}

struct LapConfig {
  int J_max = 16;
  int grid_N = 32;
  int num_bands = 6;
  int J_max_bands = 0;  // 0: same as J_max
  double sigma1 = 0.05;
  double sigma2 = 0.05;
  double halo = 0.1;
  int slices = 64;
  int nodes_per_slice = 128;
};

struct LapResult {
  Vec x;
  Cplx evanescent;
  Cplx propagating;
  Cplx complex_ext;
  Cplx total;
};

struct LapDiagnostics {
  std::vector<int> J;
  double min_grad_norm = 0.0;
  int slice_count = 0;
  int node_count = 0;
  int pole_count = 0;
  int captured_count = 0;
  int branch_node_count = 0;
  int contour_retries = 0;
  double worst_margin = 0.0;
  double sigma2_used = 0.0;
};

struct LapSolution {
  std::vector<LapResult> results;
  LapDiagnostics diag;
  ContourSpec contour;
  std::vector<LevelSetData> levels;
};

/// Full three-term directional LAP solve at a regular level.
inline LapSolution lap_solve(const MediumSpec& medium, const SourceSpec& source, double lambda,
                             const Vec& direction, const std::vector<Vec>& x_points,
                             const LapConfig& cfg) {
  const DirectionalFrame frame = build_frame(direction);
  for (const auto& x : x_points)
    if (frame.n_hat.dot(x) < 0.0)
      throw std::invalid_argument("lap_solve: evaluation point behind the observation direction");

  const int Jb = cfg.J_max_bands > 0 ? cfg.J_max_bands : cfg.J_max;
  const auto grid = sample_grid(medium, cfg.grid_N, cfg.num_bands, Jb);
  const auto reg = check_regularity(medium, grid, lambda, frame);
  if (!reg.regular && !reg.trivially_regular)
    throw std::runtime_error("lap_solve: lambda fails the regularity check");

  LapSolution out;
  out.diag.J = reg.J;
  out.diag.min_grad_norm = reg.min_grad_norm;
  for (int b : reg.J) {
    auto segs = extract_level_set(grid, lambda, b);
    std::vector<RefinedSegment> refined;
    for (const auto& s : segs) refined.push_back(refine_points(medium, s, lambda, b, Jb));
    out.levels.push_back(classify(medium, refined, frame, b, lambda, Jb));
  }

  // trivially regular: sigma == 0, plain real-B integral
  const double s1 = reg.J.empty() ? 0.0 : cfg.sigma1;
  const double s2 = reg.J.empty() ? 0.0 : cfg.sigma2;
  out.contour = build_contour(medium, out.levels, frame, lambda, s1, s2, cfg.halo, cfg.slices,
                              cfg.nodes_per_slice, cfg.J_max);

  out.diag.slice_count = static_cast<int>(out.contour.slices.size());
  for (const auto& sl : out.contour.slices) {
    out.diag.node_count += static_cast<int>(sl.nodes.size());
    out.diag.pole_count += static_cast<int>(sl.poles.size());
    for (const auto& p : sl.poles) out.diag.captured_count += p.captured ? 1 : 0;
  }
  out.diag.branch_node_count = static_cast<int>(out.contour.branch_nodes.size());
  out.diag.contour_retries = out.contour.retries;
  out.diag.worst_margin = out.contour.worst_margin;
  out.diag.sigma2_used = out.contour.sigma2;

  for (const auto& x : x_points) {
    LapResult r;
    r.x = x;
    r.evanescent = evanescent_term(medium, source, out.contour, lambda, x, cfg.J_max);
    r.propagating = 0.0;
    for (const auto& lv : out.levels)
      r.propagating += propagating_term(medium, lv, source, frame, x, cfg.J_max);
    r.complex_ext = complex_extension_term(source, out.contour, x, cfg.J_max);
    r.total = r.evanescent + r.propagating + r.complex_ext;
    out.results.push_back(std::move(r));
  }
  return out;
}

/// Reference solution of the damped problem (L - lambda - i eps) u = f
/// by a plain tensor trapezoid over the real Brillouin zone.
inline std::vector<Cplx> damped_solve(const MediumSpec& medium, const SourceSpec& source,
                                      double lambda, double epsilon,
                                      const std::vector<Vec>& x_points, int N_alpha, int J_max) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("damped_solve: epsilon must be positive");
  const int N = std::max(N_alpha, static_cast<int>(std::ceil(8.0 / epsilon)));
  const int dim = medium.dim;
  const Cplx shift(lambda, epsilon);
  std::vector<Cplx> u(x_points.size(), 0.0);
  const int M = dim == 1 ? N : N * N;
  for (int idx = 0; idx < M; ++idx) {
    Vec a(dim);
    a[0] = -0.5 + static_cast<double>(dim == 1 ? idx : idx / N) / N;
    if (dim > 1) a[1] = -0.5 + static_cast<double>(idx % N) / N;
    const auto H = assemble(medium, to_cvec(a), J_max);
    const CVec g = source_fourier_vector(source, to_cvec(a), J_max);
    const auto sol = solve_cell(H, shift, g);
    for (size_t xi = 0; xi < x_points.size(); ++xi)
      u[xi] += evaluate_field(H, sol.coeffs, x_points[xi]);
  }
  const double w = std::pow(1.0 / N, dim);
  for (auto& v : u) v *= w;
  return u;
}

namespace detail {

inline Cplx adaptive_simpson_rec(const std::function<Cplx(double)>& f, double a, double b, Cplx fa,
                                 Cplx fm, Cplx fb, Cplx whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const Cplx fl = f(0.5 * (a + m)), fr = f(0.5 * (m + b));
  const Cplx left = (b - a) / 12.0 * (fa + 4.0 * fl + fm);
  const Cplx right = (b - a) / 12.0 * (fm + 4.0 * fr + fb);
  if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * tol)
    return left + right + (left + right - whole) / 15.0;
  return adaptive_simpson_rec(f, a, m, fa, fl, fm, left, 0.5 * tol, depth - 1) +
         adaptive_simpson_rec(f, m, b, fm, fr, fb, right, 0.5 * tol, depth - 1);
}

/// Adaptive Simpson along the straight segment [za, zb] in the plane.
inline Cplx adaptive_line(const std::function<Cplx(Cplx)>& f, Cplx za, Cplx zb, double tol) {
  const Cplx d = zb - za;
  auto g = [&](double t) { return f(za + t * d) * d; };
  const Cplx fa = g(0.0), fm = g(0.5), fb = g(1.0);
  const Cplx whole = (fa + 4.0 * fm + fb) / 6.0;
  return adaptive_simpson_rec(g, 0.0, 1.0, fa, fm, fb, whole, tol, 48);
}

}  // namespace detail

struct ResidueCheck {
  Cplx lhs;
  Cplx rhs;
  double diff = 0.0;
  bool inconclusive = false;
  std::vector<Cplx> poles;  // captured poles inside the rectangle
};

/// Single-line residue identity: the real-axis integral of
/// f(s)/(mu(s)-lambda-i eps) equals the rectangle path plus 2 pi i
/// times the residues of the poles it encloses.
inline ResidueCheck residue_line_check(const std::function<Cplx(Cplx)>& mu,
                                       const std::function<Cplx(Cplx)>& f_hat, double l1, double l2,
                                       double lambda, double epsilon, double sigma) {
  if (!(epsilon > 0.0) || !(sigma > 0.0))
    throw std::invalid_argument("residue_line_check: epsilon and sigma must be positive");
  const Cplx shift(lambda, epsilon);
  auto integrand = [&](Cplx z) { return f_hat(z) / (mu(z) - shift); };
  auto dmu = [&](Cplx z) {
    const double h = 1e-5;
    return (mu(z + h) - mu(z - h)) / (2.0 * h);
  };

  ResidueCheck rc;
  rc.lhs = detail::adaptive_line(integrand, Cplx(l1, 0.0), Cplx(l2, 0.0), 1e-13);

  // poles: Newton from the real roots of mu(s) = lambda
  const int M = 400;
  std::vector<Cplx> poles;
  auto real_mu = [&](double s) { return mu(Cplx(s, 0.0)).real() - lambda; };
  for (int i = 0; i < M; ++i) {
    const double a = l1 + (l2 - l1) * i / M, b = l1 + (l2 - l1) * (i + 1) / M;
    if (!((real_mu(a) < 0.0) != (real_mu(b) < 0.0))) continue;
    double lo = a, hi = b;
    for (int it = 0; it < 60; ++it) {
      const double mid = 0.5 * (lo + hi);
      ((real_mu(mid) < 0.0) == (real_mu(lo) < 0.0) ? lo : hi) = mid;
    }
    Cplx z(0.5 * (lo + hi), 0.0);
    z += Cplx(0.0, epsilon) / dmu(z);  // first-order displacement
    for (int it = 0; it < 50 && std::abs(mu(z) - shift) > 1e-14; ++it)
      z -= (mu(z) - shift) / dmu(z);
    bool dup = false;
    for (const auto& p : poles)
      if (std::abs(p - z) < 1e-10) dup = true;
    if (!dup) poles.push_back(z);
  }

  Cplx residue_sum = 0.0;
  for (const auto& z : poles) {
    const double d_edge = std::min(
        std::min(std::abs(z.imag()), std::abs(sigma - z.imag())),
        std::min(std::abs(z.real() - l1), std::abs(z.real() - l2)));
    if (d_edge < 1e-6) rc.inconclusive = true;
    const bool inside =
        z.imag() > 0.0 && z.imag() < sigma && z.real() > l1 && z.real() < l2;
    if (inside) {
      residue_sum += f_hat(z) / dmu(z);
      rc.poles.push_back(z);
    }
  }

  const Cplx c1(l1, 0.0), c2(l1, sigma), c3(l2, sigma), c4(l2, 0.0);
  rc.rhs = detail::adaptive_line(integrand, c1, c2, 1e-13) +
           detail::adaptive_line(integrand, c2, c3, 1e-13) +
           detail::adaptive_line(integrand, c3, c4, 1e-13) +
           Cplx(0.0, 2.0 * M_PI) * residue_sum;
  rc.diff = std::abs(rc.lhs - rc.rhs);
  return rc;
}

/// solution.csv: x1[,x2],re_total,im_total,re_evan,im_evan,re_prop,im_prop,re_cext,im_cext
inline void write_solution_csv(const std::vector<LapResult>& results, int dim, std::ostream& os) {
  os << (dim == 1 ? "x1" : "x1,x2")
     << ",re_total,im_total,re_evan,im_evan,re_prop,im_prop,re_cext,im_cext\n";
  char buf[64];
  auto put = [&](double v, bool lead) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    if (lead) os << ',';
    os << buf;
  };
  for (const auto& r : results) {
    put(r.x[0], false);
    if (dim > 1) put(r.x[1], true);
    for (const Cplx v : {r.total, r.evanescent, r.propagating, r.complex_ext}) {
      put(v.real(), true);
      put(v.imag(), true);
    }
    os << '\n';
  }
}

}  // namespace blochlap
