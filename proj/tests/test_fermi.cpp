#include "doctest.h"

#include <sstream>

#include "blochlap/fermi.hpp"

using namespace blochlap;

namespace {
MediumSpec cosine_1d() {
  MediumSpec m = MediumSpec::free_space(1);
  m.V_coeffs[make_index(1)] = 1.0;  // V(x) = 2 cos x
  m.V_coeffs[make_index(-1)] = 1.0;
  return m;
}

DirectionalFrame frame2(double nx, double ny) {
  Vec n(2);
  n << nx, ny;
  return build_frame(n);
}
}  // namespace

TEST_CASE("circle extraction") {
  const auto m = MediumSpec::free_space(2);
  const auto grid = sample_grid(m, 32, 1, 3);
  const auto segs = extract_level_set(grid, 0.09, 1);
  REQUIRE(segs.size() == 1);
  CHECK(segs[0].closed);
  CHECK(segs[0].raw.size() > 20);
  const double diag = std::sqrt(2.0) / 32.0;
  for (const auto& p : segs[0].raw) CHECK(std::abs(p.norm() - 0.3) <= diag);

  // orientation: grad mu = 2 alpha on the left of the travel direction
  for (size_t k = 0; k + 1 < segs[0].raw.size(); ++k) {
    const Vec t = segs[0].raw[k + 1] - segs[0].raw[k];
    const Vec mid = 0.5 * (segs[0].raw[k + 1] + segs[0].raw[k]);
    CHECK(t[0] * mid[1] - t[1] * mid[0] > 0);  // cross(t, grad) > 0
  }
}

TEST_CASE("face-wrapping level set hits the shifted circles") {
  const auto m = MediumSpec::free_space(2);
  const auto grid = sample_grid(m, 32, 2, 3);
  const auto segs = extract_level_set(grid, 0.3, 1);
  CHECK(!segs.empty());
  int points = 0;
  for (const auto& seg : segs)
    for (const auto& p : seg.raw) {
      ++points;
      double best = 1e300;
      for (int j0 = -1; j0 <= 1; ++j0)
        for (int j1 = -1; j1 <= 1; ++j1) {
          Vec q(2);
          q << p[0] + j0, p[1] + j1;
          best = std::min(best, std::abs(q.norm() - std::sqrt(0.3)));
        }
      CHECK(best <= 5e-3);
    }
  CHECK(points > 30);

  // level above the sampled band range: empty set
  CHECK(extract_level_set(grid, 0.7, 1).empty());
}

TEST_CASE("newton refinement onto the circle") {
  const auto m = MediumSpec::free_space(2);
  const auto grid = sample_grid(m, 16, 1, 3);
  const auto segs = extract_level_set(grid, 0.09, 1);
  REQUIRE(segs.size() == 1);
  const auto ref = refine_points(m, segs[0], 0.09, 1, 3);
  CHECK(ref.dropped == 0);
  CHECK(ref.pts.size() == segs[0].raw.size());
  for (const auto& p : ref.pts) {
    CHECK(std::abs(p.alpha.norm() - 0.3) <= 2e-10);
    CHECK((p.grad - 2.0 * p.alpha).norm() < 1e-12);
  }

  // a point already on the set does not move
  FermiSegment still;
  Vec on(2);
  on << 0.3, 0.0;
  still.raw.push_back(on);
  const auto r2 = refine_points(m, still, 0.09, 1, 3);
  REQUIRE(r2.pts.size() == 1);
  CHECK((r2.pts[0].alpha - on).norm() < 1e-15);
}

TEST_CASE("1d refinement matches the bisection oracle") {
  const auto m = cosine_1d();
  const double lambda = 0.62;
  const auto grid = sample_grid(m, 32, 2, 12);
  const auto segs = extract_level_set(grid, lambda, 2);
  REQUIRE(segs.size() == 2);  // even band: one root per half cell
  for (const auto& seg : segs) {
    const auto ref = refine_points(m, seg, lambda, 2, 12);
    REQUIRE(ref.pts.size() == 1);
    const double a = ref.pts[0].alpha[0];
    // bisection on the sampled bracket
    double lo = a - 0.05, hi = a + 0.05;
    auto f = [&](double s) {
      return detail::band_at(m, Vec::Constant(1, s), 1, 12).mu - lambda;
    };
    REQUIRE(f(lo) * f(hi) < 0);
    for (int it = 0; it < 52; ++it) {
      const double mid = 0.5 * (lo + hi);
      if ((f(mid) < 0) == (f(lo) < 0))
        lo = mid;
      else
        hi = mid;
    }
    CHECK(std::abs(a - 0.5 * (lo + hi)) < 1e-9);
  }
}

TEST_CASE("classification of the circle") {
  const auto m = MediumSpec::free_space(2);
  const auto grid = sample_grid(m, 32, 1, 3);
  const auto segs = extract_level_set(grid, 0.09, 1);
  std::vector<RefinedSegment> refined;
  for (const auto& s : segs) refined.push_back(refine_points(m, s, 0.09, 1, 3));

  const auto frame = frame2(1.0, 0.0);
  const auto data = classify(m, refined, frame, 1, 0.09, 3);
  CHECK(data.min_grad_norm == doctest::Approx(0.6).epsilon(1e-9));
  REQUIRE(data.anchors.size() == 2);
  for (const auto& a : data.anchors) {
    CHECK(std::abs(a[0]) < 1e-6);
    CHECK(std::abs(std::abs(a[1]) - 0.3) < 1e-6);
  }
  double plus_len = 0.0;
  for (const auto& seg : data.segments)
    for (const auto& p : seg.pts) {
      if (p.tag == Tag::plus) CHECK(p.alpha[0] > 0.0);
      if (p.tag == Tag::minus) {
        CHECK(p.alpha[0] < 0.0);
        CHECK(p.weight == 0.0);
      }
      plus_len += p.weight;
      if (p.tag == Tag::plus)
        CHECK(real_surface_factor(p.grad, frame) == doctest::Approx(p.grad.norm()).epsilon(1e-8));
    }
  CHECK(plus_len == doctest::Approx(M_PI * 0.3).epsilon(2e-3));

  // rotated direction: plus = upper half
  const auto frame_y = frame2(0.0, 1.0);
  const auto data_y = classify(m, refined, frame_y, 1, 0.09, 3);
  for (const auto& seg : data_y.segments)
    for (const auto& p : seg.pts) {
      if (p.tag == Tag::plus) CHECK(p.alpha[1] > 0.0);
      if (p.tag == Tag::minus) CHECK(p.alpha[1] < 0.0);
    }
  for (const auto& a : data_y.anchors) CHECK(std::abs(a[1]) < 1e-6);
}

TEST_CASE("1d classification by slope sign") {
  const auto m = MediumSpec::free_space(1);
  const auto grid = sample_grid(m, 32, 1, 3);
  const auto segs = extract_level_set(grid, 0.09, 1);
  REQUIRE(segs.size() == 2);
  std::vector<RefinedSegment> refined;
  for (const auto& s : segs) refined.push_back(refine_points(m, s, 0.09, 1, 3));
  const auto frame = build_frame(Vec::Ones(1));
  const auto data = classify(m, refined, frame, 1, 0.09, 3);
  int plus = 0, minus = 0;
  for (const auto& seg : data.segments)
    for (const auto& p : seg.pts) {
      if (p.tag == Tag::plus) {
        ++plus;
        CHECK(p.alpha[0] == doctest::Approx(0.3).epsilon(1e-9));
        CHECK(p.weight == 1.0);
      }
      if (p.tag == Tag::minus) {
        ++minus;
        CHECK(p.alpha[0] == doctest::Approx(-0.3).epsilon(1e-9));
      }
    }
  CHECK(plus == 1);
  CHECK(minus == 1);
}

TEST_CASE("arclength converges at second order") {
  const auto m = MediumSpec::free_space(2);
  auto length_at = [&](int N) {
    const auto grid = sample_grid(m, N, 1, 3);
    const auto segs = extract_level_set(grid, 0.09, 1);
    double len = 0.0;
    for (const auto& s : segs) {
      const auto ref = refine_points(m, s, 0.09, 1, 3);
      const int n = static_cast<int>(ref.pts.size());
      const int pairs = ref.closed ? n : n - 1;
      for (int k = 0; k < pairs; ++k)
        len += (ref.pts[(k + 1) % n].alpha - ref.pts[k].alpha).norm();
    }
    return len;
  };
  const double e16 = std::abs(length_at(16) - 2.0 * M_PI * 0.3);
  const double e32 = std::abs(length_at(32) - 2.0 * M_PI * 0.3);
  CHECK(e32 < e16);
  CHECK(e16 / e32 >= 2.5);
}

TEST_CASE("complex extension across the circle anchor") {
  const auto m = MediumSpec::free_space(2);
  const auto frame = frame2(1.0, 0.0);
  Vec anchor(2);
  anchor << 0.0, 0.3;
  const auto br = complex_extension(m, anchor, frame, 1, 0.09, 0.2, 12, 3);
  CHECK(br.a0 == doctest::Approx(1.0).epsilon(1e-9));
  REQUIRE(br.s_values.size() >= 10);
  double prev_im = 0.0;
  for (size_t k = 0; k < br.s_values.size(); ++k) {
    const double g = br.gamma_samples[k];
    CHECK(g > 0.3);
    const Cplx want(0.0, std::sqrt(g * g - 0.09));
    CHECK(std::abs(br.s_values[k] - want) < 1e-9);
    CHECK(std::abs(br.mu[k] - 0.09) <= 1e-12 * 1.09);
    CHECK(br.s_values[k].imag() > prev_im);  // monotone growth with gamma
    prev_im = br.s_values[k].imag();
    // derivative along n at the continued point: 2 s
    CHECK(std::abs(br.dmu_ds[k] - 2.0 * br.s_values[k]) < 1e-9);
  }
  // branch continuity at the anchor: the innermost sample is already small
  CHECK(br.s_values.front().imag() < 0.05);
  // G against the closed form 2 sqrt(2 g^2 - lambda) at interior samples
  for (size_t k = 1; k + 1 < br.s_values.size(); ++k) {
    const double g = br.gamma_samples[k];
    const double want = 2.0 * std::sqrt(2.0 * g * g - 0.09);
    CHECK(br.G_s[k] == doctest::Approx(want).epsilon(5e-3));
  }
  // quadrature weights integrate d gamma over the window
  double wsum = 0.0;
  for (double w : br.quad_weights) wsum += w;
  const double width = *std::max_element(br.gamma_samples.begin(), br.gamma_samples.end()) - 0.3;
  CHECK(wsum == doctest::Approx(br.gamma_samples.back() > 0.3 ? width : 0.0).epsilon(0.2));
}

TEST_CASE("csv layouts") {
  const auto m = MediumSpec::free_space(2);
  const auto grid = sample_grid(m, 16, 1, 3);
  const auto segs = extract_level_set(grid, 0.09, 1);
  std::vector<RefinedSegment> refined;
  for (const auto& s : segs) refined.push_back(refine_points(m, s, 0.09, 1, 3));
  const auto frame = frame2(1.0, 0.0);
  const auto data = classify(m, refined, frame, 1, 0.09, 3);
  std::ostringstream os;
  write_fermi_csv({data}, 2, os);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  CHECK(line == "band,segment,point,alpha1,alpha2,grad1,grad2,grad_dot_n,tag");
  int rows = 0, tagged = 0;
  while (std::getline(is, line)) {
    ++rows;
    if (line.find("plus") != std::string::npos || line.find("minus") != std::string::npos ||
        line.find("degenerate") != std::string::npos)
      ++tagged;
  }
  CHECK(rows == tagged);
  CHECK(rows > 10);

  Vec anchor(2);
  anchor << 0.0, 0.3;
  const auto br = complex_extension(m, anchor, frame, 1, 0.09, 0.2, 6, 3);
  std::ostringstream os2;
  write_fermi_complex_csv({br}, 2, os2);
  std::istringstream is2(os2.str());
  std::getline(is2, line);
  CHECK(line == "band,anchor1,anchor2,gamma,re_s,im_s,G,sign");
  rows = 0;
  while (std::getline(is2, line)) ++rows;
  CHECK(rows == static_cast<int>(br.s_values.size()));
}
