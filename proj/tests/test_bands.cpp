#include "doctest.h"

#include <algorithm>
#include <sstream>

#include "blochlap/bands.hpp"

using namespace blochlap;

namespace {
MediumSpec cosine_1d() {
  MediumSpec m = MediumSpec::free_space(1);
  m.V_coeffs[make_index(1)] = 1.0;  // V(x) = 2 cos x
  m.V_coeffs[make_index(-1)] = 1.0;
  return m;
}
}  // namespace

TEST_CASE("free space grid values are sorted shifted squares") {
  const auto m = MediumSpec::free_space(2);
  const auto grid = sample_grid(m, 16, 4, 3);
  CHECK(grid.node_count() == 17 * 17);
  for (const auto& node : grid.nodes) {
    std::vector<double> want;
    for (int j0 = -3; j0 <= 3; ++j0)
      for (int j1 = -3; j1 <= 3; ++j1) {
        const double k0 = node.alpha[0] + j0, k1 = node.alpha[1] + j1;
        want.push_back(k0 * k0 + k1 * k1);
      }
    std::sort(want.begin(), want.end());
    for (int b = 0; b < 4; ++b) CHECK(node.bands[b].mu == doctest::Approx(want[b]).epsilon(1e-13));
  }
  CHECK(grid.max_asymmetry <= 1e-10);
}

TEST_CASE("cosine band 1 is monotone on the half cell") {
  const auto m = cosine_1d();
  const auto grid = sample_grid(m, 32, 2, 12);
  CHECK(grid.max_asymmetry <= 1e-10);
  // even potential: band 1 increases from alpha = 0 to 1/2
  const int mid = 16;  // alpha = 0
  for (int i = mid; i + 1 <= 32; ++i) {
    const double a = grid.nodes[i].bands[0].mu;
    const double b = grid.nodes[i + 1].bands[0].mu;
    CHECK(b > a);
  }
  // gradients present at simple interior nodes and odd in alpha
  const auto& g_plus = grid.nodes[mid + 4].gradients[0];
  const auto& g_minus = grid.nodes[mid - 4].gradients[0];
  REQUIRE(g_plus.has_value());
  REQUIRE(g_minus.has_value());
  CHECK((*g_plus)[0] == doctest::Approx(-(*g_minus)[0]).epsilon(1e-9));
}

TEST_CASE("free space slice relabeling follows the parabolas") {
  const auto m = MediumSpec::free_space(1);
  const auto frame = build_frame(Vec::Ones(1));
  const auto sb = relabel_slice(m, frame, Vec(0), 3, 64, 4);
  REQUIRE(sb.branches.size() == 3);
  REQUIRE(sb.s_nodes.size() == 65);
  // each branch is (s + j)^2 for a fixed integer j read off the coeffs
  for (const auto& br : sb.branches) {
    int j = 0;
    Eigen::Index row;
    br.coeffs.front().cwiseAbs().maxCoeff(&row);
    j = static_cast<int>(row) - 4;
    for (size_t k = 0; k < sb.s_nodes.size(); ++k) {
      const double s = sb.s_nodes[k];
      CHECK(br.mu[k] == doctest::Approx((s + j) * (s + j)).epsilon(1e-12));
      CHECK(br.dmu_ds[k] == doctest::Approx(2.0 * (s + j)).epsilon(1e-10));
    }
  }
  // sorted crossing at s = 0, mu = 1: branches stay smooth through it
  // while the union per node still matches the sorted multiset
  for (size_t k = 0; k < sb.s_nodes.size(); ++k) {
    std::vector<double> branch_vals, sorted_vals;
    for (const auto& br : sb.branches) branch_vals.push_back(br.mu[k]);
    const auto H = assemble(m, to_cvec(frame.point(Vec(0), sb.s_nodes[k])), 4);
    for (const auto& band : eigensolve(H, 3)) sorted_vals.push_back(band.mu);
    std::sort(branch_vals.begin(), branch_vals.end());
    for (int b = 0; b < 3; ++b)
      CHECK(branch_vals[b] == doctest::Approx(sorted_vals[b]).epsilon(1e-12));
  }
}

TEST_CASE("no-crossing slice relabeling equals sorting") {
  const auto m = cosine_1d();
  const auto frame = build_frame(Vec::Ones(1));
  const auto sb = relabel_slice(m, frame, Vec(0), 1, 32, 10);
  for (size_t k = 0; k < sb.s_nodes.size(); ++k) {
    const auto H = assemble(m, to_cvec(frame.point(Vec(0), sb.s_nodes[k])), 10);
    CHECK(sb.branches[0].mu[k] == doctest::Approx(eigensolve(H, 1)[0].mu).epsilon(1e-12));
  }
  // continuity: jumps bounded by a Lipschitz multiple of the step
  double lip = 0.0;
  const double ds = sb.s_nodes[1] - sb.s_nodes[0];
  for (size_t k = 0; k + 1 < sb.s_nodes.size(); ++k)
    lip = std::max(lip, std::abs(sb.branches[0].mu[k + 1] - sb.branches[0].mu[k]) / ds);
  CHECK(lip < 10.0);
}

TEST_CASE("single-node slice returns sorted bands") {
  const auto m = MediumSpec::free_space(2);
  Vec n(2);
  n << 1.0, 0.0;
  const auto frame = build_frame(n);
  Vec gamma(1);
  gamma << 0.2;
  const auto sb = relabel_slice(m, frame, gamma, 2, 0, 3);
  REQUIRE(sb.s_nodes.size() == 1);
  const auto H = assemble(m, to_cvec(frame.point(gamma, sb.s_nodes[0])), 3);
  const auto bands = eigensolve(H, 2);
  CHECK(sb.branches[0].mu[0] == doctest::Approx(bands[0].mu));
  CHECK(sb.branches[1].mu[0] == doctest::Approx(bands[1].mu));
}

TEST_CASE("regularity report on the free-space circle") {
  const auto m = MediumSpec::free_space(2);
  Vec n(2);
  n << 1.0, 0.0;
  const auto frame = build_frame(n);
  const auto grid = sample_grid(m, 16, 2, 3);

  const auto rep = check_regularity(m, grid, 0.09, frame);
  REQUIRE(rep.J == std::vector<int>{1});
  CHECK(rep.level_point_count > 10);
  // every refined point sits on |alpha| = 0.3 where ||grad mu|| = 0.6
  CHECK(rep.min_grad_norm == doctest::Approx(0.6).epsilon(1e-6));
  CHECK(rep.regular);
  CHECK_FALSE(rep.trivially_regular);

  // lambda at the band minimum: gradient vanishes, irregular
  const auto rep0 = check_regularity(m, grid, 0.0, frame);
  CHECK_FALSE(rep0.regular);
  CHECK(rep0.min_grad_norm < 1e-6);

  // below the spectrum: empty level set, trivially regular
  const auto repn = check_regularity(m, grid, -1.0, frame);
  CHECK(repn.J.empty());
  CHECK(repn.trivially_regular);
  CHECK(repn.regular);
}

TEST_CASE("range refinement catches an off-grid band extremum") {
  // cosine medium, grid too coarse to sample the exact band-1 maximum;
  // lambda slightly above the sampled max must still join J via the
  // golden-section refinement
  const auto m = cosine_1d();
  const auto grid = sample_grid(m, 9, 1, 10);
  double sampled_max = -1e300;
  for (const auto& node : grid.nodes) sampled_max = std::max(sampled_max, node.bands[0].mu);
  // true band-1 max is at alpha = 1/2 which IS a grid node here, so probe
  // the interior minimum instead: true min at alpha = 0 (not a node)
  double sampled_min = 1e300;
  for (const auto& node : grid.nodes) sampled_min = std::min(sampled_min, node.bands[0].mu);
  const auto frame = build_frame(Vec::Ones(1));
  const double lam = sampled_min - 1e-4;
  const auto rep = check_regularity(m, grid, lam, frame);
  // refinement only helps if the true minimum lies below the probe
  const double true_min = detail::band_at(m, Vec::Zero(1), 0, 10).mu;
  if (true_min < lam - 1e-6) CHECK(rep.J == std::vector<int>{1});
}

TEST_CASE("bands csv layout") {
  const auto m = MediumSpec::free_space(1);
  const auto grid = sample_grid(m, 8, 2, 2);
  std::ostringstream os;
  write_bands_csv(grid, os);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  CHECK(line == "alpha1,band,mu,dmu1");
  int rows = 0;
  while (std::getline(is, line)) ++rows;
  CHECK(rows == 9 * 2);
  // first row is alpha = -1/2, band 1
  std::istringstream first(os.str().substr(os.str().find('\n') + 1));
  std::getline(first, line, ',');
  CHECK(std::stod(line) == doctest::Approx(-0.5));
  std::getline(first, line, ',');
  CHECK(line == "1");
  std::getline(first, line, ',');
  CHECK(std::stod(line) == doctest::Approx(0.25));
}
