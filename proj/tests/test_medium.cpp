#include "doctest.h"

#include <random>

#include "blochlap/medium.hpp"

using namespace blochlap;

namespace {
MediumSpec cosine_1d(double amplitude = 2.0) {
  // V(x) = amplitude * cos(x): V_hat(+-1) = amplitude/2
  MediumSpec m = MediumSpec::free_space(1);
  m.V_coeffs[make_index(1)] = amplitude / 2.0;
  m.V_coeffs[make_index(-1)] = amplitude / 2.0;
  return m;
}
}  // namespace

TEST_CASE("medium validation") {
  auto m = cosine_1d();
  CHECK_NOTHROW(m.validate());
  CHECK(m.is_constant() == false);
  CHECK(MediumSpec::free_space(2).is_constant());

  auto bad = cosine_1d();
  bad.V_coeffs[make_index(-1)] = 0.3;  // breaks reality
  CHECK_THROWS_AS(bad.validate(), MediumError);

  MediumSpec aniso = MediumSpec::free_space(2);
  aniso.A_coeffs[make_index(0, 0)] = Eigen::Vector2d(1.0, 2.0).asDiagonal();
  CHECK_NOTHROW(aniso.validate());
  aniso.c0 = 1.5;  // min eigenvalue is 1
  CHECK_THROWS_AS(aniso.validate(), MediumError);
}

TEST_CASE("floquet transform single cell is alpha independent") {
  CellArray cells;
  CVec v(3);
  v << Cplx(1, 2), Cplx(0, -1), Cplx(3, 0);
  cells[make_index(0)] = v;
  auto field = floquet_transform(cells, 1, 8);
  for (int i = 0; i < field.node_count(); ++i) CHECK((field.values[i] - v).norm() < 1e-14);
}

TEST_CASE("floquet transform two-cell geometric sum") {
  CellArray cells;
  CVec v(2);
  v << Cplx(0.5, 0.5), Cplx(-1, 0);
  cells[make_index(0)] = v;
  cells[make_index(1)] = v;
  auto field = floquet_transform(cells, 1, 16);
  for (int i = 0; i < field.node_count(); ++i) {
    const Vec a = field.alpha_node(i);
    const Cplx factor = 1.0 + std::exp(Cplx(0.0, -2.0 * M_PI * a[0]));
    CHECK((field.values[i] - factor * v).norm() < 1e-13);
  }
  // zero input -> zero field
  CellArray zero;
  zero[make_index(0)] = CVec::Zero(2);
  auto zf = floquet_transform(zero, 1, 8);
  for (auto& val : zf.values) CHECK(val.norm() == 0.0);
}

TEST_CASE("inverse floquet round trip and orthogonality") {
  CellArray cells;
  std::mt19937 rng(42);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  for (int m = -2; m <= 2; ++m) {
    CVec v(4);
    for (int i = 0; i < 4; ++i) v[i] = Cplx(dist(rng), dist(rng));
    cells[make_index(m)] = v;
  }
  auto field = floquet_transform(cells, 1, 16);  // 16 nodes > 5 occupied cells
  for (const auto& [m, v] : cells) {
    CHECK((inverse_floquet(field, m) - v).norm() < 1e-12);
  }
  // unoccupied cell recovers zero
  CHECK(inverse_floquet(field, make_index(5)).norm() < 1e-12);

  // constant-in-alpha field: m = 0 picks the value, m != 0 vanishes
  BlochField cf;
  cf.dim = 1;
  cf.nodes_per_axis = 8;
  CVec c(1);
  c << Cplx(2.0, -1.0);
  cf.values.assign(8, c);
  CHECK((inverse_floquet(cf, make_index(0)) - c).norm() < 1e-13);
  CHECK(inverse_floquet(cf, make_index(3)).norm() < 1e-13);
}

TEST_CASE("parseval isometry on random compact input") {
  for (int trial = 0; trial < 4; ++trial) {
    std::mt19937 rng(100 + trial);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    CellArray cells;
    double cell_norm2 = 0.0;
    for (int m = -3; m <= 3; ++m) {
      CVec v(6);
      for (int i = 0; i < 6; ++i) v[i] = Cplx(dist(rng), dist(rng));
      cells[make_index(m)] = v;
      cell_norm2 += v.squaredNorm();
    }
    auto field = floquet_transform(cells, 1, 32);
    double avg = 0.0;
    for (const auto& v : field.values) avg += v.squaredNorm();
    avg /= field.node_count();
    CHECK(avg == doctest::Approx(cell_norm2).epsilon(1e-10));
  }
}

TEST_CASE("alpha periodicity across faces") {
  CellArray cells;
  CVec v(2);
  v << Cplx(1, 1), Cplx(2, -1);
  cells[make_index(0)] = v;
  cells[make_index(2)] = 0.5 * v;
  auto field = floquet_transform(cells, 1, 8);
  // alpha = -1/2 node vs alpha = +1/2 (shift by a dual lattice vector)
  const Vec a0 = field.alpha_node(0);
  CVec shifted = CVec::Zero(2);
  for (const auto& [m, val] : cells)
    shifted += std::exp(Cplx(0.0, -2.0 * M_PI * (a0[0] + 1.0) * m[0])) * val;
  CHECK((field.values[0] - shifted).norm() < 1e-13);
}

TEST_CASE("source fourier vector") {
  SourceSpec delta;
  delta.kind = SourceSpec::Kind::delta_at_origin;
  delta.dim = 2;
  Eigen::VectorXcd alpha(2);
  alpha << Cplx(0.17, 0.0), Cplx(-0.3, 0.05);
  CVec g = source_fourier_vector(delta, alpha, 3);
  CHECK(g.size() == 49);
  for (int i = 0; i < g.size(); ++i) CHECK(std::abs(g[i] - 1.0 / (2.0 * M_PI)) < 1e-15);

  // table sources reduce to the plain table at integer alpha
  SourceSpec tab;
  tab.kind = SourceSpec::Kind::fourier_table;
  tab.dim = 1;
  tab.fourier_table[make_index(0)] = 1.0;
  Eigen::VectorXcd a0(1);
  a0 << Cplx(0.0, 0.0);
  g = source_fourier_vector(tab, a0, 2);
  CHECK(std::abs(g[2] - 1.0) < 1e-14);
  CHECK(std::abs(g[0]) < 1e-14);
  CHECK(std::abs(g[4]) < 1e-14);

  // linearity: two-mode table
  tab.fourier_table[make_index(1)] = Cplx(0.0, 2.0);
  g = source_fourier_vector(tab, a0, 2);
  CHECK(std::abs(g[2] - 1.0) < 1e-14);
  CHECK(std::abs(g[3] - Cplx(0.0, 2.0)) < 1e-14);

  // windowed transform at non-integer alpha: matches direct quadrature of
  // (1/2pi) integral e^{-i(alpha+j)x} f(x) over the cell
  Eigen::VectorXcd a1(1);
  a1 << Cplx(0.23, 0.0);
  g = source_fourier_vector(tab, a1, 2);
  for (int j = -2; j <= 2; ++j) {
    Cplx want = 0.0;
    const int Q = 20000;
    for (int q = 0; q < Q; ++q) {
      const double x = -M_PI + 2.0 * M_PI * (q + 0.5) / Q;
      const Cplx f = (1.0 + Cplx(0.0, 2.0) * std::exp(Cplx(0.0, x)));
      want += f * std::exp(Cplx(0.0, -(a1[0].real() + j) * x));
    }
    want *= 1.0 / Q;
    CHECK(std::abs(g[j + 2] - want) < 1e-6);
  }
}

TEST_CASE("source diagnostics") {
  SourceSpec tab;
  tab.kind = SourceSpec::Kind::fourier_table;
  tab.dim = 1;
  tab.fourier_table[make_index(0)] = 2.0;
  tab.fourier_table[make_index(3)] = 1e-5;
  CHECK(tab.support_radius() == 3);
  CHECK(tab.shell_max() == doctest::Approx(1e-5));
  CHECK_FALSE(tab.is_zero());
}
