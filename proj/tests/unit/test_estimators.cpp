#include <doctest.h>

#include <cmath>
#include <random>

#include "dptcop/dptree.hpp"
#include "dptcop/estimators.hpp"
#include "dptcop/metrics.hpp"
#include "dptcop/numerics.hpp"
#include "test_support.hpp"

using namespace dptcop;
using dptcop::testing::random_points;

TEST_CASE("empirical cdf basics") {
  std::vector<Point> pts{{0.2, 0.2}, {0.8, 0.8}};
  EmpiricalCopula e(pts);
  CHECK(e.cdf(1.0, 1.0) == 1.0);
  CHECK(e.cdf(0.5, 0.5) == 0.5);
  CHECK(e.cdf(0.0, 0.0) == 0.0);
  CHECK_THROWS_AS(EmpiricalCopula(std::vector<Point>{}), usage_error);
}

TEST_CASE("empirical cdf monotone and Frechet-bounded at sample level") {
  std::mt19937_64 rng(301);
  std::vector<Point> pts = random_points(rng, 200);
  EmpiricalCopula e(pts);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double n_inv = 1.0 / 200.0;
  for (int t = 0; t < 200; ++t) {
    double u = unif(rng), v = unif(rng);
    double c = e.cdf(u, v);
    CHECK(c <= std::min(u, v) + n_inv + 1e-12);
    CHECK(e.cdf(u, 0.0) == 0.0);
    CHECK(e.cdf(std::min(1.0, u + 0.1), v) >= c);
    CHECK(e.cdf(u, std::min(1.0, v + 0.1)) >= c);
  }
}

TEST_CASE("empirical grid sweep equals pointwise evaluation") {
  std::mt19937_64 rng(302);
  std::vector<Point> pts = random_points(rng, 157);
  EmpiricalCopula e(pts);
  std::vector<double> grid = interior_grid(16);
  std::vector<double> vals = e.cdf_grid(grid, grid);
  for (std::size_t j = 0; j < grid.size(); ++j)
    for (std::size_t i = 0; i < grid.size(); ++i)
      CHECK(vals[j * grid.size() + i] == e.cdf(grid[i], grid[j]));
}

TEST_CASE("histogram cell frequencies") {
  std::vector<Point> quad{{0.2, 0.2}, {0.7, 0.2}, {0.2, 0.7}, {0.7, 0.7}};
  GridDensity g = histogram_fit(quad, 1);
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 2; ++c) CHECK(g.at(r, c) == 0.25);

  std::vector<Point> clump(17, Point{0.1, 0.1});
  GridDensity h = histogram_fit(clump, 2);
  CHECK(h.at(0, 0) == 1.0);
  CHECK(h.total_mass() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(histogram_fit(std::vector<Point>{}, 2), usage_error);
}

TEST_CASE("histogram is the weak-prior limit of the D-P tree mean") {
  std::mt19937_64 rng(303);
  std::vector<Point> pts = random_points(rng, 64);
  GridDensity hist = histogram_fit(pts, 3);
  HyperSchedule tiny = HyperSchedule::scaled_canonical(1e-10);
  GridDensity mean =
      DPTree(3, tiny).updated(pts).posterior_mean_grid();
  for (int r = 0; r < 8; ++r)
    for (int c = 0; c < 8; ++c)
      CHECK(std::abs(mean.at(r, c) - hist.at(r, c)) <= 1e-6);
}

TEST_CASE("kernel bandwidth and single-point values") {
  CHECK(silverman_bandwidth(100) ==
        doctest::Approx(std::pow(100.0, -0.2)).epsilon(1e-15));
  std::vector<Point> one{{0.5, 0.5}};
  KernelCopula k(one);
  CHECK(k.cdf(0.5, 0.5) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK_THROWS_AS(k.cdf(0.0, 0.5), data_error);
  CHECK_THROWS_AS(KernelCopula(std::vector<Point>{{0.0, 0.5}}), data_error);
}

TEST_CASE("kernel density integrates to one") {
  std::mt19937_64 rng(304);
  std::vector<Point> pts = random_points(rng, 100);
  KernelCopula k(pts);
  std::vector<double> grid = interior_grid(512);
  std::vector<double> vals = k.density_grid(grid, grid);
  KahanSum s;
  for (double v : vals) {
    CHECK(v >= 0.0);
    s.add(v);
  }
  CHECK(std::abs(s.value() / (512.0 * 512.0) - 1.0) <= 1e-3);
}

TEST_CASE("kernel grid evaluation equals pointwise evaluation") {
  std::mt19937_64 rng(305);
  std::vector<Point> pts = random_points(rng, 60);
  KernelCopula k(pts);
  std::vector<double> grid = interior_grid(8);
  std::vector<double> dg = k.density_grid(grid, grid);
  std::vector<double> cg = k.cdf_grid(grid, grid);
  for (std::size_t j = 0; j < grid.size(); ++j)
    for (std::size_t i = 0; i < grid.size(); ++i) {
      CHECK(dg[j * grid.size() + i] ==
            doctest::Approx(k.density(grid[i], grid[j])).epsilon(1e-10));
      CHECK(cg[j * grid.size() + i] ==
            doctest::Approx(k.cdf(grid[i], grid[j])).epsilon(1e-10));
    }
  std::vector<Point> queries = random_points(rng, 25);
  std::vector<double> da = k.density_at(queries);
  for (std::size_t i = 0; i < queries.size(); ++i)
    CHECK(da[i] ==
          doctest::Approx(k.density(queries[i].u, queries[i].v)).epsilon(1e-10));
}

TEST_CASE("kernel cdf tends to the empirical cdf as h -> 0") {
  std::mt19937_64 rng(306);
  std::vector<Point> pts = random_points(rng, 50);
  EmpiricalCopula e(pts);
  KernelCopula k(pts, 1e-6);
  // query away from the data coordinates
  for (auto [u, v] : std::vector<std::pair<double, double>>{
           {0.333333, 0.777777}, {0.111111, 0.222222}, {0.654321, 0.123456}}) {
    CHECK(std::abs(k.cdf(u, v) - e.cdf(u, v)) <= 1e-6);
  }
}
