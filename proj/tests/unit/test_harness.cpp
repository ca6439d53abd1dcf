#include <doctest.h>

#include <cmath>
#include <random>

#include "dptcop/harness.hpp"
#include "test_support.hpp"

using namespace dptcop;

TEST_CASE("parallel_for covers every index once") {
  std::vector<int> hits(1000, 0);
  parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i]++; });
  for (int h : hits) CHECK(h == 1);
}

TEST_CASE("convergence fit on synthetic shapes") {
  std::vector<std::pair<double, double>> constant{
      {10, 0.5}, {100, 0.5}, {1000, 0.5}, {10000, 0.5}};
  ConvergenceFit cf = run_convergence_fit(constant);
  CHECK(std::abs(cf.linlog.slope) <= 1e-12);
  CHECK(std::abs(cf.loglog.slope) <= 1e-12);

  std::vector<std::pair<double, double>> power;
  for (double n : {10.0, 100.0, 1000.0, 10000.0, 100000.0})
    power.push_back({n, std::pow(n, -0.3)});
  ConvergenceFit pf = run_convergence_fit(power);
  CHECK(pf.loglog.slope == doctest::Approx(-0.3).epsilon(1e-10));
  CHECK(pf.loglog.r2 == doctest::Approx(1.0).epsilon(1e-12));

  // published-row sanity: the OLS log-log slope sits near the two-point
  // bracket log(0.04/0.54)/log(1e4) ~ -0.28
  std::vector<std::pair<double, double>> row{
      {10, 0.54}, {100, 0.25}, {1000, 0.13}, {10000, 0.07}, {100000, 0.04}};
  ConvergenceFit rf = run_convergence_fit(row);
  double bracket = std::log(0.04 / 0.54) / std::log(1e4);
  CHECK(rf.loglog.slope >= bracket - 0.02);
  CHECK(rf.loglog.slope <= bracket + 0.02);
  CHECK(rf.loglog.r2 > rf.linlog.r2);

  std::vector<std::pair<double, double>> few{{10, 0.5}, {100, 0.4}, {1000, 0.3}};
  CHECK_THROWS_AS(run_convergence_fit(few), usage_error);
  // N = 0 and infinite cells are skipped
  std::vector<std::pair<double, double>> with_zero = power;
  with_zero.push_back({0.0, 1.5});
  with_zero.push_back({50.0, std::numeric_limits<double>::infinity()});
  CHECK(run_convergence_fit(with_zero).loglog.slope ==
        doctest::Approx(-0.3).epsilon(1e-10));
}

TEST_CASE("kl table is deterministic across thread counts") {
  KlTableConfig cfg;
  cfg.families = {make_gaussian(0.5)};
  cfg.sample_sizes = {0, 10, 100};
  cfg.level = 4;
  cfg.draws = 12;
  cfg.kl_points = 1500;
  std::vector<KlCellResult> a = run_kl_table(cfg, 777, 1);
  std::vector<KlCellResult> b = run_kl_table(cfg, 777, 4);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].family == b[i].family);
    CHECK(a[i].n == b[i].n);
    CHECK(a[i].mean_kl == b[i].mean_kl);  // bit-identical
    CHECK(a[i].sd_kl == b[i].sd_kl);
  }
  // K-L decreases with N even at this tiny scale
  CHECK(a[0].mean_kl > a[1].mean_kl);
  CHECK(a[1].mean_kl > a[2].mean_kl);
}

TEST_CASE("kl table seed changes the output") {
  KlTableConfig cfg;
  cfg.families = {make_gaussian(0.5)};
  cfg.sample_sizes = {10};
  cfg.level = 3;
  cfg.draws = 5;
  cfg.kl_points = 500;
  auto a = run_kl_table(cfg, 1, 1);
  auto b = run_kl_table(cfg, 2, 1);
  CHECK(a[0].mean_kl != b[0].mean_kl);
}

TEST_CASE("freq comparison emits exact NA/Inf states and is deterministic") {
  FreqComparisonConfig cfg;
  cfg.family = make_gaussian(0.5);  // no oracle grid needed
  cfg.sample_sizes = {10, 50};
  cfg.level = 4;
  cfg.replications = 2;
  cfg.kl_points = 400;
  cfg.quad_grid = 64;
  std::vector<MetricRow> rows = run_freq_comparison(cfg, 99, 1);
  REQUIRE(rows.size() == 2 * 2 * 4);
  for (const MetricRow& r : rows) {
    if (r.estimator == "empirical") {
      CHECK(r.kl.is_na());
      CHECK(r.mise.is_na());
      CHECK(r.mise_c.is_number());
      CHECK(r.mse_g.is_number());
    }
    if (r.estimator == "histogram") CHECK(r.kl.is_inf());
    if (r.estimator == "dpt") {
      CHECK(r.kl.is_number());
      CHECK(r.mise.is_number());
    }
  }
  std::vector<MetricRow> again = run_freq_comparison(cfg, 99, 3);
  REQUIRE(again.size() == rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i].estimator == again[i].estimator);
    if (rows[i].kl.is_number())
      CHECK(rows[i].kl.get() == again[i].kl.get());
    CHECK(rows[i].mise_c.get() == again[i].mise_c.get());
  }
  // empirical and histogram cell masses coincide, and so does their mse_g
  for (std::size_t i = 0; i < rows.size(); i += 4)
    CHECK(rows[i + 1].mse_g.get() == rows[i + 3].mse_g.get());
}
