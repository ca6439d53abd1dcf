#include <doctest.h>

#include <cmath>
#include <random>

#include "dptcop/metrics.hpp"
#include "dptcop/rng.hpp"
#include "test_support.hpp"

using namespace dptcop;

TEST_CASE("metric value states") {
  CHECK(MetricValue::na().str() == "NA");
  CHECK(MetricValue::infinite().str() == "Inf");
  CHECK(MetricValue::number(0.25).str() == "0.25");
  CHECK(MetricValue::number(1.0 / 0.0).is_inf());
  CHECK_THROWS_AS(MetricValue::na().get(), usage_error);
}

TEST_CASE("K-L of the truth against itself and against uniform") {
  CopulaModel truth = make_gaussian(0.5);
  std::mt19937_64 rng(401);
  double self = kl_divergence(
      truth, [&](double u, double v) { return density(truth, u, v); }, 5000,
      rng);
  CHECK(self == doctest::Approx(0.0).epsilon(1e-12));

  // against the uniform estimate the K-L is E_c log c = -0.5 log(1 - rho^2);
  // the tolerance is 3 MC standard errors estimated from the draws
  std::vector<double> logc;
  std::mt19937_64 rng2(402);
  std::vector<Point> pts = sample_with_log_density(truth, rng2, 50000, logc);
  double mean = 0.0, var = 0.0;
  for (double x : logc) mean += x;
  mean /= logc.size();
  for (double x : logc) var += (x - mean) * (x - mean);
  var /= logc.size();
  double uniform_kl =
      kl_against_points(pts, logc, [](double, double) { return 1.0; });
  double expected = -0.5 * std::log(0.75);
  CHECK(std::abs(uniform_kl - expected) <=
        3 * std::sqrt(var / logc.size()));

  double zero = kl_against_points(pts, logc, [](double, double) { return 0.0; });
  CHECK(std::isinf(zero));
}

TEST_CASE("K-L near zero for every family against itself") {
  std::mt19937_64 rng(403);
  for (const CopulaModel& m :
       {make_gaussian(0.9), make_student_t(0.5, 4.0), make_gumbel(2.0),
        make_skew_normal(0.5, 2.0, 0.0)}) {
    double kl = kl_divergence(
        m, [&](double u, double v) { return density(m, u, v); }, 2000, rng);
    CHECK(std::abs(kl) <= 1e-10);
  }
}

TEST_CASE("MISE with a high-resolution quadrature oracle") {
  CopulaModel truth = make_gaussian(0.5);
  auto cdens = [&](double u, double v) { return density(truth, u, v); };
  auto uniform = [](double, double) { return 1.0; };
  CHECK(mise(cdens, cdens, 64) == 0.0);

  double got = mise(uniform, cdens, 512);
  // oracle: ~1e7-point midpoint quadrature of (c - 1)^2
  std::vector<double> fine = interior_grid(3163);
  std::vector<double> vals = density_grid(truth, fine, fine);
  KahanSum s;
  for (double v : vals) s.add((v - 1.0) * (v - 1.0));
  double oracle = s.value() / (3163.0 * 3163.0);
  CHECK(std::abs(got - oracle) <= 0.01 * oracle);
  // closed form for the Gaussian copula: rho^2 / (1 - rho^2)
  CHECK(oracle == doctest::Approx(1.0 / 3).epsilon(2e-3));
  CHECK_THROWS_AS(mise(uniform, cdens, 32), usage_error);
}

TEST_CASE("MISE_C closed-form check") {
  auto indep = [](double u, double v) { return u * v; };
  auto comon = [](double u, double v) { return std::min(u, v); };
  CHECK(mise_c(indep, indep, 128) == 0.0);
  CHECK(std::abs(mise_c(indep, comon, 512) - 1.0 / 90.0) <= 1e-5);
  // symmetric in the two arguments
  CHECK(mise_c(indep, comon, 256) == mise_c(comon, indep, 256));
}

TEST_CASE("quadrature refinement is stable for smooth inputs") {
  CopulaModel truth = make_gaussian(0.5);
  auto cdens = [&](double u, double v) { return density(truth, u, v); };
  auto uniform = [](double, double) { return 1.0; };
  double a = mise(uniform, cdens, 512);
  double b = mise(uniform, cdens, 1024);
  CHECK(std::abs(a - b) <= 0.005 * std::abs(b));
}

TEST_CASE("grid mass mse") {
  GridDensity a = GridDensity::uniform(2);
  GridDensity b = GridDensity::uniform(2);
  CHECK(mse_g(a, b) == 0.0);
  b.at(0, 0) += 0.01;
  b.at(3, 3) -= 0.01;
  CHECK(mse_g(a, b) == doctest::Approx(2 * 0.01 * 0.01).epsilon(1e-12));
  GridDensity c = GridDensity::uniform(3);
  CHECK_THROWS_AS(mse_g(a, c), usage_error);
}

TEST_CASE("cross entropy") {
  std::mt19937_64 rng(404);
  CopulaModel truth = make_gaussian(0.5);
  std::vector<double> logc;
  std::vector<Point> pts = sample_with_log_density(truth, rng, 20000, logc);

  CHECK(cross_entropy([](double, double) { return 1.0; }, pts) == 0.0);

  double ce = cross_entropy(
      [&](double u, double v) { return density(truth, u, v); }, pts);
  double mean = 0.0, var = 0.0;
  for (double x : logc) mean += x;
  mean /= logc.size();
  for (double x : logc) var += (x - mean) * (x - mean);
  var /= logc.size();
  CHECK(std::abs(ce - (-mean)) <= 1e-10);  // same points, same values
  // and the MC oracle pins the magnitude of -E log c
  CHECK(std::abs(ce - 0.5 * std::log(0.75)) <=
        2 * std::sqrt(var / logc.size()));

  CHECK(std::isinf(
      cross_entropy([](double, double) { return 0.0; }, pts)));
  std::vector<Point> boundary{{0.0, 0.5}};
  CHECK_THROWS_AS(
      cross_entropy([](double, double) { return 1.0; }, boundary), data_error);
  CHECK_THROWS_AS(
      cross_entropy([](double, double) { return 1.0; }, std::vector<Point>{}),
      usage_error);
}

TEST_CASE("metrics ignore input point order") {
  std::mt19937_64 rng(405);
  CopulaModel truth = make_gaussian(0.5);
  std::vector<double> logc;
  std::vector<Point> pts = sample_with_log_density(truth, rng, 500, logc);
  auto est = [](double u, double v) { return 0.5 + u * v; };
  double a = kl_against_points(pts, logc, est);
  std::vector<Point> rev(pts.rbegin(), pts.rend());
  std::vector<double> revc(logc.rbegin(), logc.rend());
  double b = kl_against_points(rev, revc, est);
  CHECK(a == doctest::Approx(b).epsilon(1e-13));
}
