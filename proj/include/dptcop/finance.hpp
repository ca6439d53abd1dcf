#ifndef DPTCOP_FINANCE_HPP
#define DPTCOP_FINANCE_HPP

#include <functional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dptcop/common.hpp"
#include "dptcop/dptree.hpp"
#include "dptcop/metrics.hpp"

namespace dptcop {

struct PriceSeries {
  std::vector<std::string> dates;  // ISO-8601, strictly increasing
  std::vector<double> prices;     // positive
};

// CSV with header date,price.
PriceSeries load_price_csv(const std::string& path);

// Keep only dates present in both series; throws listing a few unmatched
// dates when nothing aligns.
std::pair<PriceSeries, PriceSeries> inner_join(const PriceSeries& a,
                                               const PriceSeries& b);

std::vector<double> log_returns(const PriceSeries& series);
std::vector<double> log_returns(std::span<const double> prices);

struct GarchFit {
  double omega = 0.0;
  double alpha1 = 0.0;  // coefficient on r_{t-1}^2
  double beta1 = 0.0;   // coefficient on sigma_{t-1}^2
  double loglik = 0.0;
  std::vector<double> sigma;        // fitted conditional volatilities
  std::vector<double> innovations;  // standardized residuals r / sigma
};

// Gaussian quasi-MLE of GARCH(1,1) with sigma_1^2 set to the sample variance
// and a fixed documented start (omega = 0.05 var, a = 0.05, b = 0.90).
GarchFit garch11_fit(std::span<const double> returns);

// Conditional variance path for given parameters; shared by the fitter and
// simulation-based tests.
std::vector<double> garch11_sigma2_path(double omega, double alpha1,
                                        double beta1,
                                        std::span<const double> returns);

// rank/(n+1) with average ranks on ties.
std::vector<double> empirical_pit(std::span<const double> values);

double fit_gaussian_copula_mle(std::span<const Point> points);
std::pair<double, double> fit_t_copula_mle(std::span<const Point> points);

struct FittedCopula {
  DensityFn density;  // empty when has_density is false
  CdfFn cdf;
  bool has_density = true;
};

// An estimator that fits on a window and may also see all strictly earlier
// points (used by the historic-data-induced prior).
struct CopulaFitter {
  std::string name;
  bool has_density = true;
  std::function<FittedCopula(std::span<const Point> window,
                             std::span<const Point> history)>
      fit;
};

CopulaFitter gaussian_mle_fitter();
CopulaFitter t_mle_fitter();
CopulaFitter kernel_fitter();
CopulaFitter empirical_fitter();
CopulaFitter dpt_fitter(int level, HyperSchedule schedule);
// Canonical prior seeded with down-weighted history counts.
CopulaFitter dpt_weighted_fitter(int level, HyperSchedule schedule,
                                 double history_weight);

struct CvResult {
  std::string name;
  double mean_cross_entropy = 0.0;
};

// k-fold cross-validation: fit on k-1 folds, score cross entropy on the
// held-out fold, report the mean per estimator. Fold assignment is drawn
// from the caller's generator; folds are shared across estimators.
std::vector<CvResult> cross_validate(std::span<const Point> points, int folds,
                                     std::span<const CopulaFitter> fitters,
                                     std::mt19937_64& rng);

enum class PriorMode { canonical, historic_weighted };

struct RollingConfig {
  std::size_t t_train = 500;
  std::size_t t_test = 500;
  std::size_t window_fit = 250;    // t_e
  std::size_t window_predict = 50; // t_p
  int mise_c_grid = 128;
};

struct RollingResult {
  std::string name;
  MetricValue avg_loglik;  // NA for estimators without a density
  double rmise_c = 0.0;    // sqrt of the test-point-averaged MISE_C
};

// Rolling prediction over paired innovations. Marginals are mapped to
// uniforms through the empirical CDF of the training segment (no lookahead);
// per window the estimators fit the trailing window_fit points and are scored
// on the next window_predict points. The MISE_C reference is the empirical
// CDF of each prediction window's own points.
std::vector<RollingResult> rolling_predict(std::span<const double> eps1,
                                           std::span<const double> eps2,
                                           const RollingConfig& config,
                                           std::span<const CopulaFitter> fitters);

}  // namespace dptcop

#endif
