#include "dptcop/finance.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <unordered_map>

#include "dptcop/copulas.hpp"
#include "dptcop/csv.hpp"
#include "dptcop/estimators.hpp"
#include "dptcop/numerics.hpp"

namespace dptcop {

PriceSeries load_price_csv(const std::string& path) {
  CsvTable t = read_csv(path);
  int cd = t.column("date"), cp = t.column("price");
  if (cd < 0 || cp < 0) throw data_error(path + ": expected header date,price");
  PriceSeries s;
  s.dates.reserve(t.rows.size());
  s.prices.reserve(t.rows.size());
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const std::string ctx = path + " row " + std::to_string(i + 2);
    const std::string& d = t.rows[i][cd];
    double p = parse_double(t.rows[i][cp], ctx);
    if (!(p > 0.0)) throw data_error(ctx + ": nonpositive price");
    if (!s.dates.empty() && d <= s.dates.back())
      throw data_error(ctx + ": dates must be strictly increasing");
    s.dates.push_back(d);
    s.prices.push_back(p);
  }
  return s;
}

std::pair<PriceSeries, PriceSeries> inner_join(const PriceSeries& a,
                                               const PriceSeries& b) {
  std::unordered_map<std::string, std::size_t> bidx;
  for (std::size_t i = 0; i < b.dates.size(); ++i) bidx.emplace(b.dates[i], i);
  PriceSeries oa, ob;
  std::vector<std::string> unmatched;
  for (std::size_t i = 0; i < a.dates.size(); ++i) {
    auto it = bidx.find(a.dates[i]);
    if (it == bidx.end()) {
      if (unmatched.size() < 5) unmatched.push_back(a.dates[i]);
      continue;
    }
    oa.dates.push_back(a.dates[i]);
    oa.prices.push_back(a.prices[i]);
    ob.dates.push_back(b.dates[it->second]);
    ob.prices.push_back(b.prices[it->second]);
  }
  if (oa.dates.empty()) {
    std::string msg = "inner_join: no common dates; first unmatched:";
    for (const auto& d : unmatched) msg += " " + d;
    throw data_error(msg);
  }
  return {std::move(oa), std::move(ob)};
}

std::vector<double> log_returns(std::span<const double> prices) {
  if (prices.size() < 2)
    throw usage_error("log_returns: need at least two prices");
  std::vector<double> r;
  r.reserve(prices.size() - 1);
  for (std::size_t i = 1; i < prices.size(); ++i) {
    if (!(prices[i] > 0.0) || !(prices[i - 1] > 0.0))
      throw data_error("log_returns: nonpositive price");
    r.push_back(std::log(prices[i]) - std::log(prices[i - 1]));
  }
  return r;
}

std::vector<double> log_returns(const PriceSeries& series) {
  return log_returns(std::span<const double>(series.prices));
}

std::vector<double> garch11_sigma2_path(double omega, double alpha1,
                                        double beta1,
                                        std::span<const double> returns) {
  const std::size_t n = returns.size();
  double mean = std::accumulate(returns.begin(), returns.end(), 0.0) / n;
  double var = 0.0;
  for (double r : returns) var += (r - mean) * (r - mean);
  var /= n;
  std::vector<double> s2(n);
  s2[0] = var;
  for (std::size_t t = 1; t < n; ++t)
    s2[t] = omega + alpha1 * returns[t - 1] * returns[t - 1] + beta1 * s2[t - 1];
  return s2;
}

GarchFit garch11_fit(std::span<const double> returns) {
  const std::size_t n = returns.size();
  if (n < 50) throw usage_error("garch11_fit: need at least 50 returns");
  double mean = std::accumulate(returns.begin(), returns.end(), 0.0) / n;
  double var = 0.0;
  for (double r : returns) var += (r - mean) * (r - mean);
  var /= n;
  if (!(var > 0.0)) throw data_error("garch11_fit: degenerate returns");

  auto negll = [&](const std::vector<double>& theta) {
    double omega = std::exp(theta[0]);
    double a = std::exp(theta[1]);
    double b = std::exp(theta[2]);
    if (!(omega > 0.0) || a + b >= 1.0 - 1e-6 || omega > 100.0 * var)
      return 1e12 + a + b;
    double s2 = var;
    double ll = std::log(s2) + returns[0] * returns[0] / s2;
    for (std::size_t t = 1; t < n; ++t) {
      s2 = omega + a * returns[t - 1] * returns[t - 1] + b * s2;
      ll += std::log(s2) + returns[t] * returns[t] / s2;
    }
    return 0.5 * ll;
  };

  std::vector<double> start{std::log(0.05 * var), std::log(0.05),
                            std::log(0.90)};
  NelderMeadResult r = nelder_mead(negll, start, 0.5, 1e-12, 4000);
  if (!r.converged)
    throw numeric_error("garch11_fit: optimizer did not converge");

  GarchFit fit;
  fit.omega = std::exp(r.x[0]);
  fit.alpha1 = std::exp(r.x[1]);
  fit.beta1 = std::exp(r.x[2]);
  fit.loglik = -r.fmin;
  std::vector<double> s2 =
      garch11_sigma2_path(fit.omega, fit.alpha1, fit.beta1, returns);
  fit.sigma.resize(n);
  fit.innovations.resize(n);
  for (std::size_t t = 0; t < n; ++t) {
    fit.sigma[t] = std::sqrt(s2[t]);
    fit.innovations[t] = returns[t] / fit.sigma[t];
  }
  double im = std::accumulate(fit.innovations.begin(), fit.innovations.end(),
                              0.0) /
              n;
  double iv = 0.0;
  for (double e : fit.innovations) iv += (e - im) * (e - im);
  iv /= n;
  if (iv < 0.8 || iv > 1.2)
    throw numeric_error("garch11_fit: innovations not standardized (var=" +
                        format_double(iv) + ")");
  return fit;
}

std::vector<double> empirical_pit(std::span<const double> values) {
  const std::size_t n = values.size();
  if (n < 1) throw usage_error("empirical_pit: empty input");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return values[a] < values[b];
  });
  std::vector<double> out(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[idx[j + 1]] == values[idx[i]]) ++j;
    double avg_rank = 0.5 * static_cast<double>(i + 1 + j + 1);  // 1-based
    for (std::size_t k = i; k <= j; ++k)
      out[idx[k]] = avg_rank / static_cast<double>(n + 1);
    i = j + 1;
  }
  return out;
}

static void check_mle_input(std::span<const Point> points) {
  if (points.size() < 10)
    throw usage_error("copula MLE needs at least 10 points");
  for (const Point& p : points)
    if (!(p.u > 0.0 && p.u < 1.0) || !(p.v > 0.0 && p.v < 1.0))
      throw data_error("copula MLE: point on the boundary");
}

double fit_gaussian_copula_mle(std::span<const Point> points) {
  check_mle_input(points);
  const std::size_t n = points.size();
  double sxx = 0.0, sxy = 0.0;
  for (const Point& p : points) {
    double x = norm_quantile(p.u);
    double y = norm_quantile(p.v);
    sxx += x * x + y * y;
    sxy += x * y;
  }
  auto loglik = [&](double rho) {
    double omr = 1.0 - rho * rho;
    return -0.5 * n * std::log(omr) -
           (rho * rho * sxx - 2.0 * rho * sxy) / (2.0 * omr);
  };
  return golden_maximize(loglik, -0.999, 0.999, 1e-10);
}

std::pair<double, double> fit_t_copula_mle(std::span<const Point> points) {
  check_mle_input(points);
  double rho0 = fit_gaussian_copula_mle(points);
  auto negll = [&](const std::vector<double>& theta) {
    double rho = std::tanh(theta[0]);
    double nu = std::exp(theta[1]);
    if (nu < 0.2 || nu > 500.0) return 1e12 + nu;
    CopulaModel m = make_student_t(rho, nu);
    double ll = 0.0;
    for (const Point& p : points) ll += log_density(m, p.u, p.v);
    return -ll;
  };
  std::vector<double> start{std::atanh(rho0), std::log(8.0)};
  NelderMeadResult r = nelder_mead(negll, start, 0.3, 1e-10, 600);
  if (!r.converged)
    throw numeric_error("fit_t_copula_mle: optimizer did not converge");
  return {std::tanh(r.x[0]), std::exp(r.x[1])};
}

// ---------------------------------------------------------------------------
// Fitters

CopulaFitter gaussian_mle_fitter() {
  CopulaFitter f;
  f.name = "gaussian";
  f.fit = [](std::span<const Point> window, std::span<const Point>) {
    double rho = fit_gaussian_copula_mle(window);
    CopulaModel m = make_gaussian(rho);
    FittedCopula fc;
    fc.density = [m](double u, double v) { return density(m, u, v); };
    fc.cdf = [rho](double u, double v) {
      if (u <= 0.0 || v <= 0.0) return 0.0;
      if (u >= 1.0) return v;
      if (v >= 1.0) return u;
      return bvn_cdf(norm_quantile(u), norm_quantile(v), rho);
    };
    return fc;
  };
  return f;
}

CopulaFitter t_mle_fitter() {
  CopulaFitter f;
  f.name = "student_t";
  f.fit = [](std::span<const Point> window, std::span<const Point>) {
    auto [rho, nu] = fit_t_copula_mle(window);
    CopulaModel m = make_student_t(rho, nu);
    FittedCopula fc;
    fc.density = [m](double u, double v) { return density(m, u, v); };
    fc.cdf = [rho, nu](double u, double v) {
      if (u <= 0.0 || v <= 0.0) return 0.0;
      if (u >= 1.0) return v;
      if (v >= 1.0) return u;
      return bvt_cdf(student_t_quantile(u, nu), student_t_quantile(v, nu),
                     rho, nu);
    };
    return fc;
  };
  return f;
}

CopulaFitter kernel_fitter() {
  CopulaFitter f;
  f.name = "kernel";
  f.fit = [](std::span<const Point> window, std::span<const Point>) {
    auto k = std::make_shared<KernelCopula>(window);
    FittedCopula fc;
    fc.density = [k](double u, double v) { return k->density(u, v); };
    fc.cdf = [k](double u, double v) {
      if (u <= 0.0 || v <= 0.0) return 0.0;
      if (u >= 1.0 || v >= 1.0)
        return k->cdf(std::min(u, 1.0 - 1e-12), std::min(v, 1.0 - 1e-12));
      return k->cdf(u, v);
    };
    return fc;
  };
  return f;
}

CopulaFitter empirical_fitter() {
  CopulaFitter f;
  f.name = "empirical";
  f.has_density = false;
  f.fit = [](std::span<const Point> window, std::span<const Point>) {
    auto e = std::make_shared<EmpiricalCopula>(window);
    FittedCopula fc;
    fc.has_density = false;
    fc.cdf = [e](double u, double v) { return e->cdf(u, v); };
    return fc;
  };
  return f;
}

static FittedCopula fitted_from_grid(GridDensity grid) {
  auto g = std::make_shared<GridDensity>(std::move(grid));
  auto c = std::make_shared<GridCdf>(*g);
  FittedCopula fc;
  fc.density = [g](double u, double v) { return g->density_at(u, v); };
  fc.cdf = [c](double u, double v) { return (*c)(u, v); };
  return fc;
}

CopulaFitter dpt_fitter(int level, HyperSchedule schedule) {
  CopulaFitter f;
  f.name = "dpt";
  f.fit = [level, schedule](std::span<const Point> window,
                            std::span<const Point>) {
    DPTree tree(level, schedule);
    tree = tree.updated(window);
    return fitted_from_grid(tree.posterior_mean_grid());
  };
  return f;
}

CopulaFitter dpt_weighted_fitter(int level, HyperSchedule schedule,
                                 double history_weight) {
  if (!(history_weight > 0.0))
    throw usage_error("dpt_weighted_fitter: weight must be positive");
  CopulaFitter f;
  f.name = "dpt_weighted";
  f.fit = [level, schedule, history_weight](std::span<const Point> window,
                                            std::span<const Point> history) {
    DPTree tree(level, schedule);
    if (!history.empty()) tree = tree.updated(history, history_weight);
    tree = tree.updated(window);
    return fitted_from_grid(tree.posterior_mean_grid());
  };
  return f;
}

// ---------------------------------------------------------------------------
// Cross-validation

std::vector<CvResult> cross_validate(std::span<const Point> points, int folds,
                                     std::span<const CopulaFitter> fitters,
                                     std::mt19937_64& rng) {
  const std::size_t n = points.size();
  if (folds < 2) throw usage_error("cross_validate: need k >= 2 folds");
  if (n < static_cast<std::size_t>(folds))
    throw usage_error("cross_validate: fewer points than folds");
  for (const CopulaFitter& f : fitters)
    if (!f.has_density)
      throw usage_error("cross_validate: estimator '" + f.name +
                        "' has no density");

  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);

  std::vector<CvResult> out;
  for (const CopulaFitter& f : fitters) {
    double acc = 0.0;
    for (int k = 0; k < folds; ++k) {
      std::size_t lo = n * k / folds;
      std::size_t hi = n * (k + 1) / folds;
      std::vector<Point> train, test;
      train.reserve(n - (hi - lo));
      test.reserve(hi - lo);
      for (std::size_t i = 0; i < n; ++i)
        (i >= lo && i < hi ? test : train).push_back(points[perm[i]]);
      FittedCopula fc = f.fit(train, {});
      acc += cross_entropy(fc.density, test);
    }
    out.push_back(CvResult{f.name, acc / folds});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Rolling prediction

namespace {

// Empirical CDF of the training segment, linearly ranked, clamped inside
// (0, 1); applied to both training and test innovations.
class TrainPit {
 public:
  explicit TrainPit(std::span<const double> train)
      : sorted_(train.begin(), train.end()) {
    std::sort(sorted_.begin(), sorted_.end());
  }
  double operator()(double x) const {
    auto ub = std::upper_bound(sorted_.begin(), sorted_.end(), x);
    double r = static_cast<double>(ub - sorted_.begin());
    double n = static_cast<double>(sorted_.size());
    return std::clamp(r / (n + 1.0), 1.0 / (n + 2.0), (n + 1.0) / (n + 2.0));
  }

 private:
  std::vector<double> sorted_;
};

}  // namespace

std::vector<RollingResult> rolling_predict(std::span<const double> eps1,
                                           std::span<const double> eps2,
                                           const RollingConfig& config,
                                           std::span<const CopulaFitter> fitters) {
  if (eps1.size() != eps2.size())
    throw usage_error("rolling_predict: series lengths differ");
  if (config.window_fit > config.t_train)
    throw usage_error("rolling_predict: t_e must be <= T_tr");
  if (config.window_predict < 1 || config.window_predict > config.t_test)
    throw usage_error("rolling_predict: t_p must be in [1, T_te]");
  if (eps1.size() < config.t_train + config.t_test)
    throw usage_error("rolling_predict: series shorter than T_tr + T_te");

  TrainPit pit1(eps1.subspan(0, config.t_train));
  TrainPit pit2(eps2.subspan(0, config.t_train));
  const std::size_t total = config.t_train + config.t_test;
  std::vector<Point> pts(total);
  for (std::size_t i = 0; i < total; ++i)
    pts[i] = Point{pit1(eps1[i]), pit2(eps2[i])};

  std::vector<double> grid = interior_grid(config.mise_c_grid);
  std::vector<RollingResult> out;
  for (const CopulaFitter& f : fitters) {
    KahanSum loglik;
    KahanSum mise_acc;
    std::size_t consumed = 0;
    for (std::size_t start = config.t_train; start < total;
         start += config.window_predict) {
      std::size_t end = std::min(start + config.window_predict, total);
      std::span<const Point> window(pts.data() + start - config.window_fit,
                                    config.window_fit);
      std::span<const Point> history(pts.data(), start - config.window_fit);
      FittedCopula fc = f.fit(window, history);

      if (f.has_density)
        for (std::size_t i = start; i < end; ++i)
          loglik.add(std::log(fc.density(pts[i].u, pts[i].v)));

      // Reference: empirical copula of this prediction window's own points.
      EmpiricalCopula ref(std::span<const Point>(pts.data() + start, end - start));
      std::vector<double> ref_vals = ref.cdf_grid(grid, grid);
      KahanSum se;
      for (std::size_t j = 0; j < grid.size(); ++j)
        for (std::size_t i = 0; i < grid.size(); ++i) {
          double d = fc.cdf(grid[i], grid[j]) - ref_vals[j * grid.size() + i];
          se.add(d * d);
        }
      double mise_c_w =
          se.value() / (static_cast<double>(grid.size()) * grid.size());
      mise_acc.add(mise_c_w * static_cast<double>(end - start));
      consumed += end - start;
    }
    if (consumed != config.t_test)
      throw numeric_error("rolling_predict: window accounting mismatch");
    RollingResult r;
    r.name = f.name;
    r.avg_loglik = f.has_density
                       ? MetricValue::number(loglik.value() /
                                             static_cast<double>(config.t_test))
                       : MetricValue::na();
    r.rmise_c =
        std::sqrt(mise_acc.value() / static_cast<double>(config.t_test));
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace dptcop
