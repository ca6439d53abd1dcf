#include "dptcop/metrics.hpp"

#include <cmath>
#include <limits>

#include "dptcop/csv.hpp"

namespace dptcop {

MetricValue MetricValue::number(double v) {
  MetricValue m;
  if (std::isinf(v)) return infinite();
  m.state_ = State::number;
  m.v_ = v;
  return m;
}

MetricValue MetricValue::na() {
  MetricValue m;
  m.state_ = State::na;
  return m;
}

MetricValue MetricValue::infinite() {
  MetricValue m;
  m.state_ = State::inf;
  return m;
}

double MetricValue::get() const {
  if (state_ == State::number) return v_;
  if (state_ == State::inf) return std::numeric_limits<double>::infinity();
  throw usage_error("metric value is not applicable");
}

std::string MetricValue::str() const {
  switch (state_) {
    case State::na:
      return "NA";
    case State::inf:
      return "Inf";
    default:
      return format_double(v_);
  }
}

void write_metric_rows(const std::string& path,
                       const std::vector<MetricRow>& rows) {
  std::vector<std::vector<std::string>> out;
  out.reserve(rows.size());
  for (const MetricRow& r : rows)
    out.push_back({r.estimator, r.family, std::to_string(r.n),
                   std::to_string(r.level), std::to_string(r.replication),
                   r.kl.str(), r.mise.str(), r.mise_c.str(), r.mse_g.str(),
                   r.cross_entropy.str()});
  write_csv(path,
            {"estimator", "family", "N", "M", "replication", "kl", "mise",
             "mise_c", "mse_g", "cross_entropy"},
            out);
}

double kl_divergence(const CopulaModel& truth, const DensityFn& estimate,
                     std::size_t n_mc, std::mt19937_64& rng) {
  if (n_mc < 1) throw usage_error("kl_divergence: n_mc must be >= 1");
  std::vector<Point> pts = sample(truth, rng, n_mc);
  std::vector<double> logc(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i)
    logc[i] = log_density(truth, pts[i].u, pts[i].v);
  return kl_against_points(pts, logc, estimate);
}

double kl_against_points(std::span<const Point> pts,
                         std::span<const double> log_c,
                         const DensityFn& estimate) {
  if (pts.empty() || pts.size() != log_c.size())
    throw usage_error("kl_against_points: mismatched inputs");
  KahanSum s;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    double p = estimate(pts[i].u, pts[i].v);
    if (!(p > 0.0)) return std::numeric_limits<double>::infinity();
    s.add(log_c[i] - std::log(p));
  }
  return s.value() / static_cast<double>(pts.size());
}

std::vector<double> interior_grid(int grid_points) {
  std::vector<double> g(grid_points);
  for (int k = 0; k < grid_points; ++k) g[k] = (k + 0.5) / grid_points;
  return g;
}

double squared_error_mean(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.empty())
    throw usage_error("squared_error_mean: mismatched grids");
  KahanSum s;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    s.add(d * d);
  }
  return s.value() / static_cast<double>(a.size());
}

static double grid_quadrature(const DensityFn& truth, const DensityFn& estimate,
                              int grid_points) {
  if (grid_points < 64) throw usage_error("quadrature grid must have >= 64 points");
  std::vector<double> g = interior_grid(grid_points);
  KahanSum s;
  for (double v : g)
    for (double u : g) {
      double d = truth(u, v) - estimate(u, v);
      s.add(d * d);
    }
  return s.value() / (static_cast<double>(grid_points) * grid_points);
}

double mise(const DensityFn& truth, const DensityFn& estimate,
            int grid_points) {
  return grid_quadrature(truth, estimate, grid_points);
}

double mise_c(const CdfFn& truth, const CdfFn& estimate, int grid_points) {
  return grid_quadrature(truth, estimate, grid_points);
}

double mse_g(const GridDensity& truth, const GridDensity& estimate) {
  if (truth.level() != estimate.level())
    throw usage_error("mse_g: grids have different levels");
  KahanSum s;
  const auto& a = truth.masses();
  const auto& b = estimate.masses();
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    s.add(d * d);
  }
  return s.value();
}

double cross_entropy(const DensityFn& estimate, std::span<const Point> heldout) {
  if (heldout.empty()) throw usage_error("cross_entropy: empty held-out set");
  KahanSum s;
  for (const Point& p : heldout) {
    if (!(p.u > 0.0 && p.u < 1.0) || !(p.v > 0.0 && p.v < 1.0))
      throw data_error("cross_entropy: held-out point on the boundary");
    double c = estimate(p.u, p.v);
    if (!(c > 0.0)) return std::numeric_limits<double>::infinity();
    s.add(std::log(c));
  }
  return -s.value() / static_cast<double>(heldout.size());
}

}  // namespace dptcop
