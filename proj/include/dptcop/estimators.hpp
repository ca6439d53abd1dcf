#ifndef DPTCOP_ESTIMATORS_HPP
#define DPTCOP_ESTIMATORS_HPP

#include <span>
#include <variant>
#include <vector>

#include "dptcop/common.hpp"
#include "dptcop/grid.hpp"

namespace dptcop {

// Silverman-style bandwidth N^(-1/5).
double silverman_bandwidth(std::size_t n);

class EmpiricalCopula {
 public:
  explicit EmpiricalCopula(std::span<const Point> points);
  std::size_t size() const { return pts_.size(); }
  double cdf(double u, double v) const;
  // Batch CDF over a query grid; us and vs must be ascending. Returns
  // values[iv * us.size() + iu]. One sweep instead of N work per query.
  std::vector<double> cdf_grid(std::span<const double> us,
                               std::span<const double> vs) const;

 private:
  std::vector<Point> pts_;  // sorted by u
};

// Histogram of cell frequencies n/N at the given level.
GridDensity histogram_fit(std::span<const Point> points, int level);

// Independent Gaussian kernel estimator on the normal-transformed scale.
// The density is the analytic mixed partial of the CDF.
class KernelCopula {
 public:
  KernelCopula(std::span<const Point> points, double bandwidth);
  explicit KernelCopula(std::span<const Point> points);

  double bandwidth() const { return h_; }
  std::size_t size() const { return zx_.size(); }

  double cdf(double u, double v) const;
  double density(double u, double v) const;

  std::vector<double> cdf_grid(std::span<const double> us,
                               std::span<const double> vs) const;
  std::vector<double> density_grid(std::span<const double> us,
                                   std::span<const double> vs) const;
  std::vector<double> density_at(std::span<const Point> pts) const;

 private:
  std::vector<double> zx_, zy_;  // normal scores of the sample
  double h_;
};

struct HistogramEstimate {
  GridDensity grid;
};

struct DPTreeMeanEstimate {
  GridDensity grid;
};

using CopulaEstimate =
    std::variant<EmpiricalCopula, HistogramEstimate, KernelCopula,
                 DPTreeMeanEstimate>;

}  // namespace dptcop

#endif
