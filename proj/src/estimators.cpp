#include "dptcop/estimators.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "dptcop/numerics.hpp"
#include "dptcop/partition.hpp"

namespace dptcop {

double silverman_bandwidth(std::size_t n) {
  if (n < 1) throw usage_error("bandwidth needs a nonempty sample");
  return std::pow(static_cast<double>(n), -0.2);
}

EmpiricalCopula::EmpiricalCopula(std::span<const Point> points)
    : pts_(points.begin(), points.end()) {
  if (pts_.empty()) throw usage_error("empirical copula needs a nonempty sample");
  std::sort(pts_.begin(), pts_.end(),
            [](const Point& a, const Point& b) { return a.u < b.u; });
}

double EmpiricalCopula::cdf(double u, double v) const {
  std::size_t count = 0;
  for (const Point& p : pts_) {
    if (p.u > u) break;  // sorted by u
    if (p.v <= v) ++count;
  }
  return static_cast<double>(count) / static_cast<double>(pts_.size());
}

std::vector<double> EmpiricalCopula::cdf_grid(std::span<const double> us,
                                              std::span<const double> vs) const {
  const std::size_t nu = us.size(), nv = vs.size();
  std::vector<double> out(nu * nv, 0.0);
  std::vector<std::size_t> bucket(nv + 1, 0);
  std::size_t next = 0;
  const double inv_n = 1.0 / static_cast<double>(pts_.size());
  for (std::size_t iu = 0; iu < nu; ++iu) {
    while (next < pts_.size() && pts_[next].u <= us[iu]) {
      // first query level vs[j] >= p.v counts this point
      std::size_t j = std::lower_bound(vs.begin(), vs.end(), pts_[next].v) -
                      vs.begin();
      ++bucket[j];
      ++next;
    }
    std::size_t acc = 0;
    for (std::size_t iv = 0; iv < nv; ++iv) {
      acc += bucket[iv];
      out[iv * nu + iu] = static_cast<double>(acc) * inv_n;
    }
  }
  return out;
}

GridDensity histogram_fit(std::span<const Point> points, int level) {
  if (points.empty()) throw usage_error("histogram needs a nonempty sample");
  GridDensity g(level);
  const double w = 1.0 / static_cast<double>(points.size());
  for (const Point& p : points) {
    std::uint64_t col = axis_cell_index(p.u, level);
    std::uint64_t row = axis_cell_index(p.v, level);
    g.at(row, col) += w;
  }
  return g;
}

KernelCopula::KernelCopula(std::span<const Point> points, double bandwidth)
    : h_(bandwidth) {
  if (points.empty()) throw usage_error("kernel estimator needs a nonempty sample");
  if (!(h_ > 0.0)) throw usage_error("kernel bandwidth must be positive");
  zx_.reserve(points.size());
  zy_.reserve(points.size());
  for (const Point& p : points) {
    if (!(p.u > 0.0 && p.u < 1.0) || !(p.v > 0.0 && p.v < 1.0))
      throw data_error("kernel estimator: sample point on the boundary");
    zx_.push_back(norm_quantile(p.u));
    zy_.push_back(norm_quantile(p.v));
  }
}

KernelCopula::KernelCopula(std::span<const Point> points)
    : KernelCopula(points, silverman_bandwidth(points.size())) {}

static void require_interior_query(double u, double v) {
  if (!(u > 0.0 && u < 1.0) || !(v > 0.0 && v < 1.0))
    throw data_error("kernel estimator query must be interior to (0,1)^2");
}

double KernelCopula::cdf(double u, double v) const {
  require_interior_query(u, v);
  double zu = norm_quantile(u), zv = norm_quantile(v);
  double s = 0.0;
  for (std::size_t i = 0; i < zx_.size(); ++i)
    s += norm_cdf((zu - zx_[i]) / h_) * norm_cdf((zv - zy_[i]) / h_);
  return s / static_cast<double>(zx_.size());
}

double KernelCopula::density(double u, double v) const {
  require_interior_query(u, v);
  double zu = norm_quantile(u), zv = norm_quantile(v);
  double s = 0.0;
  for (std::size_t i = 0; i < zx_.size(); ++i) {
    double dx = (zu - zx_[i]) / h_;
    double dy = (zv - zy_[i]) / h_;
    s += std::exp(-0.5 * (dx * dx + dy * dy));
  }
  s /= (2.0 * M_PI);
  double n = static_cast<double>(zx_.size());
  return s / (n * h_ * h_ * norm_pdf(zu) * norm_pdf(zv));
}

namespace {

// C = X' Y / n accumulated in blocks of rows to bound the transient memory.
std::vector<double> blocked_cross(const std::vector<double>& zx,
                                  const std::vector<double>& zy,
                                  const std::vector<double>& fu,
                                  const std::vector<double>& fv, double h,
                                  bool gaussian_kernel) {
  using Eigen::MatrixXd;
  const std::size_t n = zx.size();
  const std::size_t gu = fu.size(), gv = fv.size();
  MatrixXd acc = MatrixXd::Zero(gu, gv);
  const std::size_t block = 2048;
  MatrixXd a, b;
  for (std::size_t lo = 0; lo < n; lo += block) {
    std::size_t m = std::min(block, n - lo);
    a.resize(m, gu);
    b.resize(m, gv);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t k = 0; k < gu; ++k) {
        double d = (fu[k] - zx[lo + i]) / h;
        a(i, k) = gaussian_kernel ? std::exp(-0.5 * d * d) : norm_cdf(d);
      }
      for (std::size_t k = 0; k < gv; ++k) {
        double d = (fv[k] - zy[lo + i]) / h;
        b(i, k) = gaussian_kernel ? std::exp(-0.5 * d * d) : norm_cdf(d);
      }
    }
    acc.noalias() += a.transpose() * b;
  }
  std::vector<double> out(gu * gv);
  for (std::size_t k = 0; k < gu; ++k)
    for (std::size_t l = 0; l < gv; ++l)
      out[l * gu + k] = acc(k, l) / static_cast<double>(n);
  return out;
}

}  // namespace

std::vector<double> KernelCopula::cdf_grid(std::span<const double> us,
                                           std::span<const double> vs) const {
  std::vector<double> fu(us.size()), fv(vs.size());
  for (std::size_t k = 0; k < us.size(); ++k) fu[k] = norm_quantile(us[k]);
  for (std::size_t k = 0; k < vs.size(); ++k) fv[k] = norm_quantile(vs[k]);
  return blocked_cross(zx_, zy_, fu, fv, h_, false);
}

std::vector<double> KernelCopula::density_grid(std::span<const double> us,
                                               std::span<const double> vs) const {
  std::vector<double> fu(us.size()), fv(vs.size());
  for (std::size_t k = 0; k < us.size(); ++k) fu[k] = norm_quantile(us[k]);
  for (std::size_t k = 0; k < vs.size(); ++k) fv[k] = norm_quantile(vs[k]);
  std::vector<double> out = blocked_cross(zx_, zy_, fu, fv, h_, true);
  for (std::size_t l = 0; l < fv.size(); ++l)
    for (std::size_t k = 0; k < fu.size(); ++k)
      out[l * fu.size() + k] /=
          2.0 * M_PI * h_ * h_ * norm_pdf(fu[k]) * norm_pdf(fv[l]);
  return out;
}

std::vector<double> KernelCopula::density_at(std::span<const Point> pts) const {
  using Eigen::ArrayXd;
  const std::size_t n = zx_.size();
  ArrayXd ax = Eigen::Map<const ArrayXd>(zx_.data(), n);
  ArrayXd ay = Eigen::Map<const ArrayXd>(zy_.data(), n);
  std::vector<double> out;
  out.reserve(pts.size());
  const double inv_h = 1.0 / h_;
  for (const Point& p : pts) {
    require_interior_query(p.u, p.v);
    double zu = norm_quantile(p.u), zv = norm_quantile(p.v);
    ArrayXd dx = (zu - ax) * inv_h;
    ArrayXd dy = (zv - ay) * inv_h;
    double s = (-0.5 * (dx.square() + dy.square())).exp().sum() / (2.0 * M_PI);
    out.push_back(s / (n * h_ * h_ * norm_pdf(zu) * norm_pdf(zv)));
  }
  return out;
}

}  // namespace dptcop
