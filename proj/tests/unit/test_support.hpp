#ifndef DPTCOP_TEST_SUPPORT_HPP
#define DPTCOP_TEST_SUPPORT_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "dptcop/common.hpp"

namespace dptcop::testing {

// Kendall's tau by inversion counting (Knight's algorithm), O(n log n).
inline double kendall_tau(std::span<const Point> pts) {
  const std::size_t n = pts.size();
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (pts[a].u != pts[b].u) return pts[a].u < pts[b].u;
    return pts[a].v < pts[b].v;
  });
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = pts[idx[i]].v;
  // merge sort counting inversions
  std::vector<double> tmp(n);
  std::function<unsigned long long(std::size_t, std::size_t)> rec =
      [&](std::size_t lo, std::size_t hi) -> unsigned long long {
    if (hi - lo < 2) return 0;
    std::size_t mid = (lo + hi) / 2;
    unsigned long long inv = rec(lo, mid) + rec(mid, hi);
    std::size_t a = lo, b = mid, k = lo;
    while (a < mid && b < hi) {
      if (v[a] <= v[b])
        tmp[k++] = v[a++];
      else {
        inv += mid - a;
        tmp[k++] = v[b++];
      }
    }
    while (a < mid) tmp[k++] = v[a++];
    while (b < hi) tmp[k++] = v[b++];
    std::copy(tmp.begin() + lo, tmp.begin() + hi, v.begin() + lo);
    return inv;
  };
  unsigned long long inv = rec(0, n);
  double pairs = 0.5 * static_cast<double>(n) * (n - 1);
  return 1.0 - 2.0 * static_cast<double>(inv) / pairs;
}

// Kolmogorov-Smirnov statistic against Uniform[0,1].
inline double ks_uniform(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    d = std::max(d, std::abs((i + 1) / n - xs[i]));
    d = std::max(d, std::abs(xs[i] - i / n));
  }
  return d;
}

inline double pearson_corr(std::span<const Point> pts) {
  double mu = 0, mv = 0;
  for (const Point& p : pts) {
    mu += p.u;
    mv += p.v;
  }
  mu /= pts.size();
  mv /= pts.size();
  double suv = 0, suu = 0, svv = 0;
  for (const Point& p : pts) {
    suv += (p.u - mu) * (p.v - mv);
    suu += (p.u - mu) * (p.u - mu);
    svv += (p.v - mv) * (p.v - mv);
  }
  return suv / std::sqrt(suu * svv);
}

inline std::vector<Point> random_points(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<Point> pts(n);
  for (auto& p : pts) p = Point{unif(rng), unif(rng)};
  return pts;
}

// Adaptive Simpson integration, used as an independent quadrature oracle.
inline double adaptive_simpson(const std::function<double(double)>& f,
                               double a, double b, double tol = 1e-12,
                               int depth = 30) {
  std::function<double(double, double, double, double, double, double, int)>
      rec = [&](double lo, double hi, double flo, double fmid, double fhi,
                double whole, int d) -> double {
    double mid = 0.5 * (lo + hi);
    double lm = 0.5 * (lo + mid), rm = 0.5 * (mid + hi);
    double flm = f(lm), frm = f(rm);
    double left = (mid - lo) / 6.0 * (flo + 4 * flm + fmid);
    double right = (hi - mid) / 6.0 * (fmid + 4 * frm + fhi);
    if (d <= 0 || std::abs(left + right - whole) < 15 * tol)
      return left + right + (left + right - whole) / 15.0;
    return rec(lo, mid, flo, flm, fmid, left, d - 1) +
           rec(mid, hi, fmid, frm, fhi, right, d - 1);
  };
  double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  double whole = (b - a) / 6.0 * (fa + 4 * fm + fb);
  return rec(a, b, fa, fm, fb, whole, depth);
}

}  // namespace dptcop::testing

#endif
