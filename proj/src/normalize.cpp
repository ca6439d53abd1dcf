#include "dptcop/normalize.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace dptcop {

GridDensity ipf_normalize(const GridDensity& grid, double tol, int max_iter) {
  if (!(tol > 0.0)) throw usage_error("ipf_normalize: tol must be positive");
  if (max_iter < 1) throw usage_error("ipf_normalize: max_iter must be >= 1");
  GridDensity g = grid;
  const int n = g.size();
  const double target = 1.0 / n;

  for (int it = 0; it < max_iter; ++it) {
    std::vector<double> rs = g.row_sums();
    for (int r = 0; r < n; ++r) {
      if (!(rs[r] > 0.0)) throw data_error("ipf_normalize: zero row mass");
      double f = target / rs[r];
      for (int c = 0; c < n; ++c) g.at(r, c) *= f;
    }
    std::vector<double> cs = g.col_sums();
    for (int c = 0; c < n; ++c) {
      if (!(cs[c] > 0.0)) throw data_error("ipf_normalize: zero column mass");
      double f = target / cs[c];
      for (int r = 0; r < n; ++r) g.at(r, c) *= f;
    }
    // Columns are exact after the sweep; check the rows.
    double dev = 0.0;
    for (double s : g.row_sums()) dev = std::max(dev, std::abs(s - target));
    if (dev < tol) return g;
  }
  throw numeric_error("ipf_normalize: no convergence after " +
                      std::to_string(max_iter) + " sweeps");
}

namespace {

// Fractions of [x0, x1] overlapping each width-1/n grid column.
void overlap_fractions(double x0, double x1, int n, std::vector<int>& idx,
                       std::vector<double>& frac) {
  idx.clear();
  frac.clear();
  double len = x1 - x0;
  if (!(len > 0.0)) return;
  int k0 = std::clamp(static_cast<int>(x0 * n), 0, n - 1);
  int k1 = std::clamp(static_cast<int>(std::nextafter(x1, 0.0) * n), 0, n - 1);
  for (int k = k0; k <= k1; ++k) {
    double lo = std::max(x0, static_cast<double>(k) / n);
    double hi = std::min(x1, static_cast<double>(k + 1) / n);
    if (hi > lo) {
      idx.push_back(k);
      frac.push_back((hi - lo) / len);
    }
  }
}

}  // namespace

GridDensity pit_normalize(const GridDensity& grid) {
  const int n = grid.size();
  std::vector<double> sx = grid.col_sums();
  std::vector<double> sy = grid.row_sums();
  for (int i = 0; i < n; ++i)
    if (!(sx[i] > 0.0) || !(sy[i] > 0.0))
      throw data_error("pit_normalize: degenerate marginal (zero row/col)");

  // Marginal CDF knots; the last knot is pinned to 1 so the image tiles the
  // unit square exactly.
  std::vector<double> fx(n + 1, 0.0), fy(n + 1, 0.0);
  KahanSum kx, ky;
  for (int i = 0; i < n; ++i) {
    kx.add(sx[i]);
    fx[i + 1] = kx.value();
    ky.add(sy[i]);
    fy[i + 1] = ky.value();
  }
  for (int i = 1; i <= n; ++i) {
    fx[i] /= fx[n];
    fy[i] /= fy[n];
  }
  fx[n] = 1.0;
  fy[n] = 1.0;

  GridDensity out(grid.level());
  std::vector<int> ix, iy;
  std::vector<double> wx, wy;
  for (int r = 0; r < n; ++r) {
    overlap_fractions(fy[r], fy[r + 1], n, iy, wy);
    for (int c = 0; c < n; ++c) {
      double m = grid.at(r, c);
      if (m == 0.0) continue;
      overlap_fractions(fx[c], fx[c + 1], n, ix, wx);
      for (std::size_t a = 0; a < iy.size(); ++a)
        for (std::size_t b = 0; b < ix.size(); ++b)
          out.at(iy[a], ix[b]) += m * wy[a] * wx[b];
    }
  }
  return out;
}

}  // namespace dptcop
