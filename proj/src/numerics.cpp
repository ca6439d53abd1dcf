#include "dptcop/numerics.hpp"

#include <algorithm>
#include <map>
#include <mutex>

#include <boost/math/distributions/normal.hpp>

namespace dptcop {

double norm_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw data_error("norm_quantile: p must be in (0,1)");
  static const boost::math::normal_distribution<double> nd(0.0, 1.0);
  return boost::math::quantile(nd, p);
}

// Legendre roots by Newton iteration from the Chebyshev initial guess.
static GaussLegendre compute_gl(int n) {
  GaussLegendre gl;
  gl.node.resize(n);
  gl.weight.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    gl.node[i] = -x;
    gl.node[n - 1 - i] = x;
    double w = 2.0 / ((1.0 - x * x) * dp * dp);
    gl.weight[i] = w;
    gl.weight[n - 1 - i] = w;
  }
  return gl;
}

const GaussLegendre& gauss_legendre(int order) {
  static std::map<int, GaussLegendre> cache;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(order);
  if (it == cache.end()) it = cache.emplace(order, compute_gl(order)).first;
  return it->second;
}

double gl_integrate(const std::function<double(double)>& f, double a, double b,
                    int order) {
  const GaussLegendre& gl = gauss_legendre(order);
  double mid = 0.5 * (a + b);
  double half = 0.5 * (b - a);
  double s = 0.0;
  for (int i = 0; i < order; ++i) s += gl.weight[i] * f(mid + half * gl.node[i]);
  return s * half;
}

NelderMeadResult nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                             std::vector<double> start, double step, double tol,
                             int max_iter) {
  const std::size_t n = start.size();
  std::vector<std::vector<double>> simplex(n + 1, start);
  for (std::size_t i = 0; i < n; ++i) simplex[i + 1][i] += step;
  std::vector<double> fx(n + 1);
  for (std::size_t i = 0; i <= n; ++i) fx[i] = f(simplex[i]);

  NelderMeadResult res;
  int iter = 0;
  for (; iter < max_iter; ++iter) {
    std::vector<std::size_t> ord(n + 1);
    for (std::size_t i = 0; i <= n; ++i) ord[i] = i;
    std::sort(ord.begin(), ord.end(),
              [&](std::size_t a, std::size_t b) { return fx[a] < fx[b]; });
    std::size_t lo = ord[0], hi = ord[n], nh = ord[n - 1];

    double spread = std::abs(fx[hi] - fx[lo]);
    double scale = std::abs(fx[lo]) + std::abs(fx[hi]) + 1e-300;
    if (spread / scale < tol) {
      res.converged = true;
      break;
    }

    std::vector<double> centroid(n, 0.0);
    for (std::size_t i = 0; i <= n; ++i) {
      if (i == hi) continue;
      for (std::size_t d = 0; d < n; ++d) centroid[d] += simplex[i][d] / n;
    }
    auto blend = [&](double t) {
      std::vector<double> x(n);
      for (std::size_t d = 0; d < n; ++d)
        x[d] = centroid[d] + t * (simplex[hi][d] - centroid[d]);
      return x;
    };

    std::vector<double> xr = blend(-1.0);
    double fr = f(xr);
    if (fr < fx[lo]) {
      std::vector<double> xe = blend(-2.0);
      double fe = f(xe);
      if (fe < fr) {
        simplex[hi] = xe;
        fx[hi] = fe;
      } else {
        simplex[hi] = xr;
        fx[hi] = fr;
      }
    } else if (fr < fx[nh]) {
      simplex[hi] = xr;
      fx[hi] = fr;
    } else {
      std::vector<double> xc = blend(fr < fx[hi] ? -0.5 : 0.5);
      double fc = f(xc);
      if (fc < std::min(fr, fx[hi])) {
        simplex[hi] = xc;
        fx[hi] = fc;
      } else {
        for (std::size_t i = 0; i <= n; ++i) {
          if (i == lo) continue;
          for (std::size_t d = 0; d < n; ++d)
            simplex[i][d] = 0.5 * (simplex[i][d] + simplex[lo][d]);
          fx[i] = f(simplex[i]);
        }
      }
    }
  }

  std::size_t best = 0;
  for (std::size_t i = 1; i <= n; ++i)
    if (fx[i] < fx[best]) best = i;
  res.x = simplex[best];
  res.fmin = fx[best];
  res.iterations = iter;
  return res;
}

double golden_maximize(const std::function<double(double)>& f, double lo,
                       double hi, double tol) {
  const double phi = 0.6180339887498949;
  double a = lo, b = hi;
  double x1 = b - phi * (b - a);
  double x2 = a + phi * (b - a);
  double f1 = f(x1), f2 = f(x2);
  while (b - a > tol) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + phi * (b - a);
      f2 = f(x2);
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - phi * (b - a);
      f1 = f(x1);
    }
  }
  return 0.5 * (a + b);
}

OlsFit ols_fit(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw usage_error("ols_fit: need at least two paired observations");
  const std::size_t n = x.size();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  OlsFit fit;
  fit.slope = sxx > 0 ? sxy / sxx : 0.0;
  fit.intercept = my - fit.slope * mx;
  double sse = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double e = y[i] - (fit.intercept + fit.slope * x[i]);
    sse += e * e;
  }
  fit.r2 = syy > 0 ? 1.0 - sse / syy : 1.0;
  return fit;
}

}  // namespace dptcop
