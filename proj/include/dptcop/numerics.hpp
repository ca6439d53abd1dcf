#ifndef DPTCOP_NUMERICS_HPP
#define DPTCOP_NUMERICS_HPP

#include <cmath>
#include <cstddef>
#include <functional>
#include <utility>
#include <vector>

#include "dptcop/common.hpp"

namespace dptcop {

inline double norm_pdf(double x) {
  static const double inv_sqrt_2pi = 0.3989422804014326779;
  return inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

inline double norm_cdf(double x) {
  return 0.5 * std::erfc(-x * 0.70710678118654752440);
}

// Inverse standard normal CDF (defined in numerics.cpp via Boost.Math).
double norm_quantile(double p);

// Gauss-Legendre nodes/weights on [-1, 1]; cached per order.
struct GaussLegendre {
  std::vector<double> node;
  std::vector<double> weight;
};
const GaussLegendre& gauss_legendre(int order);

// Integrate f over [a, b] with a fixed-order rule.
double gl_integrate(const std::function<double(double)>& f, double a, double b,
                    int order);

// Derivative-free Nelder-Mead minimizer. Deterministic for a fixed start.
struct NelderMeadResult {
  std::vector<double> x;
  double fmin = 0.0;
  int iterations = 0;
  bool converged = false;
};
NelderMeadResult nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                             std::vector<double> start, double step,
                             double tol = 1e-10, int max_iter = 2000);

// Golden-section maximizer on [lo, hi] for a unimodal objective.
double golden_maximize(const std::function<double(double)>& f, double lo,
                       double hi, double tol = 1e-10);

// Simple ordinary least squares y ~ a + b x.
struct OlsFit {
  double intercept = 0.0;
  double slope = 0.0;
  double r2 = 0.0;
};
OlsFit ols_fit(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace dptcop

#endif
