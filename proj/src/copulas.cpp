#include "dptcop/copulas.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <map>
#include <mutex>

#include <boost/math/distributions/gamma.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <boost/math/tools/roots.hpp>

#include "dptcop/csv.hpp"
#include "dptcop/numerics.hpp"
#include "dptcop/rng.hpp"

namespace dptcop {

namespace {

constexpr double kTwoPi = 6.283185307179586477;

double clamp_open01(double x) {
  if (x <= 0.0) return std::nextafter(0.0, 1.0);
  if (x >= 1.0) return std::nextafter(1.0, 0.0);
  return x;
}

void require_interior(double u, double v, const char* who) {
  if (!(u > 0.0 && u < 1.0) || !(v > 0.0 && v < 1.0))
    throw data_error(std::string(who) + ": (u, v) must be interior to (0,1)^2");
}

double log_norm_cdf(double x) {
  if (x > -37.0) return std::log(norm_cdf(x));
  // Asymptotic expansion of Phi in the far left tail.
  double x2 = x * x;
  return -0.5 * x2 - 0.5 * std::log(kTwoPi) - std::log(-x) +
         std::log1p(-1.0 / x2 + 3.0 / (x2 * x2));
}

double t_quantile(double p, double nu) {
  boost::math::students_t_distribution<double> td(nu);
  return boost::math::quantile(td, p);
}

double t_pdf_log(double x, double nu) {
  return std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) -
         0.5 * std::log(nu * M_PI) -
         0.5 * (nu + 1.0) * std::log1p(x * x / nu);
}

double t_cdf(double x, double nu) {
  boost::math::students_t_distribution<double> td(nu);
  return boost::math::cdf(td, x);
}

}  // namespace

double student_t_cdf(double x, double nu) { return t_cdf(x, nu); }
double student_t_quantile(double p, double nu) {
  if (!(p > 0.0 && p < 1.0))
    throw data_error("student_t_quantile: p must be in (0,1)");
  return t_quantile(p, nu);
}

double SkewNormalCopula::abar1() const {
  return (alpha1 + rho * alpha2) /
         std::sqrt(1.0 + alpha2 * alpha2 * (1.0 - rho * rho));
}

double SkewNormalCopula::abar2() const {
  return (alpha2 + rho * alpha1) /
         std::sqrt(1.0 + alpha1 * alpha1 * (1.0 - rho * rho));
}

CopulaModel make_gaussian(double rho) {
  if (!(rho > -1.0 && rho < 1.0))
    throw usage_error("gaussian copula needs rho in (-1, 1)");
  return GaussianCopula{rho};
}

CopulaModel make_student_t(double rho, double nu) {
  if (!(rho > -1.0 && rho < 1.0))
    throw usage_error("t copula needs rho in (-1, 1)");
  if (!(nu > 0.0)) throw usage_error("t copula needs nu > 0");
  return StudentTCopula{rho, nu};
}

CopulaModel make_gumbel(double a) {
  if (!(a >= 1.0)) throw usage_error("gumbel copula needs a >= 1");
  return GumbelCopula{a};
}

CopulaModel make_skew_normal(double rho, double alpha1, double alpha2) {
  if (!(rho > -1.0 && rho < 1.0))
    throw usage_error("skew-normal copula needs rho in (-1, 1)");
  if (!std::isfinite(alpha1) || !std::isfinite(alpha2))
    throw usage_error("skew-normal copula needs finite alpha");
  return SkewNormalCopula{rho, alpha1, alpha2};
}

std::string family_name(const CopulaModel& m) {
  return std::visit(
      [](const auto& c) -> std::string {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, GaussianCopula>) return "gaussian";
        if constexpr (std::is_same_v<T, StudentTCopula>) return "student_t";
        if constexpr (std::is_same_v<T, GumbelCopula>) return "gumbel";
        return "skew_normal";
      },
      m);
}

static std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", x);
  return buf;
}

std::string canonical_key(const CopulaModel& m) {
  return std::visit(
      [](const auto& c) -> std::string {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, GaussianCopula>)
          return "gaussian_rho" + num(c.rho);
        else if constexpr (std::is_same_v<T, StudentTCopula>)
          return "studentt_rho" + num(c.rho) + "_nu" + num(c.nu);
        else if constexpr (std::is_same_v<T, GumbelCopula>)
          return "gumbel_a" + num(c.a);
        else
          return "skewnormal_rho" + num(c.rho) + "_a1" + num(c.alpha1) +
                 "_a2" + num(c.alpha2);
      },
      m);
}

// ---------------------------------------------------------------------------
// Owen's T and the skew-normal marginal

static double owens_t_core(double h, double a) {
  // T(h, a) for h >= 0, 0 <= a <= 1, by Gauss-Legendre on the defining
  // integral; the integrand is analytic so 48 nodes reach ~1e-16.
  if (a == 0.0) return 0.0;
  const GaussLegendre& gl = gauss_legendre(48);
  double half = 0.5 * a;
  double hh = 0.5 * h * h;
  double s = 0.0;
  for (std::size_t i = 0; i < gl.node.size(); ++i) {
    double t = half + half * gl.node[i];
    s += gl.weight[i] * std::exp(-hh * (1.0 + t * t)) / (1.0 + t * t);
  }
  return s * half / kTwoPi;
}

double owens_t(double h, double a) {
  if (a == 0.0 || h == std::numeric_limits<double>::infinity() ||
      h == -std::numeric_limits<double>::infinity())
    return 0.0;
  double sign = a < 0.0 ? -1.0 : 1.0;
  a = std::abs(a);
  h = std::abs(h);
  if (a > 1e7 || std::isinf(a)) return sign * 0.5 * (1.0 - norm_cdf(h));
  if (a <= 1.0) return sign * owens_t_core(h, a);
  // T(h,a) = Phi(h)/2 + Phi(ah)/2 - Phi(h)Phi(ah) - T(ah, 1/a) for h,a >= 0
  double ah = a * h;
  double ph = norm_cdf(h), pah = norm_cdf(ah);
  return sign * (0.5 * (ph + pah) - ph * pah - owens_t_core(ah, 1.0 / a));
}

double sn_marginal_cdf(double x, double alpha_bar) {
  double f = norm_cdf(x) - 2.0 * owens_t(x, alpha_bar);
  return std::clamp(f, 0.0, 1.0);
}

double sn_marginal_quantile(double p, double alpha_bar) {
  if (!(p > 0.0 && p < 1.0))
    throw data_error("sn_marginal_quantile: p must be in (0,1)");
  double lo = -40.0, hi = 40.0;
  int widen = 0;
  while (sn_marginal_cdf(lo, alpha_bar) > p && widen++ < 8) lo *= 1.5;
  while (sn_marginal_cdf(hi, alpha_bar) < p && widen++ < 16) hi *= 1.5;
  auto f = [&](double x) { return sn_marginal_cdf(x, alpha_bar) - p; };
  std::uintmax_t max_iter = 200;
  auto r = boost::math::tools::toms748_solve(
      f, lo, hi, [](double a, double b) { return std::abs(b - a) < 1e-12; },
      max_iter);
  if (max_iter >= 200)
    throw numeric_error("sn_marginal_quantile did not converge (p=" + num(p) +
                        ", alpha=" + num(alpha_bar) + ")");
  return 0.5 * (r.first + r.second);
}

void sn_delta_from_alpha(double rho, double a1, double a2, double& d1,
                         double& d2) {
  double q = std::sqrt(1.0 + a1 * a1 + 2.0 * rho * a1 * a2 + a2 * a2);
  d1 = (a1 + rho * a2) / q;
  d2 = (rho * a1 + a2) / q;
}

void sn_alpha_from_delta(double rho, double d1, double d2, double& a1,
                         double& a2) {
  double om = 1.0 - rho * rho;
  double q = (d1 * d1 - 2.0 * rho * d1 * d2 + d2 * d2) / om;
  if (!(q < 1.0)) throw data_error("sn_alpha_from_delta: delta not admissible");
  double s = std::sqrt(1.0 - q);
  a1 = (d1 - rho * d2) / (om * s);
  a2 = (d2 - rho * d1) / (om * s);
}

// ---------------------------------------------------------------------------
// Bivariate normal CDF

double bvn_cdf(double x, double y, double rho) {
  if (std::isinf(x) || std::isinf(y)) {
    if (x < 0 || y < 0) return 0.0;
    if (std::isinf(x) && std::isinf(y)) return 1.0;
    return std::isinf(x) ? norm_cdf(y) : norm_cdf(x);
  }
  double px = norm_cdf(x), py = norm_cdf(y);
  if (rho == 0.0) return px * py;
  // d/d rho of Phi2 is the bivariate density, so integrate it from 0 to rho.
  auto dens = [&](double r) {
    double omr = 1.0 - r * r;
    return std::exp(-(x * x - 2.0 * r * x * y + y * y) / (2.0 * omr)) /
           (kTwoPi * std::sqrt(omr));
  };
  int order = std::abs(rho) <= 0.95 ? 48 : 128;
  double c = px * py + gl_integrate(dens, 0.0, rho, order);
  double lower = std::max(0.0, px + py - 1.0);
  double upper = std::min(px, py);
  return std::clamp(c, lower, upper);
}

double bvt_cdf(double x, double y, double rho, double nu) {
  if (!(nu > 0.0)) throw usage_error("bvt_cdf: nu must be positive");
  if (std::isinf(x) || std::isinf(y)) {
    if (x < 0 || y < 0) return 0.0;
    if (std::isinf(x) && std::isinf(y)) return 1.0;
    return std::isinf(x) ? t_cdf(y, nu) : t_cdf(x, nu);
  }
  // Mix the conditional Gaussian over the chi-square scale: given W = w,
  // (X, Y) * sqrt(w / nu) is standard bivariate normal.
  boost::math::gamma_distribution<double> chi(0.5 * nu, 2.0);
  const GaussLegendre& gl = gauss_legendre(64);
  double s = 0.0;
  for (std::size_t i = 0; i < gl.node.size(); ++i) {
    double q = 0.5 + 0.5 * gl.node[i];
    double w = boost::math::quantile(chi, q);
    double f = std::sqrt(w / nu);
    s += 0.5 * gl.weight[i] * bvn_cdf(x * f, y * f, rho);
  }
  double lower = std::max(0.0, t_cdf(x, nu) + t_cdf(y, nu) - 1.0);
  double upper = std::min(t_cdf(x, nu), t_cdf(y, nu));
  return std::clamp(s, lower, upper);
}

// ---------------------------------------------------------------------------
// Densities (latent-score forms, shared by the samplers)

static double log_density_gaussian(const GaussianCopula& c, double x,
                                   double y);
static double log_density_student_t(const StudentTCopula& c, double x,
                                    double y);
static double log_density_gumbel(const GumbelCopula& c, double u, double v);
static double log_density_skew_normal(const SkewNormalCopula& c, double x,
                                      double y);

// ---------------------------------------------------------------------------
// Samplers

static void sample_gaussian(const GaussianCopula& c, std::mt19937_64& rng,
                            std::size_t n, std::vector<Point>& out,
                            std::vector<double>* logc) {
  double s = std::sqrt(1.0 - c.rho * c.rho);
  for (std::size_t i = 0; i < n; ++i) {
    double z1 = standard_normal(rng);
    double z2 = standard_normal(rng);
    double x = z1;
    double y = c.rho * z1 + s * z2;
    out.push_back(Point{clamp_open01(norm_cdf(x)), clamp_open01(norm_cdf(y))});
    if (logc) logc->push_back(log_density_gaussian(c, x, y));
  }
}

static void sample_student_t(const StudentTCopula& c, std::mt19937_64& rng,
                             std::size_t n, std::vector<Point>& out,
                             std::vector<double>* logc) {
  double s = std::sqrt(1.0 - c.rho * c.rho);
  for (std::size_t i = 0; i < n; ++i) {
    double z1 = standard_normal(rng);
    double z2 = standard_normal(rng);
    double w = 2.0 * gamma_draw(rng, 0.5 * c.nu);  // chi^2_nu
    double f = std::sqrt(c.nu / w);
    double x = z1 * f;
    double y = (c.rho * z1 + s * z2) * f;
    out.push_back(
        Point{clamp_open01(t_cdf(x, c.nu)), clamp_open01(t_cdf(y, c.nu))});
    if (logc) logc->push_back(log_density_student_t(c, x, y));
  }
}

static void sample_gumbel(const GumbelCopula& c, std::mt19937_64& rng,
                          std::size_t n, std::vector<Point>& out,
                          std::vector<double>* logc) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::exponential_distribution<double> expo(1.0);
  if (c.a == 1.0) {
    for (std::size_t i = 0; i < n; ++i) {
      out.push_back(Point{clamp_open01(unif(rng)), clamp_open01(unif(rng))});
      if (logc) logc->push_back(0.0);
    }
    return;
  }
  double g = 1.0 / c.a;  // stable index in (0, 1)
  for (std::size_t i = 0; i < n; ++i) {
    // Kanter's representation of the positive stable law with LT exp(-s^g).
    double theta = M_PI * unif(rng);
    double w = expo(rng);
    double log_a = std::log(std::sin((1.0 - g) * theta)) +
                   (g / (1.0 - g)) * std::log(std::sin(g * theta)) -
                   (1.0 / (1.0 - g)) * std::log(std::sin(theta));
    double log_s = ((1.0 - g) / g) * (log_a - std::log(w));
    double e1 = expo(rng), e2 = expo(rng);
    double u = clamp_open01(std::exp(-std::exp(g * (std::log(e1) - log_s))));
    double v = clamp_open01(std::exp(-std::exp(g * (std::log(e2) - log_s))));
    out.push_back(Point{u, v});
    if (logc) logc->push_back(log_density_gumbel(c, u, v));
  }
}

static void sample_skew_normal(const SkewNormalCopula& c, std::mt19937_64& rng,
                               std::size_t n, std::vector<Point>& out,
                               std::vector<double>* logc) {
  double d1, d2;
  sn_delta_from_alpha(c.rho, c.alpha1, c.alpha2, d1, d2);
  // Cholesky of [[1, d1, d2], [d1, 1, rho], [d2, rho, 1]].
  double l22 = std::sqrt(1.0 - d1 * d1);
  double l32 = (c.rho - d1 * d2) / l22;
  double l33sq = 1.0 - d2 * d2 - l32 * l32;
  if (!(l33sq > 0.0))
    throw data_error("skew-normal parameters give a singular augmented matrix");
  double l33 = std::sqrt(l33sq);
  double ab1 = c.abar1(), ab2 = c.abar2();
  for (std::size_t i = 0; i < n; ++i) {
    double e0 = standard_normal(rng);
    double e1 = standard_normal(rng);
    double e2 = standard_normal(rng);
    double z1 = d1 * e0 + l22 * e1;
    double z2 = d2 * e0 + l32 * e1 + l33 * e2;
    if (e0 <= 0.0) {
      z1 = -z1;
      z2 = -z2;
    }
    out.push_back(Point{clamp_open01(sn_marginal_cdf(z1, ab1)),
                        clamp_open01(sn_marginal_cdf(z2, ab2))});
    if (logc) logc->push_back(log_density_skew_normal(c, z1, z2));
  }
}

static void sample_impl(const CopulaModel& m, std::mt19937_64& rng,
                        std::size_t n, std::vector<Point>& out,
                        std::vector<double>* logc) {
  std::visit(
      [&](const auto& c) {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, GaussianCopula>)
          sample_gaussian(c, rng, n, out, logc);
        else if constexpr (std::is_same_v<T, StudentTCopula>)
          sample_student_t(c, rng, n, out, logc);
        else if constexpr (std::is_same_v<T, GumbelCopula>)
          sample_gumbel(c, rng, n, out, logc);
        else
          sample_skew_normal(c, rng, n, out, logc);
      },
      m);
}

std::vector<Point> sample(const CopulaModel& m, std::mt19937_64& rng,
                          std::size_t n) {
  std::vector<Point> out;
  out.reserve(n);
  sample_impl(m, rng, n, out, nullptr);
  return out;
}

std::vector<Point> sample_with_log_density(const CopulaModel& m,
                                           std::mt19937_64& rng, std::size_t n,
                                           std::vector<double>& log_c) {
  std::vector<Point> out;
  out.reserve(n);
  log_c.clear();
  log_c.reserve(n);
  sample_impl(m, rng, n, out, &log_c);
  return out;
}

// ---------------------------------------------------------------------------
// Densities

static double log_density_gaussian(const GaussianCopula& c, double x,
                                   double y) {
  double omr = 1.0 - c.rho * c.rho;
  return -0.5 * std::log(omr) -
         (c.rho * c.rho * (x * x + y * y) - 2.0 * c.rho * x * y) / (2.0 * omr);
}

static double log_density_student_t(const StudentTCopula& c, double x,
                                    double y) {
  double omr = 1.0 - c.rho * c.rho;
  double q = (x * x + y * y - 2.0 * c.rho * x * y) / (c.nu * omr);
  return std::lgamma(0.5 * (c.nu + 2.0)) - std::lgamma(0.5 * c.nu) -
         std::log(c.nu * M_PI) - 0.5 * std::log(omr) -
         0.5 * (c.nu + 2.0) * std::log1p(q) - t_pdf_log(x, c.nu) -
         t_pdf_log(y, c.nu);
}

static double log_density_gumbel(const GumbelCopula& c, double u, double v) {
  if (c.a == 1.0) return 0.0;
  double lu = -std::log(u), lv = -std::log(v);
  double s = std::pow(lu, c.a) + std::pow(lv, c.a);
  double s_inv_a = std::pow(s, 1.0 / c.a);
  return -s_inv_a - std::log(u) - std::log(v) +
         (-2.0 + 2.0 / c.a) * std::log(s) +
         (c.a - 1.0) * (std::log(lu) + std::log(lv)) +
         std::log1p((c.a - 1.0) / s_inv_a);
}

static double log_density_skew_normal(const SkewNormalCopula& c, double x,
                                      double y) {
  double omr = 1.0 - c.rho * c.rho;
  double log_phi2 = -std::log(kTwoPi) - 0.5 * std::log(omr) -
                    (x * x - 2.0 * c.rho * x * y + y * y) / (2.0 * omr);
  // minus the two marginal log densities log(2 phi Phi), keeping one log 2
  return log_phi2 + log_norm_cdf(c.alpha1 * x + c.alpha2 * y) - std::log(2.0) +
         0.5 * (x * x + y * y) + std::log(kTwoPi) -
         log_norm_cdf(c.abar1() * x) - log_norm_cdf(c.abar2() * y);
}

double log_density(const CopulaModel& m, double u, double v) {
  require_interior(u, v, "density");
  return std::visit(
      [&](const auto& c) -> double {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, GaussianCopula>) {
          return log_density_gaussian(c, norm_quantile(u), norm_quantile(v));
        } else if constexpr (std::is_same_v<T, StudentTCopula>) {
          return log_density_student_t(c, t_quantile(u, c.nu),
                                       t_quantile(v, c.nu));
        } else if constexpr (std::is_same_v<T, GumbelCopula>) {
          return log_density_gumbel(c, u, v);
        } else {
          double x = sn_marginal_quantile(u, c.abar1());
          double y = sn_marginal_quantile(v, c.abar2());
          return log_density_skew_normal(c, x, y);
        }
      },
      m);
}

double density(const CopulaModel& m, double u, double v) {
  return std::exp(log_density(m, u, v));
}

std::vector<double> density_grid(const CopulaModel& m,
                                 std::span<const double> us,
                                 std::span<const double> vs) {
  const std::size_t gu = us.size(), gv = vs.size();
  std::vector<double> out(gu * gv);
  std::visit(
      [&](const auto& c) {
        using T = std::decay_t<decltype(c)>;
        std::vector<double> xs(gu), ys(gv);
        if constexpr (std::is_same_v<T, GaussianCopula>) {
          for (std::size_t i = 0; i < gu; ++i) xs[i] = norm_quantile(us[i]);
          for (std::size_t j = 0; j < gv; ++j) ys[j] = norm_quantile(vs[j]);
          for (std::size_t j = 0; j < gv; ++j)
            for (std::size_t i = 0; i < gu; ++i)
              out[j * gu + i] = std::exp(log_density_gaussian(c, xs[i], ys[j]));
        } else if constexpr (std::is_same_v<T, StudentTCopula>) {
          for (std::size_t i = 0; i < gu; ++i) xs[i] = t_quantile(us[i], c.nu);
          for (std::size_t j = 0; j < gv; ++j) ys[j] = t_quantile(vs[j], c.nu);
          for (std::size_t j = 0; j < gv; ++j)
            for (std::size_t i = 0; i < gu; ++i)
              out[j * gu + i] =
                  std::exp(log_density_student_t(c, xs[i], ys[j]));
        } else if constexpr (std::is_same_v<T, GumbelCopula>) {
          for (std::size_t j = 0; j < gv; ++j)
            for (std::size_t i = 0; i < gu; ++i)
              out[j * gu + i] = std::exp(log_density_gumbel(c, us[i], vs[j]));
        } else {
          double ab1 = c.abar1(), ab2 = c.abar2();
          for (std::size_t i = 0; i < gu; ++i)
            xs[i] = sn_marginal_quantile(us[i], ab1);
          for (std::size_t j = 0; j < gv; ++j)
            ys[j] = sn_marginal_quantile(vs[j], ab2);
          for (std::size_t j = 0; j < gv; ++j)
            for (std::size_t i = 0; i < gu; ++i)
              out[j * gu + i] =
                  std::exp(log_density_skew_normal(c, xs[i], ys[j]));
        }
      },
      m);
  return out;
}

// ---------------------------------------------------------------------------
// Oracle grids and the CDF dispatcher

CdfOracleGrid CdfOracleGrid::build(const CopulaModel& m, std::size_t samples,
                                   int cells, std::uint64_t seed) {
  if (cells < 2 || (cells & (cells - 1)) != 0)
    throw usage_error("oracle grid cell count must be a power of two");
  if (samples < 1000) throw usage_error("oracle grid needs at least 1e3 samples");
  CdfOracleGrid g;
  g.cells_ = cells;
  g.samples_ = samples;
  std::vector<std::uint64_t> bin(static_cast<std::size_t>(cells) * cells, 0);
  std::mt19937_64 rng = make_rng(seed);
  const std::size_t chunk = 100000;
  std::size_t done = 0;
  while (done < samples) {
    std::size_t take = std::min(chunk, samples - done);
    std::vector<Point> pts = sample(m, rng, take);
    for (const Point& p : pts) {
      auto c = static_cast<std::size_t>(p.u * cells);
      auto r = static_cast<std::size_t>(p.v * cells);
      if (c >= static_cast<std::size_t>(cells)) c = cells - 1;
      if (r >= static_cast<std::size_t>(cells)) r = cells - 1;
      ++bin[r * cells + c];
    }
    done += take;
  }
  int n = cells;
  g.node_.assign(static_cast<std::size_t>(n + 1) * (n + 1), 0.0);
  std::vector<std::uint64_t> pref(static_cast<std::size_t>(n + 1) * (n + 1), 0);
  for (int r = 1; r <= n; ++r) {
    std::uint64_t rowacc = 0;
    for (int c = 1; c <= n; ++c) {
      rowacc += bin[static_cast<std::size_t>(r - 1) * n + (c - 1)];
      pref[static_cast<std::size_t>(r) * (n + 1) + c] =
          pref[static_cast<std::size_t>(r - 1) * (n + 1) + c] + rowacc;
    }
  }
  for (std::size_t i = 0; i < g.node_.size(); ++i)
    g.node_[i] = static_cast<double>(pref[i]) / static_cast<double>(samples);
  return g;
}

double CdfOracleGrid::at_node(int i, int j) const {
  return node_[static_cast<std::size_t>(i) * (cells_ + 1) + j];
}

double CdfOracleGrid::operator()(double u, double v) const {
  if (!(u >= 0.0 && u <= 1.0) || !(v >= 0.0 && v <= 1.0))
    throw data_error("oracle cdf outside the unit square");
  int n = cells_;
  double x = u * n, y = v * n;
  int cx = std::min(static_cast<int>(x), n - 1);
  int cy = std::min(static_cast<int>(y), n - 1);
  double fx = x - cx, fy = y - cy;
  double a = at_node(cy, cx), b = at_node(cy, cx + 1);
  double c = at_node(cy + 1, cx), d = at_node(cy + 1, cx + 1);
  return (1 - fy) * ((1 - fx) * a + fx * b) + fy * ((1 - fx) * c + fx * d);
}

std::vector<double> CdfOracleGrid::cell_masses(int level) const {
  int side = 1 << level;
  if (cells_ % side != 0)
    throw usage_error("oracle grid does not refine the requested level");
  int k = cells_ / side;
  std::vector<double> mass(static_cast<std::size_t>(side) * side);
  for (int r = 0; r < side; ++r)
    for (int c = 0; c < side; ++c)
      mass[static_cast<std::size_t>(r) * side + c] =
          at_node((r + 1) * k, (c + 1) * k) - at_node(r * k, (c + 1) * k) -
          at_node((r + 1) * k, c * k) + at_node(r * k, c * k);
  return mass;
}

void CdfOracleGrid::save_csv(const std::string& path) const {
  std::vector<std::vector<std::string>> rows;
  int n = cells_;
  rows.reserve(static_cast<std::size_t>(n + 1) * (n + 1));
  for (int i = 0; i <= n; ++i)
    for (int j = 0; j <= n; ++j)
      rows.push_back({format_double(static_cast<double>(j) / n),
                      format_double(static_cast<double>(i) / n),
                      format_double(at_node(i, j))});
  write_csv(path, {"u", "v", "C"}, rows);
}

CdfOracleGrid CdfOracleGrid::load_csv(const std::string& path) {
  CsvTable t = read_csv(path);
  int cu = t.column("u"), cv = t.column("v"), cc = t.column("C");
  if (cu < 0 || cv < 0 || cc < 0)
    throw data_error(path + ": expected header u,v,C");
  auto nodes = t.rows.size();
  int n = static_cast<int>(std::llround(std::sqrt(static_cast<double>(nodes)))) - 1;
  if (static_cast<std::size_t>(n + 1) * (n + 1) != nodes)
    throw data_error(path + ": row count is not a square grid");
  CdfOracleGrid g;
  g.cells_ = n;
  g.samples_ = 0;
  g.node_.assign(nodes, 0.0);
  for (const auto& row : t.rows) {
    double u = parse_double(row[cu], path);
    double v = parse_double(row[cv], path);
    double c = parse_double(row[cc], path);
    int j = static_cast<int>(std::llround(u * n));
    int i = static_cast<int>(std::llround(v * n));
    g.node_[static_cast<std::size_t>(i) * (n + 1) + j] = c;
  }
  return g;
}

static std::string g_cache_dir = "oracle_cache";
static std::mutex g_cache_mutex;

void set_oracle_cache_dir(const std::string& dir) {
  std::lock_guard<std::mutex> lock(g_cache_mutex);
  g_cache_dir = dir;
}

std::string oracle_cache_dir() {
  std::lock_guard<std::mutex> lock(g_cache_mutex);
  return g_cache_dir;
}

CopulaCdf::CopulaCdf(CopulaModel m, double tol, const std::string& cache_dir,
                     std::size_t oracle_samples, int oracle_cells,
                     std::uint64_t oracle_seed)
    : model_(std::move(m)), tol_(tol) {
  if (!(tol > 0.0)) throw usage_error("cdf tolerance must be positive");
  bool needs_grid = std::holds_alternative<StudentTCopula>(model_) ||
                    std::holds_alternative<SkewNormalCopula>(model_);
  if (!needs_grid) return;
  namespace fs = std::filesystem;
  fs::create_directories(cache_dir);
  std::string file = cache_dir + "/" + canonical_key(model_) + "_cells" +
                     std::to_string(oracle_cells) + "_n" +
                     std::to_string(oracle_samples) + "_seed" +
                     std::to_string(oracle_seed) + ".csv";
  if (fs::exists(file)) {
    grid_ = std::make_shared<CdfOracleGrid>(CdfOracleGrid::load_csv(file));
    return;
  }
  auto grid = std::make_shared<CdfOracleGrid>(
      CdfOracleGrid::build(model_, oracle_samples, oracle_cells, oracle_seed));
  std::string tmp = file + ".tmp";
  grid->save_csv(tmp);
  fs::rename(tmp, file);
  grid_ = std::move(grid);
}

double CopulaCdf::operator()(double u, double v) const {
  if (!(u >= 0.0 && u <= 1.0) || !(v >= 0.0 && v <= 1.0))
    throw data_error("cdf: (u, v) must lie in the unit square");
  if (u == 0.0 || v == 0.0) return 0.0;
  if (u == 1.0) return v;
  if (v == 1.0) return u;
  if (const auto* g = std::get_if<GaussianCopula>(&model_))
    return bvn_cdf(norm_quantile(u), norm_quantile(v), g->rho);
  if (const auto* gc = std::get_if<GumbelCopula>(&model_)) {
    if (gc->a == 1.0) return u * v;
    double s = std::pow(-std::log(u), gc->a) + std::pow(-std::log(v), gc->a);
    return std::exp(-std::pow(s, 1.0 / gc->a));
  }
  return (*grid_)(u, v);
}

double cdf(const CopulaModel& m, double u, double v, double tol) {
  if (!(tol > 0.0)) throw usage_error("cdf tolerance must be positive");
  static std::map<std::string, std::shared_ptr<CopulaCdf>> cache;
  static std::mutex mu;
  std::shared_ptr<CopulaCdf> eval;
  {
    std::lock_guard<std::mutex> lock(mu);
    std::string key = canonical_key(m);
    auto it = cache.find(key);
    if (it == cache.end()) {
      eval = std::make_shared<CopulaCdf>(m, tol, oracle_cache_dir());
      cache.emplace(key, eval);
    } else {
      eval = it->second;
    }
  }
  return (*eval)(u, v);
}

}  // namespace dptcop
