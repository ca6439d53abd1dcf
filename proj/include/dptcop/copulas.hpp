#ifndef DPTCOP_COPULAS_HPP
#define DPTCOP_COPULAS_HPP

#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "dptcop/common.hpp"

namespace dptcop {

struct GaussianCopula {
  double rho;
};

struct StudentTCopula {
  double rho;
  double nu;
};

struct GumbelCopula {
  double a;
};

struct SkewNormalCopula {
  double rho;
  double alpha1;
  double alpha2;
  // Marginal skewness parameters of the two coordinates.
  double abar1() const;
  double abar2() const;
};

using CopulaModel =
    std::variant<GaussianCopula, StudentTCopula, GumbelCopula, SkewNormalCopula>;

// Validating constructors.
CopulaModel make_gaussian(double rho);
CopulaModel make_student_t(double rho, double nu);
CopulaModel make_gumbel(double a);
CopulaModel make_skew_normal(double rho, double alpha1, double alpha2);

std::string family_name(const CopulaModel& m);
// Stable parameter string, used to key oracle-grid cache files.
std::string canonical_key(const CopulaModel& m);

std::vector<Point> sample(const CopulaModel& m, std::mt19937_64& rng,
                          std::size_t n);

// Copula density at an interior point; u or v on {0,1} is a data error
// because several families diverge there.
double density(const CopulaModel& m, double u, double v);
double log_density(const CopulaModel& m, double u, double v);

// Owen's T function T(h, a).
double owens_t(double h, double a);

// Standard bivariate normal CDF P(X <= x, Y <= y) with correlation rho.
double bvn_cdf(double x, double y, double rho);

// Bivariate Student-t CDF via quadrature over the chi-square mixing variable;
// used where fitted (rho, nu) vary continuously and an oracle grid per
// parameter set would be impractical.
double bvt_cdf(double x, double y, double rho, double nu);

// Draw n points and return log c at each draw, computed from the latent
// scores so no quantile inversion is needed.
std::vector<Point> sample_with_log_density(const CopulaModel& m,
                                           std::mt19937_64& rng, std::size_t n,
                                           std::vector<double>& log_c);

// Truth density evaluated on a product grid (values[iv * us.size() + iu]);
// the axis quantile transforms are computed once per axis.
std::vector<double> density_grid(const CopulaModel& m,
                                 std::span<const double> us,
                                 std::span<const double> vs);

// Skew-normal SN1(1, alpha) marginal CDF and its inverse.
double sn_marginal_cdf(double x, double alpha_bar);
double sn_marginal_quantile(double p, double alpha_bar);

// Student-t marginal helpers (thin wrappers over Boost.Math).
double student_t_cdf(double x, double nu);
double student_t_quantile(double p, double nu);

// delta <-> alpha maps for the bivariate skew-normal with correlation rho.
void sn_delta_from_alpha(double rho, double a1, double a2, double& d1,
                         double& d2);
void sn_alpha_from_delta(double rho, double d1, double d2, double& a1,
                         double& a2);

// Empirical CDF of the copula on a regular node grid, built once from a large
// seeded Monte Carlo sample; used for the families without a tractable CDF.
// Nodes sit at (i/n, j/n) for i,j in [0, n].
class CdfOracleGrid {
 public:
  static CdfOracleGrid build(const CopulaModel& m, std::size_t samples,
                             int cells, std::uint64_t seed);
  static CdfOracleGrid load_csv(const std::string& path);
  void save_csv(const std::string& path) const;

  int cells() const { return cells_; }
  std::size_t samples() const { return samples_; }
  double at_node(int i, int j) const;          // C(i/n, j/n)
  double operator()(double u, double v) const;  // bilinear between nodes

  // Aggregate to exact cell masses of the level-M dyadic grid; requires
  // cells() divisible by 2^M.
  std::vector<double> cell_masses(int level) const;

 private:
  int cells_ = 0;
  std::size_t samples_ = 0;
  std::vector<double> node_;
};

// Resolves the CDF route per family: closed form for Gumbel, quadrature for
// Gaussian, oracle grid for Student's t and skew-normal. Oracle grids are
// cached on disk under cache_dir and shared; populate before parallel use.
class CopulaCdf {
 public:
  CopulaCdf(CopulaModel m, double tol, const std::string& cache_dir,
            std::size_t oracle_samples = 10'000'000, int oracle_cells = 1024,
            std::uint64_t oracle_seed = 0x0c0ffee5);
  double operator()(double u, double v) const;
  const CdfOracleGrid* oracle() const { return grid_.get(); }

 private:
  CopulaModel model_;
  double tol_;
  std::shared_ptr<const CdfOracleGrid> grid_;
};

// One-shot convenience wrapper around CopulaCdf with a process-wide cache.
double cdf(const CopulaModel& m, double u, double v, double tol);

// Directory used by the process-wide oracle cache (default "oracle_cache").
void set_oracle_cache_dir(const std::string& dir);
std::string oracle_cache_dir();

}  // namespace dptcop

#endif
