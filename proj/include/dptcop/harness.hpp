#ifndef DPTCOP_HARNESS_HPP
#define DPTCOP_HARNESS_HPP

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "dptcop/copulas.hpp"
#include "dptcop/metrics.hpp"
#include "dptcop/numerics.hpp"

namespace dptcop {

// Run fn(0..count-1) on a small worker pool. Tasks write into preallocated
// slots keyed by index, so output never depends on scheduling.
void parallel_for(std::size_t count, int threads,
                  const std::function<void(std::size_t)>& fn);

enum class GridNormalization { none, ipf, pit };

struct KlTableConfig {
  std::vector<CopulaModel> families;
  std::vector<std::size_t> sample_sizes;  // may include 0 (prior only)
  int level = 10;
  int draws = 200;              // posterior measures per cell
  std::size_t kl_points = 20000;  // truth draws behind each K-L average
  int datasets = 1;             // datasets per cell
};

struct KlCellResult {
  std::string family;
  std::size_t n = 0;
  int dataset = 0;
  double mean_kl = 0.0;
  double sd_kl = 0.0;  // across posterior draws
  int draws = 0;
};

std::vector<KlCellResult> run_kl_table(const KlTableConfig& cfg,
                                       std::uint64_t seed, int threads);

void write_kl_rows(const std::string& path,
                   const std::vector<KlCellResult>& rows);
// One line per family: mean columns by N, then sd columns by N.
void write_kl_pivot(const std::string& path,
                    const std::vector<KlCellResult>& rows);

struct FreqComparisonConfig {
  CopulaModel family = GaussianCopula{0.5};
  std::vector<std::size_t> sample_sizes;
  int level = 8;
  int replications = 25;
  std::size_t kl_points = 10000;
  int quad_grid = 512;  // midpoint grid for MISE and MISE_C
  GridNormalization normalization = GridNormalization::none;
  std::size_t oracle_samples = 4'000'000;
  int oracle_cells = 1024;
  std::uint64_t oracle_seed = 0x0c0ffee5;
  std::string cache_dir = "oracle_cache";
};

// The four-estimator comparison grid (D-P tree mean, empirical, kernel,
// histogram) with K-L, MISE, MISE_C and MSE_g columns; empirical K-L is NA
// and histogram K-L is Inf by construction.
std::vector<MetricRow> run_freq_comparison(const FreqComparisonConfig& cfg,
                                           std::uint64_t seed, int threads);

// Pivot of replication-averaged values: sqrt for mise/mise_c/mse_g columns.
void write_freq_pivot(const std::string& path,
                      const std::vector<MetricRow>& rows);

struct ConvergenceFit {
  OlsFit linlog;  // KL ~ log N
  OlsFit loglog;  // log KL ~ log N
  std::size_t points = 0;
};

// Regression of mean K-L on sample size over the finite, positive-N cells.
ConvergenceFit run_convergence_fit(
    const std::vector<std::pair<double, double>>& n_and_kl);

void write_convergence_summary(const std::string& path,
                               const std::vector<std::pair<std::string, ConvergenceFit>>& fits);

}  // namespace dptcop

#endif
