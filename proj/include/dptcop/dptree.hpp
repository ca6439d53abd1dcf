#ifndef DPTCOP_DPTREE_HPP
#define DPTCOP_DPTREE_HPP

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "dptcop/common.hpp"
#include "dptcop/grid.hpp"

namespace dptcop {

// Per-level Dirichlet hyper-parameter schedule. The canonical choice is
// alpha = m^2 at level m, which keeps the realizations absolutely continuous;
// schedules that grow slower than m^(1+delta) lose that guarantee and are
// flagged by satisfies_continuity().
class HyperSchedule {
 public:
  static HyperSchedule canonical();
  static HyperSchedule scaled_canonical(double z);  // z * m^2
  static HyperSchedule custom(std::function<double(int)> value);

  double value(int level) const;
  bool is_canonical() const { return canonical_; }
  bool satisfies_continuity(int max_level) const;

 private:
  HyperSchedule() = default;
  bool canonical_ = true;
  std::function<double(int)> fn_;
};

enum class PredictiveMode { mean_measure, single_measure };

enum class LevelRegime { lower_bounded, gaussian, generic };

// Binary Polya-tree re-parameterization of one quaternary split: the first
// binary digit separates bottom {0,1} from top {2,3}, the second picks
// within the pair.
struct BinaryPtSplit {
  double pair_bottom, pair_top;  // Beta(a0+a1, a2+a3)
  double bottom_left, bottom_right;  // Beta(a0, a1)
  double top_left, top_right;        // Beta(a2, a3)
};

struct BinaryPtParams {
  int levels;  // quaternary levels
  // splits[m][p]: parameters of the quaternary node p at depth m (root m=0)
  std::vector<std::vector<BinaryPtSplit>> splits;
};

// The D-P tree prior/posterior on the unit square. Counts are real-valued
// (weighted observations) and stored densely per level; node k at level m
// has parent k >> 2. Value semantics: updated() returns a new tree.
class DPTree {
 public:
  DPTree(int max_level, HyperSchedule schedule);

  int max_level() const { return max_level_; }
  const HyperSchedule& schedule() const { return schedule_; }
  double total_weight() const { return total_weight_; }
  double count(int level, std::uint64_t node) const;
  // Posterior Dirichlet parameter schedule(level) + count.
  double posterior_alpha(int level, std::uint64_t node) const;

  DPTree updated(std::span<const Point> points, double weight = 1.0) const;

  GridDensity posterior_mean_grid() const;
  GridDensity sample_measure(std::mt19937_64& rng) const;
  std::vector<Point> sample_predictive(std::mt19937_64& rng, std::size_t n,
                                       PredictiveMode mode) const;
  BinaryPtParams to_binary_pt() const;

 private:
  int max_level_;
  HyperSchedule schedule_;
  double total_weight_ = 0.0;
  std::vector<std::vector<double>> counts_;  // counts_[m-1] has 4^m entries
};

// Posterior-mean grid of the earlier quasi-Polya-tree prior, which ties the
// diagonal digit classes {0,2} and {1,3} together. Hyper-parameters m^2 per
// side at level m, mirroring the canonical D-P tree.
GridDensity quasi_pt_mean_grid(std::span<const Point> points, int max_level);

// Heuristic partition level for a sample size, from the convergence order
// requirements: family regimes need N >= M^2 * 2^(4M), the generic
// point-wise regime N >= M^3. Result clamped to [1, 12].
int suggest_level(long long n, LevelRegime regime);

}  // namespace dptcop

#endif
