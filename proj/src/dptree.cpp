#include "dptcop/dptree.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

#include "dptcop/partition.hpp"
#include "dptcop/rng.hpp"

namespace dptcop {

HyperSchedule HyperSchedule::canonical() { return HyperSchedule(); }

HyperSchedule HyperSchedule::scaled_canonical(double z) {
  if (!(z > 0.0)) throw usage_error("schedule scale must be positive");
  HyperSchedule s;
  s.canonical_ = false;
  s.fn_ = [z](int m) { return z * m * m; };
  return s;
}

HyperSchedule HyperSchedule::custom(std::function<double(int)> value) {
  HyperSchedule s;
  s.canonical_ = false;
  s.fn_ = std::move(value);
  return s;
}

double HyperSchedule::value(int level) const {
  if (level < 1) throw usage_error("schedule level must be >= 1");
  double a = canonical_ ? static_cast<double>(level) * level : fn_(level);
  if (!(a > 0.0))
    throw usage_error("schedule value must be positive at level " +
                      std::to_string(level));
  return a;
}

bool HyperSchedule::satisfies_continuity(int max_level) const {
  // alpha must grow like m^(1+delta): require value(m+1)/value(m) to beat
  // the linear ratio (m+1)/m strictly.
  for (int m = 1; m < max_level; ++m) {
    double r = value(m + 1) / value(m);
    double lin = static_cast<double>(m + 1) / m;
    if (r <= lin * (1.0 + 1e-12)) return false;
  }
  return true;
}

DPTree::DPTree(int max_level, HyperSchedule schedule)
    : max_level_(max_level), schedule_(std::move(schedule)) {
  if (max_level < 1 || max_level > 12)
    throw usage_error("tree level must be in [1, 12], got " +
                      std::to_string(max_level));
  counts_.resize(max_level);
  for (int m = 1; m <= max_level; ++m)
    counts_[m - 1].assign(std::size_t{1} << (2 * m), 0.0);
  if (!schedule_.satisfies_continuity(max_level))
    std::cerr << "dptcop: warning: hyper-parameter schedule grows slower than "
                 "m^(1+delta); realizations need not be absolutely continuous\n";
}

double DPTree::count(int level, std::uint64_t node) const {
  if (level < 1 || level > max_level_)
    throw usage_error("count: level out of range");
  return counts_[level - 1].at(node);
}

double DPTree::posterior_alpha(int level, std::uint64_t node) const {
  return schedule_.value(level) + count(level, node);
}

DPTree DPTree::updated(std::span<const Point> points, double weight) const {
  if (!(weight > 0.0)) throw usage_error("update weight must be positive");
  DPTree t(*this);
  for (const Point& p : points) {
    std::uint64_t node = locate_node(p.u, p.v, max_level_);
    for (int m = max_level_; m >= 1; --m) {
      t.counts_[m - 1][node] += weight;
      node >>= 2;
    }
    t.total_weight_ += weight;
  }
  return t;
}

GridDensity DPTree::posterior_mean_grid() const {
  std::vector<double> prev{1.0};
  for (int m = 1; m <= max_level_; ++m) {
    double am = schedule_.value(m);
    const std::vector<double>& cnt = counts_[m - 1];
    std::vector<double> cur(cnt.size());
    std::size_t parents = cnt.size() >> 2;
    for (std::size_t p = 0; p < parents; ++p) {
      double parent_count = (m == 1) ? total_weight_ : counts_[m - 2][p];
      double denom = 4.0 * am + parent_count;
      for (int i = 0; i < 4; ++i) {
        std::size_t c = (p << 2) | i;
        cur[c] = prev[p] * (am + cnt[c]) / denom;
      }
    }
    prev = std::move(cur);
  }
  GridDensity g(max_level_);
  for (std::size_t node = 0; node < prev.size(); ++node) {
    GridCoord gc = node_to_grid(node, max_level_);
    g.at(gc.row, gc.col) = prev[node];
  }
  g.normalize();
  return g;
}

GridDensity DPTree::sample_measure(std::mt19937_64& rng) const {
  std::vector<double> prev{1.0};
  for (int m = 1; m <= max_level_; ++m) {
    double am = schedule_.value(m);
    const std::vector<double>& cnt = counts_[m - 1];
    std::vector<double> cur(cnt.size());
    std::size_t parents = cnt.size() >> 2;
    for (std::size_t p = 0; p < parents; ++p) {
      std::array<double, 4> alpha;
      for (int i = 0; i < 4; ++i) alpha[i] = am + cnt[(p << 2) | i];
      std::array<double, 4> z = dirichlet4(rng, alpha);
      for (int i = 0; i < 4; ++i) cur[(p << 2) | i] = prev[p] * z[i];
    }
    prev = std::move(cur);
  }
  GridDensity g(max_level_);
  for (std::size_t node = 0; node < prev.size(); ++node) {
    GridCoord gc = node_to_grid(node, max_level_);
    g.at(gc.row, gc.col) = prev[node];
  }
  g.normalize();
  return g;
}

std::vector<Point> DPTree::sample_predictive(std::mt19937_64& rng,
                                             std::size_t n,
                                             PredictiveMode mode) const {
  if (n < 1) throw usage_error("sample_predictive: n must be >= 1");
  std::vector<Point> out;
  out.reserve(n);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  if (mode == PredictiveMode::mean_measure) {
    for (std::size_t k = 0; k < n; ++k) {
      std::uint64_t node = 0;
      for (int m = 1; m <= max_level_; ++m) {
        double am = schedule_.value(m);
        double parent_count =
            (m == 1) ? total_weight_ : counts_[m - 2][node];
        double denom = 4.0 * am + parent_count;
        double target = unif(rng) * denom;
        double acc = 0.0;
        int pick = 3;
        for (int i = 0; i < 4; ++i) {
          acc += am + counts_[m - 1][(node << 2) | i];
          if (target < acc) {
            pick = i;
            break;
          }
        }
        node = (node << 2) | pick;
      }
      GridCoord gc = node_to_grid(node, max_level_);
      double scale = std::ldexp(1.0, -max_level_);
      out.push_back(Point{(gc.col + unif(rng)) * scale,
                          (gc.row + unif(rng)) * scale});
    }
    return out;
  }

  // single_measure: one posterior draw, then i.i.d. points from it.
  GridDensity g = sample_measure(rng);
  const std::vector<double>& mass = g.masses();
  std::vector<double> cum(mass.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < mass.size(); ++i) {
    acc += mass[i];
    cum[i] = acc;
  }
  cum.back() = 1.0;
  int n_side = g.size();
  double scale = 1.0 / n_side;
  for (std::size_t k = 0; k < n; ++k) {
    double target = unif(rng);
    std::size_t flat =
        std::lower_bound(cum.begin(), cum.end(), target) - cum.begin();
    if (flat >= mass.size()) flat = mass.size() - 1;
    std::uint64_t row = flat / n_side;
    std::uint64_t col = flat % n_side;
    out.push_back(Point{(col + unif(rng)) * scale, (row + unif(rng)) * scale});
  }
  return out;
}

BinaryPtParams DPTree::to_binary_pt() const {
  BinaryPtParams bp;
  bp.levels = max_level_;
  bp.splits.resize(max_level_);
  for (int m = 1; m <= max_level_; ++m) {
    double am = schedule_.value(m);
    const std::vector<double>& cnt = counts_[m - 1];
    std::size_t parents = cnt.size() >> 2;
    bp.splits[m - 1].resize(parents);
    for (std::size_t p = 0; p < parents; ++p) {
      double a0 = am + cnt[(p << 2) | 0];
      double a1 = am + cnt[(p << 2) | 1];
      double a2 = am + cnt[(p << 2) | 2];
      double a3 = am + cnt[(p << 2) | 3];
      bp.splits[m - 1][p] =
          BinaryPtSplit{a0 + a1, a2 + a3, a0, a1, a2, a3};
    }
  }
  return bp;
}

GridDensity quasi_pt_mean_grid(std::span<const Point> points, int max_level) {
  DPTree counter(max_level, HyperSchedule::canonical());
  counter = counter.updated(points);

  std::vector<double> prev{1.0};
  for (int m = 1; m <= max_level; ++m) {
    double am = static_cast<double>(m) * m;
    std::size_t n_nodes = std::size_t{1} << (2 * m);
    std::vector<double> cur(n_nodes);
    std::size_t parents = n_nodes >> 2;
    for (std::size_t p = 0; p < parents; ++p) {
      double n02 = counter.count(m, (p << 2) | 0) + counter.count(m, (p << 2) | 2);
      double n13 = counter.count(m, (p << 2) | 1) + counter.count(m, (p << 2) | 3);
      // Beta posterior mean for the {0,2} class, halved within the class.
      double zbar = (am + n02) / (2.0 * am + n02 + n13);
      cur[(p << 2) | 0] = prev[p] * zbar / 2.0;
      cur[(p << 2) | 2] = prev[p] * zbar / 2.0;
      cur[(p << 2) | 1] = prev[p] * (1.0 - zbar) / 2.0;
      cur[(p << 2) | 3] = prev[p] * (1.0 - zbar) / 2.0;
    }
    prev = std::move(cur);
  }
  GridDensity g(max_level);
  for (std::size_t node = 0; node < prev.size(); ++node) {
    GridCoord gc = node_to_grid(node, max_level);
    g.at(gc.row, gc.col) = prev[node];
  }
  g.normalize();
  return g;
}

int suggest_level(long long n, LevelRegime regime) {
  if (n < 1) throw usage_error("suggest_level: sample size must be >= 1");
  int best = 1;
  for (int m = 1; m <= 12; ++m) {
    long double need;
    if (regime == LevelRegime::generic)
      need = static_cast<long double>(m) * m * m;
    else
      need = static_cast<long double>(m) * m * std::pow(16.0L, m);
    if (static_cast<long double>(n) >= need) best = m;
  }
  return best;
}

}  // namespace dptcop
