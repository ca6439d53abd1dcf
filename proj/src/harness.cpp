#include "dptcop/harness.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <map>
#include <mutex>
#include <set>
#include <thread>

#include "dptcop/csv.hpp"
#include "dptcop/dptree.hpp"
#include "dptcop/estimators.hpp"
#include "dptcop/normalize.hpp"
#include "dptcop/partition.hpp"
#include "dptcop/rng.hpp"

namespace dptcop {

void parallel_for(std::size_t count, int threads,
                  const std::function<void(std::size_t)>& fn) {
  if (threads < 1) threads = 1;
  if (threads == 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  auto worker = [&]() {
    while (true) {
      std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mu);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  int n_threads = static_cast<int>(
      std::min<std::size_t>(count, static_cast<std::size_t>(threads)));
  pool.reserve(n_threads);
  for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

// ---------------------------------------------------------------------------
// Lazy posterior-measure K-L: only the Dirichlet nodes on the evaluation
// points' paths are drawn, which turns an O(4^M) draw into O(points * M).

namespace {

class LazyMeasureKl {
 public:
  LazyMeasureKl(const DPTree& tree, std::span<const Point> pts)
      : tree_(&tree), levels_(tree.max_level()), n_pts_(pts.size()) {
    touched_.resize(levels_);
    pos_.resize(levels_);
    std::vector<std::uint64_t> leaf(n_pts_);
    for (std::size_t i = 0; i < n_pts_; ++i)
      leaf[i] = locate_node(pts[i].u, pts[i].v, levels_);
    for (int m = levels_; m >= 1; --m) {
      std::vector<std::uint64_t>& t = touched_[m - 1];
      t = leaf;
      std::sort(t.begin(), t.end());
      t.erase(std::unique(t.begin(), t.end()), t.end());
      std::vector<std::uint32_t>& pos = pos_[m - 1];
      pos.resize(n_pts_);
      for (std::size_t i = 0; i < n_pts_; ++i)
        pos[i] = static_cast<std::uint32_t>(
            std::lower_bound(t.begin(), t.end(), leaf[i]) - t.begin());
      for (auto& x : leaf) x >>= 2;
    }
    logz_.resize(levels_);
    for (int m = 1; m <= levels_; ++m)
      logz_[m - 1].resize(touched_[m - 1].size());
  }

  // Mean over points of log p_M(point) under one fresh posterior draw.
  double mean_log_density(std::mt19937_64& rng) {
    for (int m = 1; m <= levels_; ++m) {
      double am = tree_->schedule().value(m);
      const std::vector<std::uint64_t>& t = touched_[m - 1];
      std::vector<double>& lz = logz_[m - 1];
      std::size_t i = 0;
      while (i < t.size()) {
        std::uint64_t parent = t[i] >> 2;
        double g[4], total = 0.0;
        for (int c = 0; c < 4; ++c) {
          g[c] = gamma_draw(rng, am + tree_->count(m, (parent << 2) | c));
          total += g[c];
        }
        while (i < t.size() && (t[i] >> 2) == parent) {
          lz[i] = std::log(g[t[i] & 3] / total);
          ++i;
        }
      }
    }
    KahanSum s;
    for (std::size_t p = 0; p < n_pts_; ++p) {
      double lp = 0.0;
      for (int m = 0; m < levels_; ++m) lp += logz_[m][pos_[m][p]];
      s.add(lp);
    }
    return s.value() / static_cast<double>(n_pts_) +
           levels_ * std::log(4.0);
  }

 private:
  const DPTree* tree_;
  int levels_;
  std::size_t n_pts_;
  std::vector<std::vector<std::uint64_t>> touched_;
  std::vector<std::vector<std::uint32_t>> pos_;
  std::vector<std::vector<double>> logz_;
};

}  // namespace

// ---------------------------------------------------------------------------
// Table 1: K-L of posterior draws against the truth

std::vector<KlCellResult> run_kl_table(const KlTableConfig& cfg,
                                       std::uint64_t seed, int threads) {
  if (cfg.families.empty() || cfg.sample_sizes.empty())
    throw usage_error("run_kl_table: empty families or sample sizes");
  if (cfg.draws < 2) throw usage_error("run_kl_table: need draws >= 2");
  struct Cell {
    std::size_t family;
    std::size_t n;
    int dataset;
  };
  std::vector<Cell> cells;
  for (std::size_t f = 0; f < cfg.families.size(); ++f)
    for (std::size_t n : cfg.sample_sizes)
      for (int d = 0; d < cfg.datasets; ++d)
        cells.push_back(Cell{f, n, d});

  std::vector<KlCellResult> rows(cells.size());
  parallel_for(cells.size(), threads, [&](std::size_t idx) {
    const Cell& cell = cells[idx];
    const CopulaModel& model = cfg.families[cell.family];
    std::uint64_t cell_key =
        cell.family * 1000003ULL + cell.n * 131ULL + cell.dataset;

    DPTree tree(cfg.level, HyperSchedule::canonical());
    if (cell.n > 0) {
      std::mt19937_64 rng_data = make_rng(derive_seed(seed, cell_key, 1));
      std::vector<Point> data = sample(model, rng_data, cell.n);
      tree = tree.updated(data);
    }

    std::mt19937_64 rng_eval = make_rng(derive_seed(seed, cell_key, 2));
    std::vector<double> log_c;
    std::vector<Point> pts =
        sample_with_log_density(model, rng_eval, cfg.kl_points, log_c);
    double mean_log_c = kahan_total(log_c) / static_cast<double>(log_c.size());

    LazyMeasureKl lazy(tree, pts);
    std::mt19937_64 rng_draws = make_rng(derive_seed(seed, cell_key, 3));
    KahanSum sum, sumsq;
    for (int d = 0; d < cfg.draws; ++d) {
      double kl = mean_log_c - lazy.mean_log_density(rng_draws);
      sum.add(kl);
      sumsq.add(kl * kl);
    }
    double mean = sum.value() / cfg.draws;
    double var = std::max(0.0, sumsq.value() / cfg.draws - mean * mean);
    KlCellResult r;
    r.family = canonical_key(model);
    r.n = cell.n;
    r.dataset = cell.dataset;
    r.mean_kl = mean;
    r.sd_kl = std::sqrt(var);
    r.draws = cfg.draws;
    rows[idx] = std::move(r);
  });
  return rows;
}

void write_kl_rows(const std::string& path,
                   const std::vector<KlCellResult>& rows) {
  std::vector<std::vector<std::string>> out;
  out.reserve(rows.size());
  for (const KlCellResult& r : rows)
    out.push_back({r.family, std::to_string(r.n), std::to_string(r.dataset),
                   format_double(r.mean_kl), format_double(r.sd_kl),
                   std::to_string(r.draws)});
  write_csv(path, {"family", "N", "dataset", "mean_kl", "sd_kl", "draws"},
            out);
}

void write_kl_pivot(const std::string& path,
                    const std::vector<KlCellResult>& rows) {
  std::vector<std::string> families;
  std::set<std::size_t> ns;
  for (const auto& r : rows) {
    if (std::find(families.begin(), families.end(), r.family) ==
        families.end())
      families.push_back(r.family);
    ns.insert(r.n);
  }
  std::vector<std::string> header{"family", "stat"};
  for (std::size_t n : ns) header.push_back("N=" + std::to_string(n));
  std::vector<std::vector<std::string>> out;
  for (const std::string& fam : families) {
    std::vector<std::string> mean_row{fam, "mean"}, sd_row{fam, "sd"};
    for (std::size_t n : ns) {
      double acc_m = 0.0, acc_s = 0.0;
      int cnt = 0;
      for (const auto& r : rows)
        if (r.family == fam && r.n == n) {
          acc_m += r.mean_kl;
          acc_s += r.sd_kl;
          ++cnt;
        }
      mean_row.push_back(cnt ? format_double(acc_m / cnt) : "NA");
      sd_row.push_back(cnt ? format_double(acc_s / cnt) : "NA");
    }
    out.push_back(std::move(mean_row));
    out.push_back(std::move(sd_row));
  }
  write_csv(path, header, out);
}

// ---------------------------------------------------------------------------
// Table 2: frequentist comparison grid

namespace {

struct TruthArtifacts {
  std::vector<double> grid;          // quadrature midpoints
  std::vector<double> density_vals;  // truth density on grid x grid
  std::vector<double> cdf_vals;      // truth CDF on grid x grid
  GridDensity masses;                // truth cell masses at cfg.level
  TruthArtifacts(int quad_grid, int level)
      : masses(level) { grid = interior_grid(quad_grid); }
};

TruthArtifacts build_truth(const FreqComparisonConfig& cfg) {
  TruthArtifacts t(cfg.quad_grid, cfg.level);
  t.density_vals = density_grid(cfg.family, t.grid, t.grid);
  CopulaCdf cdf_eval(cfg.family, 1e-7, cfg.cache_dir, cfg.oracle_samples,
                     cfg.oracle_cells, cfg.oracle_seed);
  t.cdf_vals.resize(t.grid.size() * t.grid.size());
  for (std::size_t j = 0; j < t.grid.size(); ++j)
    for (std::size_t i = 0; i < t.grid.size(); ++i)
      t.cdf_vals[j * t.grid.size() + i] = cdf_eval(t.grid[i], t.grid[j]);
  if (const CdfOracleGrid* g = cdf_eval.oracle()) {
    std::vector<double> m = g->cell_masses(cfg.level);
    t.masses.masses() = std::move(m);
  } else {
    int side = 1 << cfg.level;
    for (int r = 0; r < side; ++r)
      for (int c = 0; c < side; ++c) {
        double u0 = static_cast<double>(c) / side;
        double u1 = static_cast<double>(c + 1) / side;
        double v0 = static_cast<double>(r) / side;
        double v1 = static_cast<double>(r + 1) / side;
        t.masses.at(r, c) = cdf_eval(u1, v1) - cdf_eval(u0, v1) -
                            cdf_eval(u1, v0) + cdf_eval(u0, v0);
      }
  }
  return t;
}

std::vector<double> grid_density_values(const GridDensity& g,
                                        std::span<const double> grid) {
  std::vector<std::uint64_t> cell(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i)
    cell[i] = axis_cell_index(grid[i], g.level());
  double scale = std::ldexp(1.0, 2 * g.level());
  std::vector<double> out(grid.size() * grid.size());
  for (std::size_t j = 0; j < grid.size(); ++j)
    for (std::size_t i = 0; i < grid.size(); ++i)
      out[j * grid.size() + i] = g.at(cell[j], cell[i]) * scale;
  return out;
}

std::vector<double> grid_cdf_values(const GridCdf& cdf,
                                    std::span<const double> grid) {
  std::vector<double> out(grid.size() * grid.size());
  for (std::size_t j = 0; j < grid.size(); ++j)
    for (std::size_t i = 0; i < grid.size(); ++i)
      out[j * grid.size() + i] = cdf(grid[i], grid[j]);
  return out;
}

}  // namespace

std::vector<MetricRow> run_freq_comparison(const FreqComparisonConfig& cfg,
                                           std::uint64_t seed, int threads) {
  if (cfg.sample_sizes.empty())
    throw usage_error("run_freq_comparison: no sample sizes");
  if (cfg.replications < 1)
    throw usage_error("run_freq_comparison: replications must be >= 1");

  // Built before the pool and shared read-only afterwards.
  TruthArtifacts truth = build_truth(cfg);
  const std::string family = canonical_key(cfg.family);

  struct Task {
    std::size_t n_index;
    int rep;
  };
  std::vector<Task> tasks;
  for (std::size_t i = 0; i < cfg.sample_sizes.size(); ++i)
    for (int r = 0; r < cfg.replications; ++r) tasks.push_back(Task{i, r});

  const char* names[4] = {"dpt", "empirical", "kernel", "histogram"};
  std::vector<std::array<MetricRow, 4>> results(tasks.size());

  parallel_for(tasks.size(), threads, [&](std::size_t idx) {
    const Task& task = tasks[idx];
    std::size_t n = cfg.sample_sizes[task.n_index];
    std::uint64_t task_key = task.n_index * 1000003ULL + task.rep;

    std::mt19937_64 rng_data = make_rng(derive_seed(seed, task_key, 11));
    std::vector<Point> data = sample(cfg.family, rng_data, n);

    std::mt19937_64 rng_kl = make_rng(derive_seed(seed, task_key, 13));
    std::vector<double> log_c;
    std::vector<Point> kl_pts =
        sample_with_log_density(cfg.family, rng_kl, cfg.kl_points, log_c);

    // D-P tree posterior mean
    DPTree tree(cfg.level, HyperSchedule::canonical());
    tree = tree.updated(data);
    GridDensity dpt_grid = tree.posterior_mean_grid();
    if (cfg.normalization == GridNormalization::ipf)
      dpt_grid = ipf_normalize(dpt_grid, 1e-10, 2000);
    else if (cfg.normalization == GridNormalization::pit)
      dpt_grid = pit_normalize(dpt_grid);
    GridCdf dpt_cdf(dpt_grid);

    GridDensity hist_grid = histogram_fit(data, cfg.level);
    GridCdf hist_cdf(hist_grid);
    EmpiricalCopula emp(data);
    KernelCopula kernel(data);

    auto kl_of_grid = [&](const GridDensity& g) {
      return kl_against_points(kl_pts, log_c, [&](double u, double v) {
        return g.density_at(u, v);
      });
    };

    std::array<MetricRow, 4> rows;
    for (int e = 0; e < 4; ++e) {
      rows[e].estimator = names[e];
      rows[e].family = family;
      rows[e].n = n;
      rows[e].level = cfg.level;
      rows[e].replication = task.rep;
    }

    // K-L column: empirical has no density (NA), histogram's support misses
    // the target's (Inf).
    rows[0].kl = MetricValue::number(kl_of_grid(dpt_grid));
    rows[1].kl = MetricValue::na();
    {
      std::vector<double> dens = kernel.density_at(kl_pts);
      KahanSum s;
      bool inf = false;
      for (std::size_t i = 0; i < kl_pts.size(); ++i) {
        if (!(dens[i] > 0.0)) {
          inf = true;
          break;
        }
        s.add(log_c[i] - std::log(dens[i]));
      }
      rows[2].kl = inf ? MetricValue::infinite()
                       : MetricValue::number(
                             s.value() / static_cast<double>(kl_pts.size()));
    }
    rows[3].kl = MetricValue::infinite();

    // MISE (density quadrature); the empirical estimator has no density.
    rows[0].mise = MetricValue::number(squared_error_mean(
        truth.density_vals, grid_density_values(dpt_grid, truth.grid)));
    rows[1].mise = MetricValue::na();
    rows[2].mise = MetricValue::number(squared_error_mean(
        truth.density_vals, kernel.density_grid(truth.grid, truth.grid)));
    rows[3].mise = MetricValue::number(squared_error_mean(
        truth.density_vals, grid_density_values(hist_grid, truth.grid)));

    // MISE_C
    rows[0].mise_c = MetricValue::number(squared_error_mean(
        truth.cdf_vals, grid_cdf_values(dpt_cdf, truth.grid)));
    rows[1].mise_c = MetricValue::number(squared_error_mean(
        truth.cdf_vals, emp.cdf_grid(truth.grid, truth.grid)));
    rows[2].mise_c = MetricValue::number(squared_error_mean(
        truth.cdf_vals, kernel.cdf_grid(truth.grid, truth.grid)));
    rows[3].mise_c = MetricValue::number(squared_error_mean(
        truth.cdf_vals, grid_cdf_values(hist_cdf, truth.grid)));

    // MSE_g on level-M cell masses; the empirical estimator's cell masses
    // coincide with the histogram's.
    double hist_mseg = mse_g(truth.masses, hist_grid);
    rows[0].mse_g = MetricValue::number(mse_g(truth.masses, dpt_grid));
    rows[1].mse_g = MetricValue::number(hist_mseg);
    rows[3].mse_g = MetricValue::number(hist_mseg);
    {
      // Kernel cell masses from CDF rectangle sums at the level nodes.
      int side = 1 << cfg.level;
      std::vector<double> nodes(side + 1);
      for (int k = 0; k <= side; ++k)
        nodes[k] = static_cast<double>(k) / side;
      // interior proxies for the exact 0/1 endpoints
      std::vector<double> q(nodes);
      q.front() = 1e-12;
      q.back() = 1.0 - 1e-12;
      std::vector<double> kc = kernel.cdf_grid(q, q);
      GridDensity kmass(cfg.level);
      for (int r = 0; r < side; ++r)
        for (int c = 0; c < side; ++c)
          kmass.at(r, c) = kc[(r + 1) * (side + 1) + (c + 1)] -
                           kc[r * (side + 1) + (c + 1)] -
                           kc[(r + 1) * (side + 1) + c] +
                           kc[r * (side + 1) + c];
      rows[2].mse_g = MetricValue::number(mse_g(truth.masses, kmass));
    }

    for (int e = 0; e < 4; ++e) rows[e].cross_entropy = MetricValue::na();
    results[idx] = std::move(rows);
  });

  std::vector<MetricRow> out;
  out.reserve(tasks.size() * 4);
  for (auto& group : results)
    for (auto& row : group) out.push_back(std::move(row));
  return out;
}

void write_freq_pivot(const std::string& path,
                      const std::vector<MetricRow>& rows) {
  // mean over replications; sqrt applied to the squared-error columns
  std::map<std::pair<std::size_t, std::string>, std::array<double, 4>> acc;
  std::map<std::pair<std::size_t, std::string>, std::array<int, 4>> cnt;
  std::map<std::pair<std::size_t, std::string>, std::array<bool, 2>> state;
  for (const MetricRow& r : rows) {
    auto key = std::make_pair(r.n, r.estimator);
    auto& a = acc[key];
    auto& c = cnt[key];
    auto& st = state[key];
    const MetricValue* vals[4] = {&r.kl, &r.mise, &r.mise_c, &r.mse_g};
    for (int i = 0; i < 4; ++i)
      if (vals[i]->is_number()) {
        a[i] += vals[i]->get();
        ++c[i];
      }
    st[0] = st[0] || r.kl.is_na();
    st[1] = st[1] || r.kl.is_inf();
  }
  std::vector<std::vector<std::string>> out;
  for (const auto& [key, a] : acc) {
    const auto& c = cnt[key];
    const auto& st = state[key];
    std::string kl = st[0] ? "NA"
                     : st[1] ? "Inf"
                             : (c[0] ? format_double(a[0] / c[0]) : "NA");
    auto root = [&](int i) {
      return c[i] ? format_double(std::sqrt(a[i] / c[i])) : "NA";
    };
    out.push_back({std::to_string(key.first), key.second, kl, root(1),
                   root(2), root(3)});
  }
  write_csv(path, {"N", "estimator", "kl", "rmise", "rmise_c", "rmse_g"}, out);
}

ConvergenceFit run_convergence_fit(
    const std::vector<std::pair<double, double>>& n_and_kl) {
  std::vector<double> x, y_lin, y_log;
  std::set<double> distinct;
  for (const auto& [n, kl] : n_and_kl) {
    if (!(n > 0.0) || !std::isfinite(kl) || !(kl > 0.0)) continue;
    x.push_back(std::log(n));
    y_lin.push_back(kl);
    y_log.push_back(std::log(kl));
    distinct.insert(n);
  }
  if (distinct.size() < 4)
    throw usage_error("run_convergence_fit: need >= 4 distinct finite N");
  ConvergenceFit f;
  f.linlog = ols_fit(x, y_lin);
  f.loglog = ols_fit(x, y_log);
  f.points = x.size();
  return f;
}

void write_convergence_summary(
    const std::string& path,
    const std::vector<std::pair<std::string, ConvergenceFit>>& fits) {
  std::vector<std::vector<std::string>> out;
  for (const auto& [family, f] : fits)
    out.push_back({family, format_double(f.linlog.slope),
                   format_double(f.linlog.r2), format_double(f.loglog.slope),
                   format_double(f.loglog.r2), std::to_string(f.points)});
  write_csv(path,
            {"family", "linlog_slope", "linlog_r2", "loglog_slope",
             "loglog_r2", "points"},
            out);
}

}  // namespace dptcop
