#include <doctest.h>

#include <array>
#include <boost/math/special_functions/digamma.hpp>
#include <cmath>
#include <random>

#include "dptcop/copulas.hpp"
#include "dptcop/dptree.hpp"
#include "dptcop/partition.hpp"
#include "dptcop/rng.hpp"
#include "test_support.hpp"

using namespace dptcop;
using dptcop::testing::random_points;

TEST_CASE("hyper-parameter schedules") {
  HyperSchedule canon = HyperSchedule::canonical();
  CHECK(canon.value(1) == 1.0);
  CHECK(canon.value(7) == 49.0);
  HyperSchedule lin = HyperSchedule::custom([](int m) { return 2.0 * m; });
  CHECK(lin.value(1) == 2.0);
  CHECK(lin.value(2) == 4.0);
  CHECK(canon.satisfies_continuity(12));
  CHECK(HyperSchedule::custom([](int m) { return std::pow(m, 1.5); })
            .satisfies_continuity(12));
  CHECK_FALSE(HyperSchedule::custom([](int) { return 3.0; })
                  .satisfies_continuity(12));
  CHECK_FALSE(lin.satisfies_continuity(12));  // linear growth is not m^(1+d)
  CHECK_THROWS_AS(HyperSchedule::custom([](int) { return -1.0; }).value(1),
                  usage_error);
}

TEST_CASE("prior construction") {
  DPTree t(1, HyperSchedule::canonical());
  for (int i = 0; i < 4; ++i) CHECK(t.count(1, i) == 0.0);
  CHECK(t.total_weight() == 0.0);
  CHECK_THROWS_AS(DPTree(0, HyperSchedule::canonical()), usage_error);
  CHECK_THROWS_AS(DPTree(13, HyperSchedule::canonical()), usage_error);
  DPTree t10(10, HyperSchedule::canonical());
  CHECK(t10.count(10, 12345) == 0.0);
}

TEST_CASE("update counts and weights") {
  DPTree prior(1, HyperSchedule::canonical());
  std::vector<Point> one{{0.1, 0.1}};
  DPTree post = prior.updated(one);
  CHECK(post.count(1, 0) == 1.0);
  CHECK(post.count(1, 1) == 0.0);
  CHECK(post.total_weight() == 1.0);
  CHECK(prior.count(1, 0) == 0.0);  // value semantics

  DPTree weighted = prior.updated(one, 0.1);
  CHECK(weighted.count(1, 0) == 0.1);
  CHECK(weighted.total_weight() == 0.1);

  CHECK_THROWS_AS(prior.updated(one, 0.0), usage_error);
  std::vector<Point> bad{{1.5, 0.0}};
  CHECK_THROWS_AS(prior.updated(bad), data_error);
}

TEST_CASE("batch update equals sequential fold exactly") {
  std::mt19937_64 rng(101);
  std::vector<Point> pts = random_points(rng, 100);
  DPTree prior(5, HyperSchedule::canonical());
  DPTree batch = prior.updated(pts);
  DPTree fold = prior;
  for (const Point& p : pts) fold = fold.updated(std::span(&p, 1));
  for (int m = 1; m <= 5; ++m)
    for (std::uint64_t k = 0; k < (1ull << (2 * m)); ++k)
      CHECK(batch.count(m, k) == fold.count(m, k));
  CHECK(batch.total_weight() == fold.total_weight());
}

TEST_CASE("conjugacy: two updates equal one combined update") {
  std::mt19937_64 rng(102);
  std::vector<Point> a = random_points(rng, 37);
  std::vector<Point> b = random_points(rng, 53);
  std::vector<Point> ab = a;
  ab.insert(ab.end(), b.begin(), b.end());
  DPTree prior(4, HyperSchedule::canonical());
  DPTree two = prior.updated(a).updated(b);
  DPTree one = prior.updated(ab);
  for (int m = 1; m <= 4; ++m)
    for (std::uint64_t k = 0; k < (1ull << (2 * m)); ++k)
      CHECK(two.count(m, k) == one.count(m, k));
}

TEST_CASE("posterior mean grid closed forms") {
  DPTree prior2(2, HyperSchedule::canonical());
  GridDensity g = prior2.posterior_mean_grid();
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c)
      CHECK(g.at(r, c) == doctest::Approx(1.0 / 16).epsilon(1e-14));

  DPTree prior1(1, HyperSchedule::canonical());
  std::vector<Point> one{{0.1, 0.1}};
  GridDensity g1 = prior1.updated(one).posterior_mean_grid();
  CHECK(g1.at(0, 0) == doctest::Approx(0.4).epsilon(1e-14));
  CHECK(g1.at(0, 1) == doctest::Approx(0.2).epsilon(1e-14));
  CHECK(g1.at(1, 0) == doctest::Approx(0.2).epsilon(1e-14));
  CHECK(g1.at(1, 1) == doctest::Approx(0.2).epsilon(1e-14));

  // two-level telescoping product for a single observation at (0.1, 0.1)
  GridDensity g2 = prior2.updated(one).posterior_mean_grid();
  double in_cell = (2.0 / 5.0) * (5.0 / 17.0);
  double sibling = (2.0 / 5.0) * (4.0 / 17.0);
  double outside = (1.0 / 5.0) * (1.0 / 4.0);
  CHECK(g2.at(0, 0) == doctest::Approx(in_cell).epsilon(1e-13));
  CHECK(g2.at(0, 1) == doctest::Approx(sibling).epsilon(1e-13));
  CHECK(g2.at(1, 0) == doctest::Approx(sibling).epsilon(1e-13));
  CHECK(g2.at(1, 1) == doctest::Approx(sibling).epsilon(1e-13));
  CHECK(g2.at(0, 2) == doctest::Approx(outside).epsilon(1e-13));
  CHECK(g2.at(3, 3) == doctest::Approx(outside).epsilon(1e-13));
}

TEST_CASE("posterior mean normalization and aggregation") {
  std::mt19937_64 rng(103);
  for (int trial = 0; trial < 3; ++trial) {
    int m = 8 + trial;
    std::vector<Point> pts = random_points(rng, 500);
    DPTree t = DPTree(m, HyperSchedule::canonical()).updated(pts);
    GridDensity g = t.posterior_mean_grid();
    CHECK(std::abs(g.total_mass() - 1.0) <= 1e-12);
  }
  // summing the 4 children of a level-(M-1) cell reproduces the level-(M-1)
  // telescoping mean, which equals the mean grid of the M-1 tree
  std::vector<Point> pts = random_points(rng, 300);
  for (int m = 2; m <= 6; ++m) {
    GridDensity fine =
        DPTree(m, HyperSchedule::canonical()).updated(pts).posterior_mean_grid();
    GridDensity coarse = DPTree(m - 1, HyperSchedule::canonical())
                             .updated(pts)
                             .posterior_mean_grid();
    for (int r = 0; r < coarse.size(); ++r)
      for (int c = 0; c < coarse.size(); ++c) {
        double s = fine.at(2 * r, 2 * c) + fine.at(2 * r, 2 * c + 1) +
                   fine.at(2 * r + 1, 2 * c) + fine.at(2 * r + 1, 2 * c + 1);
        CHECK(s == doctest::Approx(coarse.at(r, c)).epsilon(1e-12));
      }
  }
}

TEST_CASE("sample_measure moments match the Dirichlet prior") {
  DPTree prior(1, HyperSchedule::canonical());
  std::mt19937_64 rng(104);
  GridDensity first = prior.sample_measure(rng);
  double s = 0.0;
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 2; ++c) {
      CHECK(first.at(r, c) >= 0.0);
      s += first.at(r, c);
    }
  CHECK(s == doctest::Approx(1.0).epsilon(1e-12));

  std::mt19937_64 r1(42), r2(42);
  GridDensity a = prior.sample_measure(r1);
  GridDensity b = prior.sample_measure(r2);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) CHECK(a.at(i, j) == b.at(i, j));

  const int draws = 10000;
  std::mt19937_64 rng2(105);
  double mean = 0.0, m2 = 0.0;
  for (int d = 0; d < draws; ++d) {
    double x = prior.sample_measure(rng2).at(0, 0);
    mean += x;
    m2 += x * x;
  }
  mean /= draws;
  double var = m2 / draws - mean * mean;
  // Dirichlet(1,1,1,1): mean 1/4, var (1/4)(3/4)/5 = 0.0375
  double se_mean = std::sqrt(0.0375 / draws);
  CHECK(std::abs(mean - 0.25) <= 3 * se_mean);
  double se_var = 0.0375 * std::sqrt(2.0 / (draws - 1));
  CHECK(std::abs(var - 0.0375) <= 4 * se_var);
}

TEST_CASE("sample_measure Monte Carlo mean matches posterior mean grid") {
  std::mt19937_64 rng(106);
  std::vector<Point> pts = random_points(rng, 60);
  for (int m = 1; m <= 3; ++m) {
    DPTree t = DPTree(m, HyperSchedule::canonical()).updated(pts);
    GridDensity expected = t.posterior_mean_grid();
    const int draws = 10000;
    int side = 1 << m;
    std::vector<double> acc(side * side, 0.0), acc2(side * side, 0.0);
    for (int d = 0; d < draws; ++d) {
      GridDensity g = t.sample_measure(rng);
      for (int r = 0; r < side; ++r)
        for (int c = 0; c < side; ++c) {
          acc[r * side + c] += g.at(r, c);
          acc2[r * side + c] += g.at(r, c) * g.at(r, c);
        }
    }
    for (int r = 0; r < side; ++r)
      for (int c = 0; c < side; ++c) {
        double mc_mean = acc[r * side + c] / draws;
        double mc_var =
            acc2[r * side + c] / draws - mc_mean * mc_mean;
        double se = std::sqrt(std::max(mc_var, 1e-12) / draws);
        CHECK(std::abs(mc_mean - expected.at(r, c)) <= 5 * se);
      }
  }
}

TEST_CASE("predictive draws agree with the mean grid") {
  DPTree prior(1, HyperSchedule::canonical());
  std::mt19937_64 rng(107);
  DPTree post = prior.updated(std::vector<Point>{{0.1, 0.1}});
  const std::size_t n = 1000000;
  std::vector<Point> pts =
      post.sample_predictive(rng, n, PredictiveMode::mean_measure);
  std::array<double, 4> freq{0, 0, 0, 0};
  for (const Point& p : pts) freq[locate_node(p.u, p.v, 1)] += 1.0;
  std::array<double, 4> expect{0.4, 0.2, 0.2, 0.2};
  for (int i = 0; i < 4; ++i) {
    double se = std::sqrt(expect[i] * (1 - expect[i]) / n);
    CHECK(std::abs(freq[i] / n - expect[i]) <= 4 * se);
  }

  std::mt19937_64 ra(9), rb(9);
  auto sa = post.sample_predictive(ra, 50, PredictiveMode::single_measure);
  auto sb = post.sample_predictive(rb, 50, PredictiveMode::single_measure);
  for (std::size_t i = 0; i < sa.size(); ++i) {
    CHECK(sa[i].u == sb[i].u);
    CHECK(sa[i].v == sb[i].v);
  }
  CHECK_THROWS_AS(post.sample_predictive(ra, 0, PredictiveMode::mean_measure),
                  usage_error);
}

TEST_CASE("quasi-Polya-tree mean grid and its grid effect") {
  std::vector<Point> none;
  GridDensity g0 = quasi_pt_mean_grid(none, 1);
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 2; ++c)
      CHECK(g0.at(r, c) == doctest::Approx(0.25).epsilon(1e-14));

  // one point in cell 0: class {0,2} gets Beta mean 2/3, halved per cell
  std::vector<Point> one{{0.1, 0.1}};
  GridDensity g1 = quasi_pt_mean_grid(one, 1);
  CHECK(g1.at(0, 0) == doctest::Approx(1.0 / 3).epsilon(1e-13));
  CHECK(g1.at(1, 0) == doctest::Approx(1.0 / 3).epsilon(1e-13));  // cell 2
  CHECK(g1.at(0, 1) == doctest::Approx(1.0 / 6).epsilon(1e-13));
  CHECK(g1.at(1, 1) == doctest::Approx(1.0 / 6).epsilon(1e-13));

  // diagonal data: the prior cannot distinguish within the classes {0,2}
  // and {1,3}, so off-diagonal cells receive as much mass as diagonal ones
  std::mt19937_64 rng(108);
  std::uniform_real_distribution<double> unif(0.0, 0.49);
  std::vector<Point> diag;
  for (int i = 0; i < 50; ++i) {
    double a = unif(rng);
    diag.push_back(Point{a, a});                    // cell 0
    diag.push_back(Point{0.5 + a, 0.5 + a});        // cell 3
  }
  GridDensity gd = quasi_pt_mean_grid(diag, 1);
  CHECK(gd.at(0, 0) == gd.at(1, 0));  // cell 0 == cell 2
  CHECK(gd.at(0, 1) == gd.at(1, 1));  // cell 1 == cell 3
}

TEST_CASE("binary Polya tree re-parameterization") {
  DPTree prior(1, HyperSchedule::canonical());
  BinaryPtParams bp = prior.to_binary_pt();
  CHECK(bp.splits[0][0].pair_bottom == 2.0);
  CHECK(bp.splits[0][0].pair_top == 2.0);
  CHECK(bp.splits[0][0].bottom_left == 1.0);
  CHECK(bp.splits[0][0].bottom_right == 1.0);
  CHECK(bp.splits[0][0].top_left == 1.0);
  CHECK(bp.splits[0][0].top_right == 1.0);

  // posterior counts [3,1,0,0] at level 1
  std::vector<Point> pts;
  for (int i = 0; i < 3; ++i) pts.push_back(Point{0.1, 0.1});   // cell 0
  pts.push_back(Point{0.9, 0.1});                               // cell 1
  BinaryPtParams bq = prior.updated(pts).to_binary_pt();
  CHECK(bq.splits[0][0].pair_bottom == 6.0);  // (1+3) + (1+1)
  CHECK(bq.splits[0][0].pair_top == 2.0);
  CHECK(bq.splits[0][0].bottom_left == 4.0);
  CHECK(bq.splits[0][0].bottom_right == 2.0);
  CHECK(bq.splits[0][0].top_left == 1.0);
  CHECK(bq.splits[0][0].top_right == 1.0);
}

namespace {

struct Moments {
  double mean, var;
};

double beta_mean(double a, double b) { return a / (a + b); }
double beta_m2(double a, double b) {
  return a * (a + 1.0) / ((a + b) * (a + b + 1.0));
}

// Dirichlet route: cell mass is the product of independent per-level
// Dirichlet components.
Moments dirichlet_moments(const DPTree& t, std::uint64_t leaf) {
  double m1 = 1.0, m2 = 1.0;
  std::uint64_t node = leaf;
  std::vector<std::uint64_t> chain;
  for (int m = t.max_level(); m >= 1; --m) {
    chain.push_back(node);
    node >>= 2;
  }
  int level = t.max_level();
  for (std::uint64_t n : chain) {
    double a = t.posterior_alpha(level, n);
    double total = 0.0;
    for (int i = 0; i < 4; ++i)
      total += t.posterior_alpha(level, (n & ~3ull) | i);
    m1 *= a / total;
    m2 *= a * (a + 1.0) / (total * (total + 1.0));
    --level;
  }
  return {m1, m2 - m1 * m1};
}

// Binary route: the same mass written as a product of two Beta factors per
// quaternary level, independent across and within levels.
Moments binary_moments(const DPTree& t, std::uint64_t leaf) {
  BinaryPtParams bp = t.to_binary_pt();
  double m1 = 1.0, m2 = 1.0;
  std::uint64_t node = leaf;
  std::vector<std::pair<int, std::uint64_t>> chain;
  for (int m = t.max_level(); m >= 1; --m) {
    chain.push_back({m, node});
    node >>= 2;
  }
  for (auto [level, n] : chain) {
    const BinaryPtSplit& sp = bp.splits[level - 1][n >> 2];
    int digit = static_cast<int>(n & 3);
    double pa, pb;  // pair Beta for this child
    if (digit < 2) {
      pa = sp.pair_bottom;
      pb = sp.pair_top;
    } else {
      pa = sp.pair_top;
      pb = sp.pair_bottom;
    }
    double wa, wb;  // within-pair Beta
    if (digit == 0) {
      wa = sp.bottom_left;
      wb = sp.bottom_right;
    } else if (digit == 1) {
      wa = sp.bottom_right;
      wb = sp.bottom_left;
    } else if (digit == 2) {
      wa = sp.top_left;
      wb = sp.top_right;
    } else {
      wa = sp.top_right;
      wb = sp.top_left;
    }
    m1 *= beta_mean(pa, pb) * beta_mean(wa, wb);
    m2 *= beta_m2(pa, pb) * beta_m2(wa, wb);
  }
  return {m1, m2 - m1 * m1};
}

}  // namespace

TEST_CASE("binary and quaternary moments agree") {
  std::mt19937_64 rng(109);
  for (int trial = 0; trial < 20; ++trial) {
    int m = 1 + (trial % 2);
    std::vector<Point> pts = random_points(rng, 10 + trial);
    DPTree t = DPTree(m, HyperSchedule::canonical()).updated(pts);
    for (std::uint64_t leaf = 0; leaf < (1ull << (2 * m)); ++leaf) {
      Moments a = dirichlet_moments(t, leaf);
      Moments b = binary_moments(t, leaf);
      CHECK(std::abs(a.mean - b.mean) <= 1e-10);
      CHECK(std::abs(a.var - b.var) <= 1e-10);
    }
    // the prior mean of any cell equals the product of the two Beta means
    DPTree prior(1, HyperSchedule::canonical());
    Moments pm = binary_moments(prior, 2);
    CHECK(pm.mean == doctest::Approx(0.25).epsilon(1e-14));
  }
}

TEST_CASE("level suggestion from the order requirements") {
  CHECK(suggest_level(10000, LevelRegime::lower_bounded) == 2);
  CHECK(suggest_level(10000, LevelRegime::gaussian) == 2);
  CHECK(suggest_level(36864, LevelRegime::lower_bounded) == 3);
  CHECK(suggest_level(1, LevelRegime::lower_bounded) == 1);
  CHECK(suggest_level(1, LevelRegime::generic) == 1);
  CHECK(suggest_level(1000000000LL, LevelRegime::generic) == 12);
  CHECK_THROWS_AS(suggest_level(0, LevelRegime::generic), usage_error);
}

TEST_CASE("prior-only K-L against a known analytic value") {
  // For a symmetric prior, E log p_M is constant over the square, so
  // KL(N=0) = E_c log c + sum_j [psi(4 j^2) - psi(j^2) - log 4].
  const int level = 3;
  double prior_term = 0.0;
  for (int j = 1; j <= level; ++j)
    prior_term += boost::math::digamma(4.0 * j * j) -
                  boost::math::digamma(1.0 * j * j) - std::log(4.0);
  double elogc = -0.5 * std::log(0.75);  // Gaussian rho = 0.5
  double expected = elogc + prior_term;

  CopulaModel truth = make_gaussian(0.5);
  std::mt19937_64 rng(110);
  std::vector<double> logc;
  std::vector<Point> pts = sample_with_log_density(truth, rng, 4000, logc);

  DPTree prior(level, HyperSchedule::canonical());
  const int draws = 1500;
  double acc = 0.0, acc2 = 0.0;
  for (int d = 0; d < draws; ++d) {
    GridDensity g = prior.sample_measure(rng);
    double s = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i)
      s += logc[i] - std::log(g.density_at(pts[i].u, pts[i].v));
    double kl = s / pts.size();
    acc += kl;
    acc2 += kl * kl;
  }
  double mean = acc / draws;
  double sd_draws = std::sqrt(std::max(acc2 / draws - mean * mean, 0.0));
  // shared-points MC error plus the across-draw error
  double var_logc = 0.0, mean_logc = 0.0;
  for (double x : logc) mean_logc += x;
  mean_logc /= logc.size();
  for (double x : logc) var_logc += (x - mean_logc) * (x - mean_logc);
  var_logc /= logc.size();
  double tol =
      3.0 * (sd_draws / std::sqrt(double(draws)) +
             std::sqrt(var_logc / pts.size()) + 0.01);
  CHECK(std::abs(mean - expected) <= tol);
}
