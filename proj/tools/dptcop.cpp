// Command-line front end: fit / sample / simulate / finance subcommands with
// seeded determinism and JSON run manifests that can be re-executed verbatim.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "dptcop/copulas.hpp"
#include "dptcop/csv.hpp"
#include "dptcop/dptree.hpp"
#include "dptcop/finance.hpp"
#include "dptcop/harness.hpp"
#include "dptcop/normalize.hpp"
#include "dptcop/rng.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace dptcop;

namespace {

constexpr const char* kVersion = "0.1.0";

struct Invocation {
  std::string command;
  std::map<std::string, std::string> options;
  std::uint64_t seed = 12345;
  int threads = 1;
  bool full = false;
  std::string out_dir = ".";
};

std::string fnv64_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("cannot open file: " + path);
  std::uint64_t h = 1469598103934665603ULL;
  char c;
  while (in.get(c)) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string out_path(const Invocation& inv, const std::string& name) {
  fs::create_directories(inv.out_dir);
  return (fs::path(inv.out_dir) / name).string();
}

void write_manifest(const Invocation& inv, const std::string& name,
                    const std::vector<std::string>& inputs,
                    const std::vector<std::string>& outputs) {
  json m;
  m["tool"] = "dptcop";
  m["version"] = kVersion;
  m["command"] = inv.command;
  m["seed"] = inv.seed;
  m["threads"] = inv.threads;
  m["full"] = inv.full;
  m["out_dir"] = inv.out_dir;
  m["options"] = inv.options;
  json ins = json::array();
  for (const std::string& p : inputs)
    ins.push_back({{"path", p}, {"fnv64", fnv64_file(p)}});
  m["inputs"] = ins;
  m["outputs"] = outputs;
  std::ofstream out(out_path(inv, name));
  out << m.dump(2) << "\n";
}

HyperSchedule parse_schedule(const std::string& s) {
  if (s.empty() || s == "canonical") return HyperSchedule::canonical();
  if (s.rfind("zm2:", 0) == 0)
    return HyperSchedule::scaled_canonical(
        parse_double(s.substr(4), "schedule"));
  if (s.rfind("const:", 0) == 0) {
    double v = parse_double(s.substr(6), "schedule");
    return HyperSchedule::custom([v](int) { return v; });
  }
  throw usage_error("unknown schedule '" + s +
                    "' (expected canonical, zm2:<z> or const:<v>)");
}

CopulaModel parse_family(const json& j) {
  if (!j.contains("family"))
    throw data_error("config: family entry lacks 'family'");
  std::string f = j.at("family").get<std::string>();
  if (f == "gaussian") return make_gaussian(j.at("rho").get<double>());
  if (f == "student_t")
    return make_student_t(j.at("rho").get<double>(), j.at("nu").get<double>());
  if (f == "gumbel") return make_gumbel(j.at("a").get<double>());
  if (f == "skew_normal")
    return make_skew_normal(j.at("rho").get<double>(),
                            j.at("alpha1").get<double>(),
                            j.at("alpha2").get<double>());
  throw data_error("config: unknown family '" + f + "'");
}

template <typename T>
T cfg_scaled(const json& j, const std::string& key, T desk, bool full) {
  T v = j.value(key, desk);
  if (full) v = j.value(key + "_full", v);
  return v;
}

GridNormalization parse_normalization(const std::string& s) {
  if (s == "none" || s.empty()) return GridNormalization::none;
  if (s == "ipf") return GridNormalization::ipf;
  if (s == "pit") return GridNormalization::pit;
  throw data_error("config: unknown normalization '" + s + "'");
}

// ---------------------------------------------------------------------------

void run_fit(const Invocation& inv) {
  const std::string input = inv.options.at("input");
  const int level =
      static_cast<int>(parse_double(inv.options.at("level"), "--level"));
  HyperSchedule sched = parse_schedule(inv.options.at("schedule"));
  GridNormalization norm = parse_normalization(inv.options.at("normalize"));
  const std::string output = out_path(inv, inv.options.at("output"));

  std::vector<Point> pts = read_points_csv(input);
  DPTree tree(level, sched);
  if (!pts.empty()) tree = tree.updated(pts);
  GridDensity grid = tree.posterior_mean_grid();
  if (norm == GridNormalization::ipf) grid = ipf_normalize(grid, 1e-10, 2000);
  if (norm == GridNormalization::pit) grid = pit_normalize(grid);
  grid.write_csv(output);
  write_manifest(inv, "fit_manifest.json", {input}, {output});
  std::cout << "fit: " << pts.size() << " points -> " << output << "\n";
}

void run_sample(const Invocation& inv) {
  const std::size_t n =
      static_cast<std::size_t>(parse_double(inv.options.at("n"), "--n"));
  const std::string mode_str = inv.options.at("mode");
  const std::string output = out_path(inv, inv.options.at("output"));
  std::vector<std::string> inputs;
  std::mt19937_64 rng = make_rng(derive_seed(inv.seed, 0xA5, 0));

  std::vector<Point> drawn;
  if (!inv.options.at("points").empty()) {
    const std::string input = inv.options.at("points");
    inputs.push_back(input);
    const int level =
        static_cast<int>(parse_double(inv.options.at("level"), "--level"));
    PredictiveMode mode;
    if (mode_str == "mean" || mode_str == "mean_measure")
      mode = PredictiveMode::mean_measure;
    else if (mode_str == "single" || mode_str == "single_measure")
      mode = PredictiveMode::single_measure;
    else
      throw usage_error("unknown mode '" + mode_str + "'");
    std::vector<Point> pts = read_points_csv(input);
    DPTree tree(level, parse_schedule(inv.options.at("schedule")));
    if (!pts.empty()) tree = tree.updated(pts);
    if (n > 0) drawn = tree.sample_predictive(rng, n, mode);
  } else if (!inv.options.at("grid").empty()) {
    const std::string input = inv.options.at("grid");
    inputs.push_back(input);
    GridDensity g = GridDensity::read_csv(input);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const auto& mass = g.masses();
    std::vector<double> cum(mass.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < mass.size(); ++i) {
      acc += mass[i];
      cum[i] = acc;
    }
    cum.back() = 1.0;
    for (std::size_t k = 0; k < n; ++k) {
      double t = unif(rng);
      std::size_t flat =
          std::lower_bound(cum.begin(), cum.end(), t) - cum.begin();
      std::size_t row = flat / g.size(), col = flat % g.size();
      drawn.push_back(
          Point{(col + unif(rng)) / g.size(), (row + unif(rng)) / g.size()});
    }
  } else {
    throw usage_error("sample: provide --points or --grid input");
  }
  write_points_csv(output, drawn);
  write_manifest(inv, "sample_manifest.json", inputs, {output});
  std::cout << "sample: wrote " << drawn.size() << " points -> " << output
            << "\n";
}

void run_simulate(const Invocation& inv) {
  const std::string config_path = inv.options.at("config");
  std::ifstream cf(config_path);
  if (!cf) throw data_error("cannot open config: " + config_path);
  json cfg = json::parse(cf, nullptr, true, true);

  if (!cfg.contains("experiment"))
    throw data_error("config: missing key 'experiment'");
  const std::string experiment = cfg.at("experiment").get<std::string>();
  const std::string prefix = cfg.value("output_prefix", experiment);
  std::vector<std::string> outputs;

  if (experiment == "kl_table") {
    KlTableConfig kc;
    if (!cfg.contains("families"))
      throw data_error("config: missing 'families'");
    for (const json& f : cfg.at("families"))
      kc.families.push_back(parse_family(f));
    kc.sample_sizes =
        cfg_scaled(cfg, "sample_sizes", std::vector<std::size_t>{}, inv.full);
    if (kc.sample_sizes.empty())
      throw data_error("config: missing 'sample_sizes'");
    kc.level = cfg_scaled(cfg, "level", 10, inv.full);
    kc.draws = cfg_scaled(cfg, "draws", 200, inv.full);
    kc.kl_points = cfg_scaled<std::size_t>(cfg, "kl_points", 20000, inv.full);
    kc.datasets = cfg_scaled(cfg, "datasets", 1, inv.full);

    std::vector<KlCellResult> rows = run_kl_table(kc, inv.seed, inv.threads);
    std::string rows_path = out_path(inv, prefix + "_rows.csv");
    std::string pivot_path = out_path(inv, prefix + "_pivot.csv");
    std::string conv_path = out_path(inv, prefix + "_convergence.csv");
    write_kl_rows(rows_path, rows);
    write_kl_pivot(pivot_path, rows);

    std::vector<std::pair<std::string, ConvergenceFit>> fits;
    for (const CopulaModel& fam : kc.families) {
      std::string key = canonical_key(fam);
      std::vector<std::pair<double, double>> pts;
      for (const KlCellResult& r : rows)
        if (r.family == key && r.n > 0)
          pts.push_back({static_cast<double>(r.n), r.mean_kl});
      fits.push_back({key, run_convergence_fit(pts)});
    }
    write_convergence_summary(conv_path, fits);
    outputs = {rows_path, pivot_path, conv_path};
  } else if (experiment == "freq_comparison") {
    FreqComparisonConfig fc;
    fc.family = parse_family(cfg.at("family"));
    fc.sample_sizes =
        cfg_scaled(cfg, "sample_sizes", std::vector<std::size_t>{}, inv.full);
    if (fc.sample_sizes.empty())
      throw data_error("config: missing 'sample_sizes'");
    fc.level = cfg_scaled(cfg, "level", 8, inv.full);
    fc.replications = cfg_scaled(cfg, "replications", 25, inv.full);
    fc.kl_points = cfg_scaled<std::size_t>(cfg, "kl_points", 10000, inv.full);
    fc.quad_grid = cfg_scaled(cfg, "quad_grid", 512, inv.full);
    fc.normalization =
        parse_normalization(cfg.value("normalization", std::string("none")));
    fc.oracle_samples =
        cfg_scaled<std::size_t>(cfg, "oracle_samples", 4'000'000, inv.full);
    fc.oracle_cells = cfg.value("oracle_cells", 1024);
    fc.cache_dir = cfg.value("cache_dir", oracle_cache_dir());

    std::vector<MetricRow> rows =
        run_freq_comparison(fc, inv.seed, inv.threads);
    std::string rows_path = out_path(inv, prefix + "_rows.csv");
    std::string pivot_path = out_path(inv, prefix + "_pivot.csv");
    write_metric_rows(rows_path, rows);
    write_freq_pivot(pivot_path, rows);
    outputs = {rows_path, pivot_path};
  } else {
    throw data_error("config: unknown experiment '" + experiment + "'");
  }
  write_manifest(inv, prefix + "_manifest.json", {config_path}, outputs);
  std::cout << "simulate (" << experiment << "): wrote";
  for (const auto& o : outputs) std::cout << " " << o;
  std::cout << "\n";
}

void run_finance(const Invocation& inv) {
  const std::string pa = inv.options.at("prices_a");
  const std::string pb = inv.options.at("prices_b");
  const std::string mode = inv.options.at("mode");
  const std::string config_path = inv.options.at("config");

  json cfg = json::object();
  if (!config_path.empty()) {
    std::ifstream cf(config_path);
    if (!cf) throw data_error("cannot open config: " + config_path);
    cfg = json::parse(cf, nullptr, true, true);
  }

  auto [sa, sb] = inner_join(load_price_csv(pa), load_price_csv(pb));
  std::vector<double> ra = log_returns(sa);
  std::vector<double> rb = log_returns(sb);
  GarchFit ga = garch11_fit(ra);
  GarchFit gb = garch11_fit(rb);

  const int level = cfg.value("level", 8);
  const double hist_weight = cfg.value("historic_weight", 0.1);
  std::vector<std::string> outputs;

  if (mode == "cv") {
    const int folds = cfg.value("folds", 10);
    std::vector<double> u = empirical_pit(ga.innovations);
    std::vector<double> v = empirical_pit(gb.innovations);
    std::vector<Point> pts(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) pts[i] = Point{u[i], v[i]};
    std::vector<CopulaFitter> fitters{
        dpt_fitter(level, HyperSchedule::canonical()), gaussian_mle_fitter(),
        t_mle_fitter()};
    std::mt19937_64 rng = make_rng(derive_seed(inv.seed, 0xF1, 0));
    std::vector<CvResult> res = cross_validate(pts, folds, fitters, rng);
    std::string path = out_path(inv, "finance_cv.csv");
    std::vector<std::vector<std::string>> rows;
    for (const CvResult& r : res)
      rows.push_back({r.name, format_double(r.mean_cross_entropy)});
    write_csv(path, {"method", "mean_cross_entropy"}, rows);
    outputs = {path};
  } else if (mode == "rolling") {
    RollingConfig rc;
    rc.t_train = cfg.value("t_train", 500);
    rc.t_test = cfg.value("t_test", 500);
    rc.window_fit = cfg.value("window_fit", 250);
    rc.window_predict = cfg.value("window_predict", 50);
    rc.mise_c_grid = cfg.value("mise_c_grid", 128);
    std::vector<CopulaFitter> fitters{
        dpt_fitter(level, HyperSchedule::canonical()),
        dpt_weighted_fitter(level, HyperSchedule::canonical(), hist_weight),
        empirical_fitter(), kernel_fitter(), gaussian_mle_fitter(),
        t_mle_fitter()};
    std::vector<RollingResult> res =
        rolling_predict(ga.innovations, gb.innovations, rc, fitters);
    std::string path = out_path(inv, "finance_rolling.csv");
    std::vector<std::vector<std::string>> rows;
    for (const RollingResult& r : res)
      rows.push_back({r.name, std::to_string(rc.window_fit),
                      std::to_string(rc.window_predict), r.avg_loglik.str(),
                      format_double(r.rmise_c)});
    write_csv(path, {"method", "t_e", "t_p", "avg_loglik", "rmise_c"}, rows);
    outputs = {path};
  } else {
    throw usage_error("finance: mode must be cv or rolling");
  }
  std::vector<std::string> inputs{pa, pb};
  if (!config_path.empty()) inputs.push_back(config_path);
  write_manifest(inv, "finance_manifest.json", inputs, outputs);
  std::cout << "finance (" << mode << "): wrote " << outputs.front() << "\n";
}

void run_invocation(const Invocation& inv) {
  if (inv.command == "fit")
    run_fit(inv);
  else if (inv.command == "sample")
    run_sample(inv);
  else if (inv.command == "simulate")
    run_simulate(inv);
  else if (inv.command == "finance")
    run_finance(inv);
  else
    throw usage_error("unknown command '" + inv.command + "'");
}

Invocation load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open manifest: " + path);
  json m = json::parse(in);
  Invocation inv;
  inv.command = m.at("command").get<std::string>();
  inv.seed = m.at("seed").get<std::uint64_t>();
  inv.threads = m.at("threads").get<int>();
  inv.full = m.at("full").get<bool>();
  inv.out_dir = m.at("out_dir").get<std::string>();
  for (const auto& [k, v] : m.at("options").items())
    inv.options[k] = v.get<std::string>();
  return inv;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"D-P tree copula estimation toolkit"};
  app.require_subcommand(1);

  Invocation inv;
  app.add_option("--seed", inv.seed, "root RNG seed")->capture_default_str();
  app.add_option("--threads", inv.threads, "worker threads")
      ->capture_default_str();
  app.add_option("--out", inv.out_dir, "output directory")
      ->capture_default_str();
  app.add_flag("--full", inv.full, "paper-scale run (slow)");

  std::string fit_input, fit_schedule = "canonical", fit_norm = "none",
                         fit_output = "fit_grid.csv";
  int fit_level = 8;
  CLI::App* fit = app.add_subcommand("fit", "posterior-mean grid from points");
  fit->add_option("--input", fit_input, "points CSV (u,v)")->required();
  fit->add_option("--level", fit_level, "partition level M")
      ->capture_default_str();
  fit->add_option("--schedule", fit_schedule, "canonical | zm2:<z> | const:<v>")
      ->capture_default_str();
  fit->add_option("--normalize", fit_norm, "none | ipf | pit")
      ->capture_default_str();
  fit->add_option("--output", fit_output, "grid CSV name")
      ->capture_default_str();

  std::string sm_points, sm_grid, sm_mode = "mean", sm_schedule = "canonical",
                                  sm_output = "samples.csv";
  int sm_level = 8;
  std::size_t sm_n = 1000;
  CLI::App* smp = app.add_subcommand("sample", "predictive draws");
  smp->add_option("--points", sm_points, "points CSV to build a posterior");
  smp->add_option("--grid", sm_grid, "grid CSV to draw from");
  smp->add_option("--level", sm_level, "partition level M")
      ->capture_default_str();
  smp->add_option("--schedule", sm_schedule, "hyper-parameter schedule")
      ->capture_default_str();
  smp->add_option("--n", sm_n, "number of draws")->capture_default_str();
  smp->add_option("--mode", sm_mode, "mean | single")->capture_default_str();
  smp->add_option("--output", sm_output, "points CSV name")
      ->capture_default_str();

  std::string sim_config;
  CLI::App* sim = app.add_subcommand("simulate", "run an experiment config");
  sim->add_option("--config", sim_config, "experiment JSON")->required();

  std::string fin_a, fin_b, fin_mode = "cv", fin_config;
  CLI::App* fin = app.add_subcommand("finance", "GARCH + copula pipeline");
  fin->add_option("--prices-a", fin_a, "price CSV (date,price)")->required();
  fin->add_option("--prices-b", fin_b, "price CSV (date,price)")->required();
  fin->add_option("--mode", fin_mode, "cv | rolling")->capture_default_str();
  fin->add_option("--config", fin_config, "finance JSON config");

  std::string rerun_manifest;
  CLI::App* rerun = app.add_subcommand("rerun", "re-execute a run manifest");
  rerun->add_option("manifest", rerun_manifest, "manifest JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (fit->parsed()) {
      inv.command = "fit";
      inv.options = {{"input", fit_input},
                     {"level", std::to_string(fit_level)},
                     {"schedule", fit_schedule},
                     {"normalize", fit_norm},
                     {"output", fit_output}};
    } else if (smp->parsed()) {
      inv.command = "sample";
      inv.options = {{"points", sm_points},
                     {"grid", sm_grid},
                     {"level", std::to_string(sm_level)},
                     {"schedule", sm_schedule},
                     {"n", std::to_string(sm_n)},
                     {"mode", sm_mode},
                     {"output", sm_output}};
    } else if (sim->parsed()) {
      inv.command = "simulate";
      inv.options = {{"config", sim_config}};
    } else if (fin->parsed()) {
      inv.command = "finance";
      inv.options = {{"prices_a", fin_a},
                     {"prices_b", fin_b},
                     {"mode", fin_mode},
                     {"config", fin_config}};
    } else if (rerun->parsed()) {
      Invocation stored = load_manifest(rerun_manifest);
      run_invocation(stored);
      return 0;
    }
    run_invocation(inv);
    return 0;
  } catch (const usage_error& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const data_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const numeric_error& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 4;
  } catch (const json::exception& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
