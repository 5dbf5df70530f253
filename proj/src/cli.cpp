#include "movsrc/cli.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>

#include "movsrc/adsm.hpp"
#include "movsrc/bayes.hpp"
#include "movsrc/config.hpp"
#include "movsrc/experiments.hpp"
#include "movsrc/forward.hpp"
#include "movsrc/parallel.hpp"

namespace movsrc {
namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Flags {
  std::optional<std::string> scenario;
  std::optional<std::string> config;
  std::optional<std::string> geometry;
  std::optional<double> noise;
  std::optional<std::uint64_t> seed;
  std::optional<int> grid;
  std::vector<double> bounds;
  std::optional<std::string> model;
  std::optional<int> samples;
  std::optional<double> beta;
  std::optional<double> sigma_prop;
  std::optional<double> prior_var;
  std::optional<double> w_mean;
  std::optional<double> w_var;
  std::optional<int> peaks;
  std::optional<double> r_min;
  std::optional<double> floor;
  bool corrected = false;
  bool uniform_prior = false;
  bool dump_chains = false;
  bool no_slices = false;
  int repeat = 1;
  unsigned threads = 0;

  std::optional<std::string> out;
  std::string record;
  std::string coarse;
  std::string path;
  int period = 1;
  std::vector<int> z_index;
};

std::filesystem::path output_dir(const Flags& f) {
  if (f.out) return *f.out;
  if (const char* env = std::getenv("MOVSRC_OUT_DIR"); env && *env) return env;
  throw UsageError("no output directory: pass --out or set MOVSRC_OUT_DIR");
}

SamplingGrid grid_from_flags(const Flags& f, const SamplingGrid& base) {
  Point3 lo = base.lower();
  Point3 hi = base.upper();
  if (f.bounds.size() == 2) {
    lo = {f.bounds[0], f.bounds[0], f.bounds[0]};
    hi = {f.bounds[1], f.bounds[1], f.bounds[1]};
  } else if (f.bounds.size() == 6) {
    lo = {f.bounds[0], f.bounds[1], f.bounds[2]};
    hi = {f.bounds[3], f.bounds[4], f.bounds[5]};
  } else if (!f.bounds.empty()) {
    throw UsageError("--bounds takes LO,HI or LX,LY,LZ,HX,HY,HZ");
  }
  return SamplingGrid(lo, hi, f.grid.value_or(base.n()));
}

void apply_method_flags(const Flags& f, ScenarioConfig& cfg) {
  if (f.peaks) cfg.adsm.peaks = *f.peaks;
  if (f.r_min) cfg.adsm.r_min = *f.r_min;
  if (f.floor) cfg.adsm.floor = *f.floor;
  if (f.samples) cfg.mcmc.samples = *f.samples;
  if (f.beta) cfg.mcmc.beta = *f.beta;
  if (f.sigma_prop) cfg.mcmc.sigma_prop = *f.sigma_prop;
  if (f.prior_var) cfg.mcmc.prior_var = *f.prior_var;
  if (f.w_mean) cfg.mcmc.w_mean = *f.w_mean;
  if (f.w_var) cfg.mcmc.w_var = *f.w_var;
  if (f.corrected) cfg.mcmc.corrected = true;
  if (f.uniform_prior) {
    cfg.mcmc.prior = PriorFamily::uniform_box;
    cfg.mcmc.seed_from_adsm = false;
  }
  if (f.seed) cfg.seed = *f.seed;
}

// Scenario from --scenario/--config plus overrides; every invalid value is a
// usage error.
ScenarioConfig assemble(const Flags& f) {
  try {
    ScenarioConfig cfg;
    if (f.config) {
      cfg = load_scenario(*f.config);
      if (f.geometry) {
        cfg.sensors = build_sensor_set(*f.geometry);
        cfg.time = TimeGrid(cfg.time.terminal_time(), cfg.time.period(),
                            default_samples_per_period(*f.geometry));
      }
    } else if (f.scenario) {
      cfg = build_scenario(*f.scenario, f.geometry.value_or("S1"), 41);
    } else {
      throw UsageError("one of --scenario or --config is required");
    }
    cfg.grid = grid_from_flags(f, cfg.grid);
    if (f.noise) cfg.noise_level = *f.noise;
    if (f.model) cfg.model = parse_field_model(*f.model);
    apply_method_flags(f, cfg);
    cfg.validate();
    return cfg;
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }
}

// Method options for commands that read a record instead of a scenario.
ScenarioConfig method_config(const Flags& f) {
  try {
    ScenarioConfig cfg;
    cfg.grid = grid_from_flags(f, cfg.grid);
    apply_method_flags(f, cfg);
    if (cfg.adsm.peaks < 1) throw ConfigError("--peaks must be >= 1");
    if (!(cfg.adsm.r_min >= 0.0)) throw ConfigError("--rmin must be >= 0");
    if (!(cfg.adsm.floor >= 0.0)) throw ConfigError("--floor must be >= 0");
    if (cfg.mcmc.samples < 1) throw ConfigError("--K must be >= 1");
    if (!(cfg.mcmc.beta >= 0.0 && cfg.mcmc.beta <= 1.0)) throw ConfigError("--beta must lie in [0, 1]");
    if (!(cfg.mcmc.sigma_prop > 0.0)) throw ConfigError("--sigma-prop must be > 0");
    if (!(cfg.mcmc.prior_var > 0.0)) throw ConfigError("--prior-var must be > 0");
    if (!(cfg.mcmc.w_var > 0.0)) throw ConfigError("--w-var must be > 0");
    return cfg;
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }
}

std::filesystem::path require_path(const std::string& value, std::string_view flag) {
  if (value.empty()) throw UsageError(fmt::format("{} is required", flag));
  return value;
}

FieldRecord load_record(const std::string& dir) {
  return read_record(require_path(dir, "--record"));
}

std::set<int> slice_planes(const IndicatorField& field, const SamplingGrid& grid,
                           const std::vector<int>& requested) {
  std::set<int> planes;
  for (int k : requested) {
    if (k < 0 || k >= grid.n()) throw UsageError(fmt::format("--z-index {} out of range", k));
    planes.insert(k);
  }
  if (planes.empty())
    planes.insert(static_cast<int>(field.argmax() % static_cast<std::size_t>(grid.n())));
  return planes;
}

int cmd_simulate(const Flags& f) {
  const ScenarioConfig cfg = assemble(f);
  const auto dir = output_dir(f);
  const FieldRecord clean = simulate_record(cfg, cfg.model, f.threads);
  const FieldRecord noisy = add_noise(clean, cfg.noise_level, derive_seed(cfg.seed, 0, 0));
  std::filesystem::create_directories(dir);
  write_record(noisy, dir);
  std::ofstream(dir / "scenario.cfg") << format_scenario(cfg);
  for (std::size_t s = 0; s < cfg.sources.size(); ++s)
    write_trajectory(cfg.sources[s].path, cfg.time, dir / fmt::format("path_true_s{}.csv", s));
  return 0;
}

int cmd_adsm(const Flags& f) {
  const FieldRecord record = load_record(f.record);
  const ScenarioConfig cfg = method_config(f);
  const auto dir = output_dir(f);
  const CoarsePath coarse =
      run_adsm(record, cfg.grid, cfg.adsm.peaks, cfg.adsm.r_min, {cfg.adsm.floor, f.threads});
  std::filesystem::create_directories(dir);
  write_coarse_path(coarse, dir / "path_adsm.csv");
  return 0;
}

int cmd_invert(const Flags& f) {
  const FieldRecord record = load_record(f.record);
  const ScenarioConfig cfg = method_config(f);
  const CoarsePath coarse = read_coarse_path(require_path(f.coarse, "--coarse"));
  const auto dir = output_dir(f);
  RefinementOptions ro;
  ro.mcmc = cfg.mcmc;
  ro.support = cfg.mcmc.seed_from_adsm ? SupportBox::dilated(cfg.grid, 1.0)
                                       : SupportBox{cfg.grid.lower(), cfg.grid.upper()};
  ro.master_seed = cfg.seed;
  ro.keep_chains = f.dump_chains;
  ro.threads = f.threads;
  const RefinedPath refined = run_adsm_mcmc(record, coarse, ro);
  std::filesystem::create_directories(dir);
  write_refined_path(refined, dir / "path_mcmc.csv");
  if (f.dump_chains) {
    std::filesystem::create_directories(dir / "chains");
    for (std::size_t s = 0; s < refined.chains.size(); ++s)
      for (std::size_t j = 0; j < refined.chains[s].size(); ++j)
        write_chain(refined.chains[s][j],
                    dir / "chains" /
                        (s == 0 ? fmt::format("period_{}.csv", j + 1)
                                : fmt::format("period_{}_s{}.csv", j + 1, s)));
  }
  return 0;
}

int cmd_pipeline(const Flags& f, std::ostream& err) {
  ScenarioConfig cfg = assemble(f);
  const auto dir = output_dir(f);
  PipelineOptions options;
  options.threads = f.threads;
  options.dump_chains = f.dump_chains;
  options.write_slices = !f.no_slices;
  if (f.repeat < 1) throw UsageError("--repeat must be >= 1");
  if (f.repeat == 1) {
    const auto report = run_pipeline(cfg, dir, options);
    for (const auto& m : report.mcmc_metrics)
      err << fmt::format("source {}: adsm mean error {:.4f}, mcmc mean error {:.4f}\n", m.source,
                         report.adsm_metrics[m.source].mean, m.mean);
    return 0;
  }
  // Independent noise realizations with consecutive master seeds.
  std::vector<std::vector<double>> adsm(cfg.sources.size()), mcmc(cfg.sources.size());
  const std::uint64_t base = cfg.seed;
  for (int r = 0; r < f.repeat; ++r) {
    cfg.seed = base + static_cast<std::uint64_t>(r);
    const auto report = run_pipeline(cfg, dir / fmt::format("rep_{}", r), options);
    for (const auto& m : report.adsm_metrics) adsm[m.source].push_back(m.mean);
    for (const auto& m : report.mcmc_metrics) mcmc[m.source].push_back(m.mean);
  }
  std::ofstream summary(dir / "repeat_summary.txt");
  auto emit = [&summary](std::string_view method, std::size_t s, const std::vector<double>& v) {
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    const double sd = v.size() > 1 ? std::sqrt(var / static_cast<double>(v.size() - 1)) : 0.0;
    summary << fmt::format("{}.s{}.mean_error.mean = {}\n", method, s, format_double(mean));
    summary << fmt::format("{}.s{}.mean_error.std = {}\n", method, s, format_double(sd));
  };
  summary << "repeats = " << f.repeat << '\n';
  for (std::size_t s = 0; s < adsm.size(); ++s) {
    if (!adsm[s].empty()) emit("adsm", s, adsm[s]);
    if (!mcmc[s].empty()) emit("mcmc", s, mcmc[s]);
  }
  return 0;
}

int cmd_metrics(const Flags& f, std::ostream& out) {
  const ScenarioConfig cfg = assemble(f);
  const auto tracks = read_path_tracks(require_path(f.path, "--path"));
  std::vector<PathMetrics> metrics;
  try {
    metrics = path_error(tracks, cfg);
  } catch (const ConfigError& e) {
    throw std::runtime_error(e.what());
  }
  for (const auto& m : metrics) {
    out << fmt::format("s{}.track = {}\n", m.source, m.track);
    out << fmt::format("s{}.mean_error = {}\n", m.source, format_double(m.mean));
    out << fmt::format("s{}.max_error = {}\n", m.source, format_double(m.max));
    out << fmt::format("s{}.rmse = {}\n", m.source, format_double(m.rmse));
  }
  return 0;
}

int cmd_export_slices(const Flags& f) {
  const FieldRecord record = load_record(f.record);
  const ScenarioConfig cfg = method_config(f);
  if (f.period < 1 || f.period > record.time().periods())
    throw UsageError(fmt::format("--period must lie in [1, {}]", record.time().periods()));
  const auto dir = output_dir(f);
  const IndicatorField field = sweep(record, cfg.grid, f.period, {cfg.adsm.floor, f.threads});
  std::filesystem::create_directories(dir);
  for (int k : slice_planes(field, cfg.grid, f.z_index))
    write_indicator_slice(field, k, dir / fmt::format("indicator_j{}_z{}.csv", f.period, k));
  return 0;
}

int cmd_bench(const Flags& f, std::ostream& out) {
  Flags g = f;
  if (!g.scenario && !g.config) g.scenario = "ex1";
  if (!g.grid) g.grid = 101;
  const ScenarioConfig cfg = assemble(g);
  const FieldRecord record = simulate_record(cfg, cfg.model, f.threads);
  const auto start = std::chrono::steady_clock::now();
  const IndicatorField field = sweep(record, cfg.grid, 1, {cfg.adsm.floor, f.threads});
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const auto points = static_cast<double>(cfg.grid.size());
  out << fmt::format("grid = {}^3\npoints = {}\nthreads = {}\nwall_s = {:.3f}\npoints_per_s = {:.0f}\n",
                     cfg.grid.n(), cfg.grid.size(), resolve_threads(f.threads), wall,
                     points / wall);
  out << fmt::format("argmax = {}\n", field.argmax());
  return 0;
}

void scenario_flags(CLI::App& cmd, Flags& f) {
  cmd.add_option("--scenario", f.scenario, "ex1|ex2|ex3|static or a full id");
  cmd.add_option("--config", f.config, "scenario file (key = value)");
  cmd.add_option("--geometry", f.geometry, "sensor set S1|S2|S3");
  cmd.add_option("--noise", f.noise, "relative noise level epsilon");
  cmd.add_option("--model", f.model, "forward model: quasistatic|lw");
}

void grid_flags(CLI::App& cmd, Flags& f) {
  cmd.add_option("--grid", f.grid, "lattice points per axis (default 41)");
  cmd.add_option("--bounds", f.bounds, "box LO,HI or LX,LY,LZ,HX,HY,HZ")->delimiter(',');
  cmd.add_option("--floor", f.floor, "relative denominator floor of the indicator");
}

void adsm_flags(CLI::App& cmd, Flags& f) {
  cmd.add_option("--peaks", f.peaks, "peaks per period (number of sources)");
  cmd.add_option("--rmin", f.r_min, "peak suppression radius");
}

void mcmc_flags(CLI::App& cmd, Flags& f) {
  cmd.add_option("--K", f.samples, "chain length");
  cmd.add_option("--beta", f.beta, "proposal anchor weight in [0, 1]");
  cmd.add_option("--sigma-prop", f.sigma_prop, "proposal standard deviation");
  cmd.add_option("--prior-var", f.prior_var, "isotropic prior variance");
  cmd.add_option("--w-mean", f.w_mean, "noise mean");
  cmd.add_option("--w-var", f.w_var, "noise variance");
  cmd.add_flag("--corrected", f.corrected, "include the proposal-density ratio");
  cmd.add_flag("--uniform-prior", f.uniform_prior,
               "uniform prior and proposals over the box, no ADSM seeding");
  cmd.add_flag("--dump-chains", f.dump_chains, "write chains/period_<j>.csv");
}

void common_flags(CLI::App& cmd, Flags& f) {
  cmd.add_option("--out", f.out, "output directory (default $MOVSRC_OUT_DIR)");
  cmd.add_option("--threads", f.threads, "worker threads (0 = all cores)");
  cmd.add_option("--seed", f.seed, "master seed");
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Flags f;
  CLI::App app{"Moving point source reconstruction", "movsrc"};
  app.require_subcommand(1);

  auto* simulate = app.add_subcommand("simulate", "simulate a noisy record for a scenario");
  scenario_flags(*simulate, f);
  common_flags(*simulate, f);

  auto* adsm = app.add_subcommand("adsm", "sample a record and write the coarse path");
  adsm->add_option("--record", f.record, "record directory")->required();
  grid_flags(*adsm, f);
  adsm_flags(*adsm, f);
  common_flags(*adsm, f);

  auto* invert = app.add_subcommand("invert", "refine a coarse path by MCMC");
  invert->add_option("--record", f.record, "record directory")->required();
  invert->add_option("--coarse", f.coarse, "coarse path CSV")->required();
  grid_flags(*invert, f);
  mcmc_flags(*invert, f);
  common_flags(*invert, f);

  auto* pipeline = app.add_subcommand("pipeline", "simulate, sample, refine and score");
  scenario_flags(*pipeline, f);
  grid_flags(*pipeline, f);
  adsm_flags(*pipeline, f);
  mcmc_flags(*pipeline, f);
  common_flags(*pipeline, f);
  pipeline->add_flag("--no-slices", f.no_slices, "skip indicator slice export");
  pipeline->add_option("--repeat", f.repeat, "noise realizations (consecutive seeds)");

  auto* metrics = app.add_subcommand("metrics", "score a path CSV against a scenario");
  metrics->add_option("--path", f.path, "path CSV")->required();
  scenario_flags(*metrics, f);

  auto* slices = app.add_subcommand("export-slices", "write indicator cross-sections");
  slices->add_option("--record", f.record, "record directory")->required();
  slices->add_option("--period", f.period, "period index j");
  slices->add_option("--z-index", f.z_index, "z plane index (default: plane of the maximum)");
  grid_flags(*slices, f);
  common_flags(*slices, f);

  auto* bench = app.add_subcommand("bench", "time a single-period sweep");
  scenario_flags(*bench, f);
  grid_flags(*bench, f);
  bench->add_option("--threads", f.threads, "worker threads (0 = all cores)");

  try {
    app.parse(std::vector<std::string>(args.rbegin(), args.rend()));
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "movsrc: " << e.what() << "\n" << app.help();
    return 2;
  }

  try {
    if (simulate->parsed()) return cmd_simulate(f);
    if (adsm->parsed()) return cmd_adsm(f);
    if (invert->parsed()) return cmd_invert(f);
    if (pipeline->parsed()) return cmd_pipeline(f, err);
    if (metrics->parsed()) return cmd_metrics(f, out);
    if (slices->parsed()) return cmd_export_slices(f);
    if (bench->parsed()) return cmd_bench(f, out);
  } catch (const UsageError& e) {
    err << "movsrc: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "movsrc: error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

int dispatch(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return dispatch(args, std::cout, std::cerr);
}

}  // namespace movsrc
