#include "movsrc/experiments.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <set>

namespace movsrc {

std::string canonical_scenario_id(std::string_view id) {
  if (id == "ex1" || id == "ex1-cshape") return "ex1-cshape";
  if (id == "ex2" || id == "ex2-bow") return "ex2-bow";
  if (id == "ex3" || id == "ex3-two-sources") return "ex3-two-sources";
  if (id == "static" || id == "static-debug") return "static-debug";
  throw ConfigError(fmt::format("unknown scenario '{}' (ex1-cshape|ex2-bow|ex3-two-sources|static-debug)", id));
}

ScenarioConfig build_scenario(std::string_view id, std::string_view geometry, int grid_n) {
  ScenarioConfig cfg;
  cfg.id = canonical_scenario_id(id);
  cfg.c = 330.0;
  constexpr double T = 4.0;
  constexpr double p = 0.1;
  constexpr double f0 = 100.0;
  cfg.sensors = build_sensor_set(geometry);
  cfg.time = TimeGrid(T, p, default_samples_per_period(geometry));
  cfg.grid = SamplingGrid({-5, -5, -5}, {5, 5, 5}, grid_n);
  cfg.mcmc.samples = 5000;
  cfg.mcmc.w_mean = 1e-4;
  cfg.mcmc.w_var = 1e-3;
  cfg.mcmc.prior_var = 0.2;
  const Pulse pulse(f0, p);

  if (cfg.id == "ex1-cshape") {
    // (1.5 + 3 cos(4 - t), 2 + 3 sin(2 + t), 1.2 - 4 sin(t / 2))
    cfg.sources.push_back(
        {Trajectory(CShapePath{{1.5, 2.0, 1.2}, 3.0, 4.0, 1.0, 3.0, 2.0, 1.0, -4.0, 0.5}, T),
         pulse});
  } else if (cfg.id == "ex2-bow") {
    // (3 - 1.6 t, 0.2 + 2.6 sin(1.25 t), -0.3 - 2.1 sin(1.75 t))
    cfg.sources.push_back(
        {Trajectory(BowPath{{3.0, 0.2, -0.3}, -1.6, 2.6, 1.25, -2.1, 1.75}, T), pulse});
  } else if (cfg.id == "ex3-two-sources") {
    // z1 = (2 - 2 cos(4 - 0.5 t), 1 + 3 sin(2 + t), 2); z2 = (-4, -3 + 1.3 t, 1.5)
    cfg.sources.push_back(
        {Trajectory(CShapePath{{2.0, 1.0, 2.0}, -2.0, 4.0, 0.5, 3.0, 2.0, 1.0, 0.0, 0.0}, T),
         pulse});
    cfg.sources.push_back({Trajectory(LinePath{{-4.0, -3.0, 1.5}, {0.0, 1.3, 0.0}}, T), pulse});
    cfg.mcmc.prior_var = 0.4;
    cfg.adsm.peaks = 2;
  } else {
    cfg.sources.push_back({Trajectory(StaticPoint{{1.0, -1.5, 0.5}}, T), pulse});
  }
  cfg.validate();
  return cfg;
}

std::vector<Point3> midpoint_truth(const ScenarioConfig& scenario, std::size_t source) {
  std::vector<Point3> out;
  const auto& path = scenario.sources.at(source).path;
  for (int j = 1; j <= scenario.time.periods(); ++j)
    out.push_back(path.position(scenario.time.period_midpoint(j)));
  return out;
}

void write_trajectory(const Trajectory& path, const TimeGrid& time,
                      const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", file.string()));
  out << "j,t_mid,x,y,z\n";
  for (int j = 1; j <= time.periods(); ++j) {
    const double t = time.period_midpoint(j);
    const Point3 q = path.position(t);
    out << fmt::format("{},{},{},{},{}\n", j, format_double(t), format_double(q.x),
                       format_double(q.y), format_double(q.z));
  }
}

PathMetrics metrics_against(const std::vector<Point3>& track, const std::vector<Point3>& truth) {
  if (track.size() != truth.size() || track.empty())
    throw ConfigError(fmt::format("path has {} periods, expected {}", track.size(), truth.size()));
  PathMetrics m;
  double sq = 0.0;
  for (std::size_t j = 0; j < track.size(); ++j) {
    const double e = distance(track[j], truth[j]);
    m.errors.push_back(e);
    m.max = std::max(m.max, e);
    sq += e * e;
  }
  const auto n = static_cast<double>(track.size());
  m.mean = std::accumulate(m.errors.begin(), m.errors.end(), 0.0) / n;
  m.rmse = std::sqrt(sq / n);
  return m;
}

std::vector<PathMetrics> path_error(const std::vector<std::vector<Point3>>& tracks,
                                    const ScenarioConfig& scenario) {
  if (tracks.empty()) throw ConfigError("no reconstructed tracks");
  const std::size_t sources = scenario.sources.size();
  std::vector<std::vector<Point3>> truth;
  for (std::size_t s = 0; s < sources; ++s) truth.push_back(midpoint_truth(scenario, s));

  // cost[s][t]
  std::vector<std::vector<PathMetrics>> table(sources);
  for (std::size_t s = 0; s < sources; ++s)
    for (std::size_t t = 0; t < tracks.size(); ++t) {
      table[s].push_back(metrics_against(tracks[t], truth[s]));
      table[s].back().source = s;
      table[s].back().track = t;
    }

  // Brute-force assignment over permutations of the larger index set.
  const std::size_t matched = std::min(sources, tracks.size());
  std::vector<std::size_t> perm(std::max(sources, tracks.size()));
  std::iota(perm.begin(), perm.end(), 0);
  double best_cost = std::numeric_limits<double>::infinity();
  std::vector<std::pair<std::size_t, std::size_t>> best;
  std::set<std::vector<std::pair<std::size_t, std::size_t>>> seen;
  do {
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    double cost = 0.0;
    for (std::size_t i = 0; i < matched; ++i) {
      const std::size_t s = sources <= tracks.size() ? i : perm[i];
      const std::size_t t = sources <= tracks.size() ? perm[i] : i;
      pairs.emplace_back(s, t);
      cost += table[s][t].mean;
    }
    if (cost < best_cost) {
      best_cost = cost;
      best = pairs;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));

  std::sort(best.begin(), best.end());
  std::vector<PathMetrics> out;
  for (const auto& [s, t] : best) out.push_back(table[s][t]);
  return out;
}

std::vector<std::vector<Point3>> positions(const std::vector<std::vector<PathPoint>>& tracks) {
  std::vector<std::vector<Point3>> out;
  for (const auto& track : tracks) {
    auto& dst = out.emplace_back();
    for (const auto& p : track) dst.push_back(p.position);
  }
  return out;
}

std::vector<std::vector<Point3>> read_path_tracks(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError(fmt::format("cannot open '{}'", file.string()));
  std::string line;
  std::getline(in, line);
  const std::string header = trim(line);
  if (header != "j,source_id,x,y,z" && header != "j,source_id,x,y,z,indicator_value")
    throw ConfigError(fmt::format("{}: unexpected header '{}'", file.string(), header));
  std::map<std::pair<int, int>, Point3> rows;
  int max_j = 0;
  int max_s = -1;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
      const auto comma = line.find(',', start);
      cells.push_back(line.substr(start, comma == std::string::npos ? std::string::npos
                                                                     : comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (cells.size() < 5)
      throw ConfigError(fmt::format("{}:{}: expected at least 5 columns", file.string(), lineno));
    const int j = static_cast<int>(parse_integer(cells[0], "j"));
    const int s = static_cast<int>(parse_integer(cells[1], "source_id"));
    if (j < 1 || s < 0) throw ConfigError(fmt::format("{}:{}: bad index", file.string(), lineno));
    rows[{s, j}] = {parse_double(cells[2], "x"), parse_double(cells[3], "y"),
                    parse_double(cells[4], "z")};
    max_j = std::max(max_j, j);
    max_s = std::max(max_s, s);
  }
  std::vector<std::vector<Point3>> tracks(static_cast<std::size_t>(max_s + 1));
  for (int s = 0; s <= max_s; ++s)
    for (int j = 1; j <= max_j; ++j) {
      auto it = rows.find({s, j});
      if (it == rows.end())
        throw ConfigError(fmt::format("{}: missing row j={} source_id={}", file.string(), j, s));
      tracks[static_cast<std::size_t>(s)].push_back(it->second);
    }
  return tracks;
}

// ---------------------------------------------------------------------------
// Pipeline
// ---------------------------------------------------------------------------

namespace {

struct Stages {
  FieldRecord record;
  PipelineReport report;
};

Stages run_stages(const ScenarioConfig& cfg, const PipelineOptions& options, bool keep_chains) {
  cfg.validate();
  const FieldRecord clean = simulate_record(cfg, cfg.model, options.threads);
  FieldRecord noisy = add_noise(clean, cfg.noise_level, derive_seed(cfg.seed, 0, 0));

  PipelineReport report;
  report.coarse = run_adsm(noisy, cfg.grid, cfg.adsm.peaks, cfg.adsm.r_min,
                           {cfg.adsm.floor, options.threads});
  RefinementOptions ro;
  ro.mcmc = cfg.mcmc;
  ro.support = cfg.mcmc.seed_from_adsm ? SupportBox::dilated(cfg.grid, 1.0)
                                       : SupportBox{cfg.grid.lower(), cfg.grid.upper()};
  ro.master_seed = cfg.seed;
  ro.keep_chains = keep_chains;
  ro.threads = options.threads;
  report.refined = run_adsm_mcmc(noisy, report.coarse, ro);
  report.adsm_metrics = path_error(positions(report.coarse.tracks), cfg);
  report.mcmc_metrics = path_error(report.refined.tracks, cfg);
  return {std::move(noisy), std::move(report)};
}

void write_metrics(const ScenarioConfig& cfg, const PipelineReport& report,
                   const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", file.string()));
  out << "scenario = " << cfg.id << '\n';
  out << "geometry = " << cfg.sensors.label() << '\n';
  out << "noise = " << format_double(cfg.noise_level) << '\n';
  out << "seed = " << cfg.seed << '\n';
  out << "grid = " << cfg.grid.n() << '\n';
  out << "model = " << to_string(cfg.model) << '\n';
  out << "periods = " << cfg.time.periods() << '\n';
  auto emit = [&out](std::string_view method, const std::vector<PathMetrics>& metrics) {
    for (const auto& m : metrics) {
      const std::string key = fmt::format("{}.s{}", method, m.source);
      out << key << ".track = " << m.track << '\n';
      out << key << ".mean_error = " << format_double(m.mean) << '\n';
      out << key << ".max_error = " << format_double(m.max) << '\n';
      out << key << ".rmse = " << format_double(m.rmse) << '\n';
    }
  };
  emit("adsm", report.adsm_metrics);
  emit("mcmc", report.mcmc_metrics);
  for (std::size_t s = 0; s < report.refined.acceptance.size(); ++s) {
    const auto& a = report.refined.acceptance[s];
    const double mean = a.empty() ? 0.0 : std::accumulate(a.begin(), a.end(), 0.0) / a.size();
    out << fmt::format("mcmc.track{}.acceptance_rate = {}\n", s, format_double(mean));
  }
}

void write_run(const ScenarioConfig& cfg, const Stages& stages, const PipelineOptions& options,
               const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream scenario(dir / "scenario.cfg");
    scenario << format_scenario(cfg);
  }
  write_record(stages.record, dir);
  for (std::size_t s = 0; s < cfg.sources.size(); ++s)
    write_trajectory(cfg.sources[s].path, cfg.time, dir / fmt::format("path_true_s{}.csv", s));
  const auto& report = stages.report;
  write_coarse_path(report.coarse, dir / "path_adsm.csv");
  write_refined_path(report.refined, dir / "path_mcmc.csv");
  write_metrics(cfg, report, dir / "metrics.txt");

  if (options.write_slices && !report.coarse.tracks.empty()) {
    const IndicatorField first =
        sweep(stages.record, cfg.grid, 1, {cfg.adsm.floor, options.threads});
    std::set<int> planes;
    for (const auto& track : report.coarse.tracks) {
      const std::size_t idx = cfg.grid.nearest_index(track.front().position);
      planes.insert(static_cast<int>(idx % static_cast<std::size_t>(cfg.grid.n())));
    }
    for (int k : planes)
      write_indicator_slice(first, k, dir / fmt::format("indicator_j1_z{}.csv", k));
  }
  if (options.dump_chains) {
    std::filesystem::create_directories(dir / "chains");
    for (std::size_t s = 0; s < report.refined.chains.size(); ++s)
      for (std::size_t j = 0; j < report.refined.chains[s].size(); ++j) {
        const std::string name = s == 0 ? fmt::format("period_{}.csv", j + 1)
                                        : fmt::format("period_{}_s{}.csv", j + 1, s);
        write_chain(report.refined.chains[s][j], dir / "chains" / name);
      }
  }
}

}  // namespace

PipelineReport run_pipeline(const ScenarioConfig& scenario, const PipelineOptions& options) {
  return run_stages(scenario, options, false).report;
}

PipelineReport run_pipeline(const ScenarioConfig& scenario, const std::filesystem::path& out,
                            const PipelineOptions& options) {
  if (out.empty()) return run_pipeline(scenario, options);
  Stages stages = run_stages(scenario, options, options.dump_chains);

  std::filesystem::path target = out;
  if (!target.has_filename()) target = target.parent_path();  // trailing slash
  std::filesystem::path partial = target;
  partial += ".partial";
  std::filesystem::remove_all(partial);
  try {
    write_run(scenario, stages, options, partial);
    std::filesystem::remove_all(target);
    std::filesystem::rename(partial, target);
  } catch (...) {
    std::error_code ec;
    std::filesystem::remove_all(partial, ec);
    throw;
  }
  return std::move(stages.report);
}

}  // namespace movsrc
