#pragma once

// Built-in reconstruction scenarios, path error metrics and the end-to-end
// pipeline that writes a run directory:
//
//   scenario.cfg               resolved configuration
//   record.csv, record.meta    noisy measurements
//   path_true_s<k>.csv         exact path per source ("j,t_mid,x,y,z")
//   path_adsm.csv              coarse path ("j,source_id,x,y,z,indicator_value")
//   path_mcmc.csv              refined path ("j,source_id,x,y,z")
//   indicator_j<j>_z<k>.csv    indicator cross-sections
//   chains/period_<j>.csv      chain dumps of source 0 (period_<j>_s<k>.csv for k > 0)
//   metrics.txt                key-value error summary

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "movsrc/adsm.hpp"
#include "movsrc/bayes.hpp"
#include "movsrc/config.hpp"
#include "movsrc/forward.hpp"

namespace movsrc {

/// Canonical scenario id for an id or alias (ex1, ex2, ex3, static).
std::string canonical_scenario_id(std::string_view id);

/// Scenario "ex1-cshape", "ex2-bow", "ex3-two-sources" or "static-debug" on
/// sensor set `geometry` with its default samples per period.
ScenarioConfig build_scenario(std::string_view id, std::string_view geometry = "S1",
                              int grid_n = 41);

/// Exact positions of source s at the period midpoints (j - 1/2) p.
std::vector<Point3> midpoint_truth(const ScenarioConfig& scenario, std::size_t source);

void write_trajectory(const Trajectory& path, const TimeGrid& time,
                      const std::filesystem::path& file);

struct PathMetrics {
  std::size_t source = 0;  // true source index
  std::size_t track = 0;   // matched reconstructed track
  std::vector<double> errors;
  double mean = 0.0;
  double max = 0.0;
  double rmse = 0.0;
};

PathMetrics metrics_against(const std::vector<Point3>& track, const std::vector<Point3>& truth);

/// Per-source errors against the midpoint truth. Tracks are matched to
/// sources by the assignment with the least total mean error.
std::vector<PathMetrics> path_error(const std::vector<std::vector<Point3>>& tracks,
                                    const ScenarioConfig& scenario);

std::vector<std::vector<Point3>> positions(const std::vector<std::vector<PathPoint>>& tracks);

/// Reads tracks from a path CSV ("j,source_id,x,y,z[,indicator_value]").
std::vector<std::vector<Point3>> read_path_tracks(const std::filesystem::path& file);

struct PipelineOptions {
  unsigned threads = 0;
  bool dump_chains = false;
  bool write_slices = true;
};

struct PipelineReport {
  CoarsePath coarse;
  RefinedPath refined;
  std::vector<PathMetrics> adsm_metrics;
  std::vector<PathMetrics> mcmc_metrics;
};

/// Simulate, add noise, sample, refine and score a scenario. When `out` is
/// non-empty the artifacts are written there; a failed run leaves no
/// partial directory behind.
PipelineReport run_pipeline(const ScenarioConfig& scenario, const std::filesystem::path& out,
                            const PipelineOptions& options = {});

/// Pipeline stages without any file output.
PipelineReport run_pipeline(const ScenarioConfig& scenario, const PipelineOptions& options = {});

}  // namespace movsrc
