#pragma once

// Scenario configuration: physical constants, sources, sensors,
// discretizations and solver options, plus the key-value file format.
//
// File format: one `key = value` per line, `#` starts a comment, blank lines
// ignored, unknown keys are an error. Lists are whitespace separated; point
// lists separate points with `,`. Keys:
//
//   c                          wave speed
//   time.terminal              T
//   time.period                p (also the pulse period)
//   time.samples_per_period    N_p (defaults to the sensor set's value)
//   sensors.set                S1 | S2 | S3
//   sensors.positions          x y z, x y z, ...   (custom aperture)
//   grid.lower / grid.upper    x y z
//   grid.n                     points per axis
//   noise.level                epsilon
//   seed                       master seed
//   forward.model              quasistatic | lw
//   sources                    number of sources
//   source.<i>.kind            c-shape | bow-shape | circle-arc | line | static | piecewise-linear
//   source.<i>.params          closed-form coefficients (see trajectory_params)
//   source.<i>.samples         t x y z, t x y z, ...   (piecewise-linear)
//   source.<i>.f0              pulse central frequency
//   source.<i>.amplitude       pulse amplitude
//   adsm.floor                 relative denominator floor
//   adsm.peaks                 peaks per period (M)
//   adsm.r_min                 minimum peak separation
//   mcmc.samples               K
//   mcmc.beta                  proposal anchor weight
//   mcmc.sigma_prop            proposal standard deviation
//   mcmc.prior                 normal | uniform
//   mcmc.prior_var             diagonal of the prior covariance
//   mcmc.w_mean / mcmc.w_var   per-entry noise mean and variance
//   mcmc.corrected             true | false  (proposal-density correction)
//   mcmc.seed_from_adsm        true | false

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "movsrc/core.hpp"

namespace movsrc {

enum class FieldModel { quasistatic, lienard_wiechert };

std::string_view to_string(FieldModel model);
FieldModel parse_field_model(std::string_view text);

enum class PriorFamily { normal, uniform_box };

struct SourceSpec {
  Trajectory path;
  Pulse pulse;
};

struct AdsmOptions {
  double floor = 1e-14;
  int peaks = 1;
  double r_min = 1.0;
};

struct McmcOptions {
  int samples = 5000;
  double beta = 1.0;
  double sigma_prop = 0.1;
  PriorFamily prior = PriorFamily::normal;
  double prior_var = 0.2;
  double w_mean = 1e-4;
  double w_var = 1e-3;
  bool corrected = false;
  // false: uniform prior with uniform independence proposals over the box,
  // no seeding from the sampling step.
  bool seed_from_adsm = true;
};

struct ScenarioConfig {
  std::string id = "custom";
  double c = 330.0;
  std::vector<SourceSpec> sources;
  SensorArray sensors = build_sensor_set("S1");
  TimeGrid time{4.0, 0.1, 12};
  SamplingGrid grid{{-5, -5, -5}, {5, 5, 5}, 41};
  double noise_level = 0.0;
  std::uint64_t seed = 1;
  FieldModel model = FieldModel::quasistatic;
  AdsmOptions adsm;
  McmcOptions mcmc;

  /// Throws ConfigError on the first violated invariant.
  void validate() const;
};

/// Coefficients of a closed-form trajectory in the order used by
/// `source.<i>.params`.
std::vector<double> trajectory_params(const Trajectory& traj);
Trajectory make_trajectory(std::string_view kind, const std::vector<double>& params,
                           double t_end);

ScenarioConfig parse_scenario(std::string_view text);
ScenarioConfig load_scenario(const std::filesystem::path& file);
/// Inverse of parse_scenario (17 significant digits).
std::string format_scenario(const ScenarioConfig& config);

/// Independent stream seed derived from a master seed: splitmix64 of
/// master ^ (stream << 32) ^ index. Streams: 0 noise, 1 + s chains of source s.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t index);

// Shared helpers for the text formats.
std::string format_double(double v);
double parse_double(std::string_view text, std::string_view what);
long long parse_integer(std::string_view text, std::string_view what);
std::string trim(std::string_view s);

}  // namespace movsrc
