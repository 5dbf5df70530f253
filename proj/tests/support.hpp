#pragma once

// Small fixtures shared by the unit and acceptance tests.

#include <cmath>
#include <filesystem>
#include <random>
#include <string>

#include "movsrc/config.hpp"
#include "movsrc/core.hpp"
#include "movsrc/forward.hpp"

namespace movsrc::testing {

/// Fresh, empty scratch directory under the system temp directory.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("movsrc_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// max |lambda'| over a dense sample of one period.
inline double max_abs_derivative(const Pulse& pulse, int samples = 200001) {
  double best = 0.0;
  for (int i = 0; i < samples; ++i) {
    const double t = pulse.period() * i / (samples - 1);
    best = std::max(best, std::abs(pulse.derivative(t)));
  }
  return best;
}

/// Scenario with static sources at `positions` on the given aperture.
inline ScenarioConfig static_scenario(std::vector<Point3> positions, std::string_view geometry,
                                      int grid_n, double terminal = 0.4) {
  ScenarioConfig cfg;
  cfg.id = "static-test";
  cfg.sensors = build_sensor_set(geometry);
  cfg.time = TimeGrid(terminal, 0.1, default_samples_per_period(geometry));
  cfg.grid = SamplingGrid({-5, -5, -5}, {5, 5, 5}, grid_n);
  for (const auto& p : positions)
    cfg.sources.push_back({Trajectory(StaticPoint{p}, terminal), Pulse(100, 0.1)});
  cfg.adsm.peaks = static_cast<int>(positions.size());
  cfg.validate();
  return cfg;
}

inline Point3 uniform_point(std::mt19937_64& rng, const Point3& lo, const Point3& hi) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return {lo.x + (hi.x - lo.x) * u(rng), lo.y + (hi.y - lo.y) * u(rng),
          lo.z + (hi.z - lo.z) * u(rng)};
}

/// Ricker pulse, p = 0.1, f0 = 100, zero before t = 0.
inline long double reference_ricker(long double t) {
  if (t < 0.0L) return 0.0L;
  const long double s = std::fmod(t, 0.1L) - 0.05L;
  const long double a = kPi * kPi * 100.0L * 100.0L * s * s;
  return (1.0L - 2.0L * a) * std::exp(-a);
}

/// Straight-line discrete indicator for a 100 Hz, p = 0.1 pulse and c = 330,
/// evaluated in extended precision from the exact sample times (j - 1 + n/Np) p.
inline double reference_indicator(const FieldRecord& rec, int j, const Point3& y) {
  const auto& time = rec.time();
  const int np = time.samples_per_period();
  long double num = 0.0L, du = 0.0L, dphi = 0.0L;
  for (int n = 1; n <= np; ++n) {
    const long double t = (static_cast<long double>(j - 1) + static_cast<long double>(n) / np) * 0.1L;
    long double su = 0.0L, sphi = 0.0L;
    for (std::size_t l = 0; l < rec.rows(); ++l) {
      const Point3 d = rec.sensors()[l] - y;
      const long double r = std::sqrt(static_cast<long double>(d.x) * d.x +
                                      static_cast<long double>(d.y) * d.y +
                                      static_cast<long double>(d.z) * d.z);
      const long double phi = reference_ricker(t - r / 330.0L) / (4.0L * kPi * r);
      const long double u = rec.at(l, j, n);
      num += std::abs(u * phi);
      su += u * u;
      sphi += phi * phi;
    }
    du += std::sqrt(su);
    dphi += std::sqrt(sphi);
  }
  return static_cast<double>(num / (du * dphi));
}

}  // namespace movsrc::testing
