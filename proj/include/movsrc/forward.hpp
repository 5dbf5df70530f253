#pragma once

// Forward solvers for a moving point source in a homogeneous medium and the
// field record container shared by the inversion stages.

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "movsrc/config.hpp"
#include "movsrc/core.hpp"

namespace movsrc {

struct RetardedTimeOptions {
  double tol = 1e-12;
  int max_iterations = 200;
};

/// Solves t = tau + |x - z(tau)| / c by the fixed-point iteration
/// tau <- t - |x - z(tau)| / c started at tau = t. Throws std::runtime_error
/// when the iteration does not settle within max_iterations.
double retarded_time(const Point3& x, const Trajectory& traj, double t, double c,
                     RetardedTimeOptions options = {});

/// All fixed-point iterates tau_0 = t, tau_1, ... up to convergence.
std::vector<double> retarded_time_iterates(const Point3& x, const Trajectory& traj, double t,
                                           double c, RetardedTimeOptions options = {});

/// Lienard-Wiechert field
///   lambda(tau) / (4 pi r (1 - v(tau).(x - z(tau)) / (c r))),  r = |x - z(tau)|.
double lw_field(const Point3& x, double t, const Trajectory& traj, const Pulse& pulse, double c);

/// Static-source formula evaluated at the instantaneous position:
///   lambda(t - |x - z(t)| / c) / (4 pi |x - z(t)|).
double quasistatic_field(const Point3& x, double t, const Trajectory& traj, const Pulse& pulse,
                         double c);

enum class RecordOrigin { lienard_wiechert, quasistatic, file };

std::string_view to_string(RecordOrigin origin);

/// Sensor-by-time field matrix (N_x rows, N_T columns) with the geometry
/// needed to interpret it.
class FieldRecord {
 public:
  FieldRecord(SensorArray sensors, TimeGrid time, Pulse pulse, double c,
              std::vector<double> values, RecordOrigin origin);

  [[nodiscard]] const SensorArray& sensors() const { return sensors_; }
  [[nodiscard]] const TimeGrid& time() const { return time_; }
  /// Pulse the data was emitted with; also the probe pulse for inversion.
  [[nodiscard]] const Pulse& pulse() const { return pulse_; }
  [[nodiscard]] double wave_speed() const { return c_; }
  [[nodiscard]] RecordOrigin origin() const { return origin_; }

  [[nodiscard]] std::size_t rows() const { return sensors_.size(); }
  [[nodiscard]] std::size_t cols() const {
    return static_cast<std::size_t>(time_.total_samples());
  }
  [[nodiscard]] double operator()(std::size_t l, std::size_t k) const {
    return values_[l * cols() + k];
  }
  /// Value at sensor l (0-based), period j and sample n (1-based).
  [[nodiscard]] double at(std::size_t l, int j, int n) const {
    return (*this)(l, static_cast<std::size_t>(time_.column(j, n)));
  }
  [[nodiscard]] std::span<const double> values() const { return values_; }

  [[nodiscard]] double noise_level() const { return noise_level_; }
  [[nodiscard]] std::uint64_t noise_seed() const { return noise_seed_; }
  void set_noise(double level, std::uint64_t seed) {
    noise_level_ = level;
    noise_seed_ = seed;
  }

 private:
  SensorArray sensors_;
  TimeGrid time_;
  Pulse pulse_;
  double c_;
  std::vector<double> values_;
  RecordOrigin origin_;
  double noise_level_ = 0.0;
  std::uint64_t noise_seed_ = 0;
};

/// Sum over sources of the chosen field model at every (sensor, time) cell.
/// Sources must share one pulse shape; the record stores the first source's
/// pulse as the probe pulse.
FieldRecord simulate_record(const ScenarioConfig& scenario, FieldModel model,
                            unsigned threads = 0);

/// u^eps = u (1 + eps r), r ~ U[-1, 1] independently per entry.
FieldRecord add_noise(const FieldRecord& record, double eps, std::uint64_t seed);

/// Writes <dir>/record.meta (key-value sidecar) and <dir>/record.csv
/// (N_T rows x N_x columns, 17 significant digits).
void write_record(const FieldRecord& record, const std::filesystem::path& dir);
FieldRecord read_record(const std::filesystem::path& dir);

}  // namespace movsrc
