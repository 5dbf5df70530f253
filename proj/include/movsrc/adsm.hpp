#pragma once

// Approximate direct sampling: per-period correlation of the recorded field
// with the static-source probe kernel, maximized over a sampling lattice.

#include <filesystem>
#include <vector>

#include "movsrc/core.hpp"
#include "movsrc/forward.hpp"

namespace movsrc {

/// phi(x, t; y) = lambda(t - |x - y| / c) / (4 pi |x - y|).
double probe_field(const Point3& x, double t, const Point3& y, const Pulse& pulse, double c);

struct SweepOptions {
  // A norm factor below floor * reference zeroes the indicator. The data
  // factor's reference is its largest value over all periods of the record;
  // the probe factor's reference is its envelope at y (|lambda| replaced by
  // max |lambda|).
  double floor = 1e-14;
  unsigned threads = 0;
};

/// Discrete indicator for one record; caches the per-period data blocks.
///
///   I(y, T_j) = sum_n sum_l |u_ln phi_ln(y)|
///               / ( sum_n (sum_l u_ln^2)^1/2 * sum_n (sum_l phi_ln(y)^2)^1/2 )
class IndicatorEngine {
 public:
  IndicatorEngine(const FieldRecord& record, double floor = 1e-14);

  [[nodiscard]] double value(int j, const Point3& y) const;

  /// Indicator at y for periods first..last written to out[j - first].
  void values(int first, int last, const Point3& y, std::span<double> out) const;

  [[nodiscard]] const FieldRecord& record() const { return record_; }
  [[nodiscard]] double data_factor(int j) const { return data_factor_[j - 1]; }

 private:
  struct Probe;
  void build_probe(const Point3& y, Probe& probe) const;
  double evaluate(int j, const Probe& probe, std::vector<double>& scratch) const;

  const FieldRecord& record_;
  double floor_;
  std::size_t nx_;
  int np_;
  std::vector<double> data_;         // [j][n][l]
  std::vector<double> data_factor_;  // per period
  double data_factor_max_ = 0.0;
};

double indicator(const FieldRecord& record, int j, const Point3& y, double floor = 1e-14);

class IndicatorField {
 public:
  IndicatorField(int period, SamplingGrid grid, std::vector<double> values);

  [[nodiscard]] int period() const { return period_; }
  [[nodiscard]] const SamplingGrid& grid() const { return grid_; }
  [[nodiscard]] std::span<const double> values() const { return values_; }
  [[nodiscard]] double operator[](std::size_t idx) const { return values_[idx]; }
  /// Largest value; ties go to the smallest linear index.
  [[nodiscard]] std::size_t argmax() const;

 private:
  int period_;
  SamplingGrid grid_;
  std::vector<double> values_;
};

IndicatorField sweep(const FieldRecord& record, const SamplingGrid& grid, int j,
                     const SweepOptions& options = {});

/// Sweeps periods first..last in one pass over the lattice.
std::vector<IndicatorField> sweep_periods(const FieldRecord& record, const SamplingGrid& grid,
                                          int first, int last, const SweepOptions& options = {});

struct Peak {
  Point3 position;
  std::size_t index = 0;
  double value = 0.0;
};

/// Greedy peak picking: global maximum, suppress the open ball of radius
/// r_min around it, repeat until M peaks or the field is exhausted.
std::vector<Peak> extract_peaks(const IndicatorField& field, int max_peaks, double r_min);

struct PathPoint {
  Point3 position;
  double value = 0.0;
  bool detected = true;  // false: no peak associated in this period
};

struct CoarsePath {
  std::vector<std::vector<Peak>> peaks;          // per period
  std::vector<std::vector<PathPoint>> tracks;    // per source, length J

  [[nodiscard]] int periods() const { return static_cast<int>(peaks.size()); }
};

/// Threads per-period peaks into tracks by greedy nearest-neighbour matching
/// against the previous period's positions. Undetected periods repeat the
/// previous position.
std::vector<std::vector<PathPoint>> associate_tracks(const std::vector<std::vector<Peak>>& peaks);

CoarsePath run_adsm(const FieldRecord& record, const SamplingGrid& grid, int max_peaks,
                    double r_min, const SweepOptions& options = {});

/// "j,source_id,x,y,z,indicator_value"
void write_coarse_path(const CoarsePath& path, const std::filesystem::path& file);
/// Reads the tracks back (peaks are rebuilt from detected track points).
CoarsePath read_coarse_path(const std::filesystem::path& file);

/// Fixed z-plane of an indicator field: "ix,iy,x,y,z,value".
void write_indicator_slice(const IndicatorField& field, int z_index,
                           const std::filesystem::path& file);

}  // namespace movsrc
