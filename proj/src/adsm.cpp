#include "movsrc/adsm.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <fstream>
#include <map>
#include <tuple>

#include "movsrc/parallel.hpp"

namespace movsrc {

double probe_field(const Point3& x, double t, const Point3& y, const Pulse& pulse, double c) {
  const double r = distance(x, y);
  if (r < kMinSeparation) throw SingularityError("sampling point coincides with a sensor");
  return pulse(t - r / c) / (4.0 * kPi * r);
}

// ---------------------------------------------------------------------------
// IndicatorEngine
// ---------------------------------------------------------------------------

struct IndicatorEngine::Probe {
  std::vector<double> shape;        // [n][l], periodic pulse, no causality cut
  std::vector<double> delay;        // r_l / c
  double max_delay = 0.0;
  double shape_factor = 0.0;        // probe factor of `shape`
  double envelope = 0.0;
};

namespace {

// sum_n (sum_l v_nl^2)^1/2 for a [n][l] block.
double block_factor(std::span<const double> block, std::size_t nx, int np) {
  double total = 0.0;
  for (int n = 0; n < np; ++n) {
    double sq = 0.0;
    const double* row = block.data() + static_cast<std::size_t>(n) * nx;
    for (std::size_t l = 0; l < nx; ++l) sq += row[l] * row[l];
    total += std::sqrt(sq);
  }
  return total;
}

}  // namespace

IndicatorEngine::IndicatorEngine(const FieldRecord& record, double floor)
    : record_(record), floor_(floor), nx_(record.rows()), np_(record.time().samples_per_period()) {
  const int periods = record.time().periods();
  data_.resize(static_cast<std::size_t>(periods) * np_ * nx_);
  data_factor_.resize(static_cast<std::size_t>(periods));
  for (int j = 1; j <= periods; ++j) {
    double* block = data_.data() + static_cast<std::size_t>(j - 1) * np_ * nx_;
    for (int n = 1; n <= np_; ++n)
      for (std::size_t l = 0; l < nx_; ++l)
        block[static_cast<std::size_t>(n - 1) * nx_ + l] = record.at(l, j, n);
    data_factor_[j - 1] =
        block_factor({block, static_cast<std::size_t>(np_) * nx_}, nx_, np_);
    data_factor_max_ = std::max(data_factor_max_, data_factor_[j - 1]);
  }
}

void IndicatorEngine::build_probe(const Point3& y, Probe& probe) const {
  const auto& sensors = record_.sensors();
  const auto& time = record_.time();
  const Pulse& pulse = record_.pulse();
  const double c = record_.wave_speed();
  probe.shape.resize(static_cast<std::size_t>(np_) * nx_);
  probe.delay.resize(nx_);
  probe.max_delay = 0.0;
  double inv_sq = 0.0;
  for (std::size_t l = 0; l < nx_; ++l) {
    const double r = distance(sensors[l], y);
    if (r < kMinSeparation) throw SingularityError("sampling point coincides with a sensor");
    const double delay = r / c;
    const double scale = 1.0 / (4.0 * kPi * r);
    probe.delay[l] = delay;
    probe.max_delay = std::max(probe.max_delay, delay);
    inv_sq += scale * scale;
    for (int n = 1; n <= np_; ++n)
      probe.shape[static_cast<std::size_t>(n - 1) * nx_ + l] =
          pulse.periodic(time.phase(n) - delay) * scale;
  }
  probe.shape_factor = block_factor(probe.shape, nx_, np_);
  probe.envelope = pulse.max_abs() * np_ * std::sqrt(inv_sq);
}

double IndicatorEngine::evaluate(int j, const Probe& probe, std::vector<double>& scratch) const {
  const auto& time = record_.time();
  const double data_factor = data_factor_[j - 1];
  if (!(data_factor > 0.0) || data_factor < floor_ * data_factor_max_) return 0.0;

  // phi at t_j^n equals the periodic shape unless t_j^n precedes the arrival
  // from y (causality cut), which only happens in the earliest periods.
  std::span<const double> phi = probe.shape;
  double probe_factor = probe.shape_factor;
  if (time.time(j, 1) - probe.max_delay < 0.0) {
    scratch.resize(probe.shape.size());
    for (int n = 1; n <= np_; ++n) {
      const double t = time.time(j, n);
      for (std::size_t l = 0; l < nx_; ++l) {
        const std::size_t e = static_cast<std::size_t>(n - 1) * nx_ + l;
        scratch[e] = t - probe.delay[l] < 0.0 ? 0.0 : probe.shape[e];
      }
    }
    phi = scratch;
    probe_factor = block_factor(phi, nx_, np_);
  }
  if (!(probe_factor > 0.0) || probe_factor < floor_ * probe.envelope) return 0.0;

  const double* u = data_.data() + static_cast<std::size_t>(j - 1) * np_ * nx_;
  double numerator = 0.0;
  for (std::size_t e = 0; e < phi.size(); ++e) numerator += std::abs(u[e] * phi[e]);
  return std::clamp(numerator / (data_factor * probe_factor), 0.0, 1.0);
}

double IndicatorEngine::value(int j, const Point3& y) const {
  if (j < 1 || j > record_.time().periods())
    throw ConfigError(fmt::format("period index {} outside 1..{}", j, record_.time().periods()));
  Probe probe;
  std::vector<double> scratch;
  build_probe(y, probe);
  return evaluate(j, probe, scratch);
}

void IndicatorEngine::values(int first, int last, const Point3& y, std::span<double> out) const {
  Probe probe;
  std::vector<double> scratch;
  build_probe(y, probe);
  for (int j = first; j <= last; ++j) out[static_cast<std::size_t>(j - first)] = evaluate(j, probe, scratch);
}

double indicator(const FieldRecord& record, int j, const Point3& y, double floor) {
  return IndicatorEngine(record, floor).value(j, y);
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

IndicatorField::IndicatorField(int period, SamplingGrid grid, std::vector<double> values)
    : period_(period), grid_(grid), values_(std::move(values)) {
  if (values_.size() != grid_.size()) throw ConfigError("indicator field size mismatch");
}

std::size_t IndicatorField::argmax() const {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values_.size(); ++i)
    if (values_[i] > values_[best]) best = i;
  return best;
}

std::vector<IndicatorField> sweep_periods(const FieldRecord& record, const SamplingGrid& grid,
                                          int first, int last, const SweepOptions& options) {
  const int periods = record.time().periods();
  if (first < 1 || last > periods || first > last)
    throw ConfigError(fmt::format("period range {}..{} outside 1..{}", first, last, periods));
  const IndicatorEngine engine(record, options.floor);
  const auto count = static_cast<std::size_t>(last - first + 1);
  const std::size_t points = grid.size();
  std::vector<double> scratch_all(points * count);  // [idx][j]

  parallel_for(points, options.threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t idx = begin; idx < end; ++idx)
      engine.values(first, last, grid.point(idx), {scratch_all.data() + idx * count, count});
  });

  std::vector<IndicatorField> fields;
  fields.reserve(count);
  for (std::size_t jj = 0; jj < count; ++jj) {
    std::vector<double> v(points);
    for (std::size_t idx = 0; idx < points; ++idx) v[idx] = scratch_all[idx * count + jj];
    fields.emplace_back(first + static_cast<int>(jj), grid, std::move(v));
  }
  return fields;
}

IndicatorField sweep(const FieldRecord& record, const SamplingGrid& grid, int j,
                     const SweepOptions& options) {
  return std::move(sweep_periods(record, grid, j, j, options).front());
}

std::vector<Peak> extract_peaks(const IndicatorField& field, int max_peaks, double r_min) {
  if (max_peaks < 1) throw ConfigError("peak count must be >= 1");
  if (!(r_min > 0.0)) throw ConfigError("peak separation must be positive");
  const auto& grid = field.grid();
  const auto values = field.values();
  std::vector<char> suppressed(values.size(), 0);
  std::vector<Peak> peaks;
  while (static_cast<int>(peaks.size()) < max_peaks) {
    std::size_t best = values.size();
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (suppressed[i]) continue;
      if (best == values.size() || values[i] > values[best]) best = i;
    }
    if (best == values.size()) break;
    const Point3 centre = grid.point(best);
    peaks.push_back({centre, best, values[best]});
    for (std::size_t i = 0; i < values.size(); ++i)
      if (!suppressed[i] && distance(grid.point(i), centre) < r_min) suppressed[i] = 1;
  }
  return peaks;
}

std::vector<std::vector<PathPoint>> associate_tracks(const std::vector<std::vector<Peak>>& peaks) {
  std::vector<std::vector<PathPoint>> tracks;
  if (peaks.empty()) return tracks;
  for (const Peak& p : peaks.front()) tracks.push_back({{p.position, p.value, true}});

  for (std::size_t j = 1; j < peaks.size(); ++j) {
    const auto& current = peaks[j];
    std::vector<std::tuple<double, std::size_t, std::size_t>> pairs;
    for (std::size_t t = 0; t < tracks.size(); ++t)
      for (std::size_t p = 0; p < current.size(); ++p)
        pairs.emplace_back(distance(tracks[t].back().position, current[p].position), t, p);
    std::sort(pairs.begin(), pairs.end());
    std::vector<char> track_done(tracks.size(), 0);
    std::vector<char> peak_done(current.size(), 0);
    std::vector<PathPoint> next(tracks.size());
    for (const auto& [d, t, p] : pairs) {
      if (track_done[t] || peak_done[p]) continue;
      track_done[t] = peak_done[p] = 1;
      next[t] = {current[p].position, current[p].value, true};
    }
    for (std::size_t t = 0; t < tracks.size(); ++t) {
      if (!track_done[t]) next[t] = {tracks[t].back().position, 0.0, false};
      tracks[t].push_back(next[t]);
    }
  }
  return tracks;
}

CoarsePath run_adsm(const FieldRecord& record, const SamplingGrid& grid, int max_peaks,
                    double r_min, const SweepOptions& options) {
  const int periods = record.time().periods();
  // Bound the batch so the indicator fields of one batch stay under ~256 MB.
  const std::size_t budget = (std::size_t{256} << 20) / sizeof(double);
  const int batch = static_cast<int>(
      std::clamp<std::size_t>(budget / std::max<std::size_t>(grid.size(), 1), 1,
                              static_cast<std::size_t>(periods)));
  CoarsePath path;
  for (int first = 1; first <= periods; first += batch) {
    const int last = std::min(periods, first + batch - 1);
    for (const auto& field : sweep_periods(record, grid, first, last, options))
      path.peaks.push_back(extract_peaks(field, max_peaks, r_min));
  }
  path.tracks = associate_tracks(path.peaks);
  return path;
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

void write_coarse_path(const CoarsePath& path, const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", file.string()));
  out << "j,source_id,x,y,z,indicator_value\n";
  for (int j = 0; j < path.periods(); ++j) {
    for (std::size_t s = 0; s < path.tracks.size(); ++s) {
      const PathPoint& p = path.tracks[s][static_cast<std::size_t>(j)];
      out << fmt::format("{},{},{},{},{},{}\n", j + 1, s, format_double(p.position.x),
                         format_double(p.position.y), format_double(p.position.z),
                         format_double(p.value));
    }
  }
}

CoarsePath read_coarse_path(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError(fmt::format("cannot open '{}'", file.string()));
  std::string line;
  std::getline(in, line);
  if (trim(line) != "j,source_id,x,y,z,indicator_value")
    throw ConfigError(fmt::format("{}: unexpected header '{}'", file.string(), trim(line)));
  std::map<std::pair<int, int>, PathPoint> rows;
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
    if (cells.size() != 6)
      throw ConfigError(fmt::format("{}:{}: expected 6 columns", file.string(), lineno));
    const int j = static_cast<int>(parse_integer(cells[0], "j"));
    const int s = static_cast<int>(parse_integer(cells[1], "source_id"));
    if (j < 1 || s < 0) throw ConfigError(fmt::format("{}:{}: bad index", file.string(), lineno));
    PathPoint p{{parse_double(cells[2], "x"), parse_double(cells[3], "y"),
                 parse_double(cells[4], "z")},
                parse_double(cells[5], "indicator_value"),
                true};
    rows[{s, j}] = p;
    max_j = std::max(max_j, j);
    max_s = std::max(max_s, s);
  }
  CoarsePath path;
  path.peaks.resize(static_cast<std::size_t>(max_j));
  path.tracks.resize(static_cast<std::size_t>(max_s + 1));
  for (int s = 0; s <= max_s; ++s) {
    for (int j = 1; j <= max_j; ++j) {
      auto it = rows.find({s, j});
      if (it == rows.end())
        throw ConfigError(fmt::format("{}: missing row j={} source_id={}", file.string(), j, s));
      path.tracks[static_cast<std::size_t>(s)].push_back(it->second);
      path.peaks[static_cast<std::size_t>(j - 1)].push_back(
          {it->second.position, 0, it->second.value});
    }
  }
  return path;
}

void write_indicator_slice(const IndicatorField& field, int z_index,
                           const std::filesystem::path& file) {
  const auto& grid = field.grid();
  if (z_index < 0 || z_index >= grid.n())
    throw ConfigError(fmt::format("z index {} outside 0..{}", z_index, grid.n() - 1));
  std::ofstream out(file);
  if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", file.string()));
  out << "ix,iy,x,y,z,value\n";
  for (int i = 0; i < grid.n(); ++i) {
    for (int j = 0; j < grid.n(); ++j) {
      const Point3 p = grid.point(i, j, z_index);
      out << fmt::format("{},{},{},{},{},{}\n", i, j, format_double(p.x), format_double(p.y),
                         format_double(p.z), format_double(field[grid.index(i, j, z_index)]));
    }
  }
}

}  // namespace movsrc
