#include "movsrc/forward.hpp"

#include <fmt/format.h>

#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>

#include "movsrc/parallel.hpp"

namespace movsrc {

std::vector<double> retarded_time_iterates(const Point3& x, const Trajectory& traj, double t,
                                           double c, RetardedTimeOptions options) {
  std::vector<double> iterates{t};
  double tau = t;
  for (int it = 0; it < options.max_iterations; ++it) {
    const double next = t - distance(x, traj.eval_extended(tau).position) / c;
    iterates.push_back(next);
    if (std::abs(next - tau) <= options.tol) return iterates;
    tau = next;
  }
  throw std::runtime_error(fmt::format(
      "retarded time did not converge after {} iterations (t = {})", options.max_iterations, t));
}

double retarded_time(const Point3& x, const Trajectory& traj, double t, double c,
                     RetardedTimeOptions options) {
  double tau = t;
  for (int it = 0; it < options.max_iterations; ++it) {
    const double next = t - distance(x, traj.eval_extended(tau).position) / c;
    if (std::abs(next - tau) <= options.tol) return next;
    tau = next;
  }
  throw std::runtime_error(fmt::format(
      "retarded time did not converge after {} iterations (t = {})", options.max_iterations, t));
}

double lw_field(const Point3& x, double t, const Trajectory& traj, const Pulse& pulse, double c) {
  const double tau = retarded_time(x, traj, t, c);
  const Kinematics k = traj.eval_extended(tau);
  const Point3 d = x - k.position;
  const double r = norm(d);
  if (r < kMinSeparation) throw SingularityError("source at sensor position");
  const double amplitude = pulse(tau);
  if (amplitude == 0.0) return 0.0;
  const double doppler = 1.0 - dot(k.velocity, d) / (c * r);
  if (!(doppler > 0.0))
    throw std::logic_error("non-positive Doppler factor (source speed not below c)");
  return amplitude / (4.0 * kPi * r * doppler);
}

double quasistatic_field(const Point3& x, double t, const Trajectory& traj, const Pulse& pulse,
                         double c) {
  const double r = distance(x, traj.eval_extended(t).position);
  if (r < kMinSeparation) throw SingularityError("source at sensor position");
  return pulse(t - r / c) / (4.0 * kPi * r);
}

std::string_view to_string(RecordOrigin origin) {
  switch (origin) {
    case RecordOrigin::lienard_wiechert: return "lw";
    case RecordOrigin::quasistatic: return "quasistatic";
    case RecordOrigin::file: return "file";
  }
  return "file";
}

FieldRecord::FieldRecord(SensorArray sensors, TimeGrid time, Pulse pulse, double c,
                         std::vector<double> values, RecordOrigin origin)
    : sensors_(std::move(sensors)),
      time_(time),
      pulse_(pulse),
      c_(c),
      values_(std::move(values)),
      origin_(origin) {
  if (values_.size() != rows() * cols())
    throw ConfigError(fmt::format("record holds {} values, expected {} x {}", values_.size(),
                                  rows(), cols()));
  for (double v : values_)
    if (!std::isfinite(v)) throw ConfigError("record contains non-finite values");
}

FieldRecord simulate_record(const ScenarioConfig& scenario, FieldModel model, unsigned threads) {
  const auto& sensors = scenario.sensors;
  const TimeGrid& grid = scenario.time;
  const std::size_t nt = static_cast<std::size_t>(grid.total_samples());
  std::vector<double> values(sensors.size() * nt, 0.0);

  parallel_for(sensors.size(), threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t l = begin; l < end; ++l) {
      for (std::size_t k = 0; k < nt; ++k) {
        const double t = grid.time(static_cast<int>(k) + 1);
        double sum = 0.0;
        for (const auto& src : scenario.sources) {
          sum += model == FieldModel::quasistatic
                     ? quasistatic_field(sensors[l], t, src.path, src.pulse, scenario.c)
                     : lw_field(sensors[l], t, src.path, src.pulse, scenario.c);
        }
        values[l * nt + k] = sum;
      }
    }
  });
  const auto origin = model == FieldModel::quasistatic ? RecordOrigin::quasistatic
                                                       : RecordOrigin::lienard_wiechert;
  return {sensors, grid, scenario.sources.front().pulse, scenario.c, std::move(values), origin};
}

FieldRecord add_noise(const FieldRecord& record, double eps, std::uint64_t seed) {
  if (!(eps >= 0.0) || !std::isfinite(eps)) throw ConfigError("noise level must be >= 0");
  std::vector<double> values(record.values().begin(), record.values().end());
  if (eps > 0.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uniform(-1.0, 1.0);
    for (double& v : values) v *= 1.0 + eps * uniform(rng);
  }
  FieldRecord noisy(record.sensors(), record.time(), record.pulse(), record.wave_speed(),
                    std::move(values), record.origin());
  noisy.set_noise(eps, seed);
  return noisy;
}

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

namespace {

constexpr std::string_view kRecordFormat = "movsrc-record-1";

std::map<std::string, std::string> read_sidecar(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError(fmt::format("cannot open '{}'", file.string()));
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError(fmt::format("{}: malformed line '{}'", file.string(), t));
    kv[trim(std::string_view(t).substr(0, eq))] = trim(std::string_view(t).substr(eq + 1));
  }
  return kv;
}

const std::string& get(const std::map<std::string, std::string>& kv, const std::string& key) {
  auto it = kv.find(key);
  if (it == kv.end()) throw ConfigError(fmt::format("record.meta: missing key '{}'", key));
  return it->second;
}

}  // namespace

void write_record(const FieldRecord& record, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream meta(dir / "record.meta");
    if (!meta) throw std::runtime_error(fmt::format("cannot write '{}'", (dir / "record.meta").string()));
    const auto& tg = record.time();
    meta << "format = " << kRecordFormat << '\n';
    meta << "geometry = " << record.sensors().label() << '\n';
    meta << "sensors = " << record.rows() << '\n';
    meta << "samples_per_period = " << tg.samples_per_period() << '\n';
    meta << "periods = " << tg.periods() << '\n';
    meta << "terminal = " << format_double(tg.terminal_time()) << '\n';
    meta << "period = " << format_double(tg.period()) << '\n';
    meta << "c = " << format_double(record.wave_speed()) << '\n';
    meta << "pulse.f0 = " << format_double(record.pulse().central_frequency()) << '\n';
    meta << "pulse.amplitude = " << format_double(record.pulse().amplitude()) << '\n';
    meta << "noise = " << format_double(record.noise_level()) << '\n';
    meta << "seed = " << record.noise_seed() << '\n';
    meta << "model = " << to_string(record.origin()) << '\n';
    for (std::size_t l = 0; l < record.rows(); ++l) {
      const Point3& x = record.sensors()[l];
      meta << "sensor." << l << " = " << format_double(x.x) << ' ' << format_double(x.y) << ' '
           << format_double(x.z) << '\n';
    }
  }
  std::ofstream csv(dir / "record.csv");
  if (!csv) throw std::runtime_error(fmt::format("cannot write '{}'", (dir / "record.csv").string()));
  for (std::size_t l = 0; l < record.rows(); ++l) csv << (l == 0 ? "" : ",") << 's' << l;
  csv << '\n';
  std::string row;
  for (std::size_t k = 0; k < record.cols(); ++k) {
    row.clear();
    for (std::size_t l = 0; l < record.rows(); ++l) {
      if (l > 0) row += ',';
      row += format_double(record(l, k));
    }
    csv << row << '\n';
  }
}

FieldRecord read_record(const std::filesystem::path& dir) {
  const auto kv = read_sidecar(dir / "record.meta");
  if (get(kv, "format") != kRecordFormat)
    throw ConfigError(fmt::format("record.meta: unsupported format '{}'", get(kv, "format")));
  const auto nx = static_cast<std::size_t>(parse_integer(get(kv, "sensors"), "sensors"));
  const int np = static_cast<int>(parse_integer(get(kv, "samples_per_period"), "samples_per_period"));
  const int periods = static_cast<int>(parse_integer(get(kv, "periods"), "periods"));
  const double terminal = parse_double(get(kv, "terminal"), "terminal");
  const double period = parse_double(get(kv, "period"), "period");
  TimeGrid time(terminal, period, np);
  if (time.periods() != periods)
    throw ConfigError("record.meta: periods inconsistent with terminal/period");

  std::vector<Point3> positions;
  for (std::size_t l = 0; l < nx; ++l) {
    std::istringstream in(get(kv, fmt::format("sensor.{}", l)));
    std::string a, b, c;
    if (!(in >> a >> b >> c)) throw ConfigError(fmt::format("record.meta: bad sensor.{}", l));
    positions.push_back({parse_double(a, "sensor"), parse_double(b, "sensor"),
                         parse_double(c, "sensor")});
  }
  SensorArray sensors(std::move(positions), get(kv, "geometry"));
  Pulse pulse(parse_double(get(kv, "pulse.f0"), "pulse.f0"), period,
              parse_double(get(kv, "pulse.amplitude"), "pulse.amplitude"));

  const std::size_t nt = static_cast<std::size_t>(time.total_samples());
  std::vector<double> values(nx * nt);
  std::ifstream csv(dir / "record.csv");
  if (!csv) throw ConfigError(fmt::format("cannot open '{}'", (dir / "record.csv").string()));
  std::string line;
  std::getline(csv, line);  // header
  std::size_t k = 0;
  while (std::getline(csv, line)) {
    if (trim(line).empty()) continue;
    if (k >= nt) throw ConfigError("record.csv has more rows than the sidecar declares");
    std::size_t l = 0;
    std::size_t start = 0;
    while (true) {
      const auto comma = line.find(',', start);
      if (l >= nx) throw ConfigError(fmt::format("record.csv row {}: too many columns", k + 2));
      values[l * nt + k] = parse_double(
          std::string_view(line).substr(start, comma == std::string::npos ? std::string::npos
                                                                           : comma - start),
          "record.csv");
      ++l;
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (l != nx) throw ConfigError(fmt::format("record.csv row {}: expected {} columns", k + 2, nx));
    ++k;
  }
  if (k != nt) throw ConfigError(fmt::format("record.csv has {} rows, expected {}", k, nt));

  FieldRecord record(std::move(sensors), time, pulse, parse_double(get(kv, "c"), "c"),
                     std::move(values), RecordOrigin::file);
  record.set_noise(parse_double(get(kv, "noise"), "noise"),
                   static_cast<std::uint64_t>(std::stoull(get(kv, "seed"))));
  return record;
}

}  // namespace movsrc
