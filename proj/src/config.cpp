#include "movsrc/config.hpp"

#include <fmt/format.h>

#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace movsrc {

std::string_view to_string(FieldModel model) {
  return model == FieldModel::quasistatic ? "quasistatic" : "lw";
}

FieldModel parse_field_model(std::string_view text) {
  if (text == "quasistatic") return FieldModel::quasistatic;
  if (text == "lw") return FieldModel::lienard_wiechert;
  throw ConfigError(fmt::format("unknown forward model '{}' (quasistatic|lw)", text));
}

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::string format_double(double v) { return fmt::format("{:.17g}", v); }

double parse_double(std::string_view text, std::string_view what) {
  const std::string s = trim(text);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    throw ConfigError(fmt::format("{}: '{}' is not a number", what, s));
  return v;
}

long long parse_integer(std::string_view text, std::string_view what) {
  const std::string s = trim(text);
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    throw ConfigError(fmt::format("{}: '{}' is not an integer", what, s));
  return v;
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t index) {
  std::uint64_t z = master ^ (stream << 32) ^ index;
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// ---------------------------------------------------------------------------
// Trajectory parameters
// ---------------------------------------------------------------------------

std::vector<double> trajectory_params(const Trajectory& traj) {
  struct Visitor {
    std::vector<double> operator()(const CShapePath& f) const {
      return {f.offset.x, f.offset.y, f.offset.z, f.ax, f.x_phase, f.x_rate,
              f.ay,       f.y_phase,  f.y_rate,   f.az, f.z_rate};
    }
    std::vector<double> operator()(const BowPath& f) const {
      return {f.offset.x, f.offset.y, f.offset.z, f.vx, f.ay, f.wy, f.az, f.wz};
    }
    std::vector<double> operator()(const CircleArcPath& f) const {
      return {f.center.x, f.center.y, f.center.z, f.radius, f.rate, f.phase};
    }
    std::vector<double> operator()(const LinePath& f) const {
      return {f.origin.x, f.origin.y, f.origin.z, f.velocity.x, f.velocity.y, f.velocity.z};
    }
    std::vector<double> operator()(const StaticPoint& f) const {
      return {f.position.x, f.position.y, f.position.z};
    }
    std::vector<double> operator()(const PiecewiseLinearPath& f) const {
      std::vector<double> out;
      for (const auto& s : f.samples) {
        out.insert(out.end(), {s.t, s.position.x, s.position.y, s.position.z});
      }
      return out;
    }
  };
  return std::visit(Visitor{}, traj.form());
}

Trajectory make_trajectory(std::string_view kind, const std::vector<double>& p, double t_end) {
  auto need = [&](std::size_t n) {
    if (p.size() != n)
      throw ConfigError(
          fmt::format("trajectory kind '{}' takes {} parameters, got {}", kind, n, p.size()));
  };
  if (kind == "c-shape") {
    need(11);
    return {CShapePath{{p[0], p[1], p[2]}, p[3], p[4], p[5], p[6], p[7], p[8], p[9], p[10]},
            t_end};
  }
  if (kind == "bow-shape") {
    need(8);
    return {BowPath{{p[0], p[1], p[2]}, p[3], p[4], p[5], p[6], p[7]}, t_end};
  }
  if (kind == "circle-arc") {
    need(6);
    return {CircleArcPath{{p[0], p[1], p[2]}, p[3], p[4], p[5]}, t_end};
  }
  if (kind == "line") {
    need(6);
    return {LinePath{{p[0], p[1], p[2]}, {p[3], p[4], p[5]}}, t_end};
  }
  if (kind == "static") {
    need(3);
    return {StaticPoint{{p[0], p[1], p[2]}}, t_end};
  }
  if (kind == "piecewise-linear") {
    if (p.empty() || p.size() % 4 != 0)
      throw ConfigError("piecewise-linear samples must be groups of 't x y z'");
    PiecewiseLinearPath path;
    for (std::size_t i = 0; i < p.size(); i += 4)
      path.samples.push_back({p[i], {p[i + 1], p[i + 2], p[i + 3]}});
    return {std::move(path), t_end};
  }
  throw ConfigError(fmt::format("unknown trajectory kind '{}'", kind));
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

void ScenarioConfig::validate() const {
  if (!(c > 0.0) || !std::isfinite(c)) throw ConfigError("wave speed c must be positive");
  if (!(noise_level >= 0.0) || !std::isfinite(noise_level))
    throw ConfigError("noise level must be >= 0");
  if (sources.empty()) throw ConfigError("scenario has no sources");
  if (mcmc.samples < 1) throw ConfigError("mcmc.samples (K) must be >= 1");
  if (!(mcmc.beta >= 0.0 && mcmc.beta <= 1.0)) throw ConfigError("mcmc.beta must lie in [0,1]");
  if (!(mcmc.sigma_prop > 0.0)) throw ConfigError("mcmc.sigma_prop must be positive");
  if (!(mcmc.prior_var > 0.0)) throw ConfigError("mcmc.prior_var must be positive");
  if (!(mcmc.w_var > 0.0)) throw ConfigError("mcmc.w_var must be positive");
  if (!std::isfinite(mcmc.w_mean)) throw ConfigError("mcmc.w_mean must be finite");
  if (adsm.peaks < 1) throw ConfigError("adsm.peaks must be >= 1");
  if (!(adsm.r_min > 0.0)) throw ConfigError("adsm.r_min must be positive");
  if (!(adsm.floor >= 0.0)) throw ConfigError("adsm.floor must be >= 0");

  const std::size_t lattice = grid.size();
  for (std::size_t s = 0; s < sources.size(); ++s) {
    const auto& src = sources[s];
    if (std::abs(src.pulse.period() - time.period()) > 1e-12 * time.period())
      throw ConfigError(fmt::format("source {} pulse period differs from time.period", s + 1));
    if (std::abs(src.path.t_end() - time.terminal_time()) > 1e-12 * time.terminal_time())
      throw ConfigError(fmt::format("source {} trajectory does not span [0, T]", s + 1));
    const double vmax = src.path.max_speed();
    if (!(vmax < c))
      throw ConfigError(
          fmt::format("source {} max speed {} is not below the wave speed {}", s + 1, vmax, c));
  }

  constexpr std::size_t kPathSamples = 4001;
  for (std::size_t l = 0; l < sensors.size(); ++l) {
    const Point3& x = sensors[l];
    for (std::size_t idx = 0; idx < lattice; ++idx) {
      if (distance(x, grid.point(idx)) < kMinSeparation)
        throw ConfigError(fmt::format("sensor {} coincides with lattice point {}", l, idx));
    }
    for (const auto& src : sources) {
      for (std::size_t i = 0; i < kPathSamples; ++i) {
        const double t = time.terminal_time() * static_cast<double>(i) / (kPathSamples - 1);
        if (distance(x, src.path.position(t)) < kMinSeparation)
          throw ConfigError(fmt::format("sensor {} lies on a source trajectory (t = {})", l, t));
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

namespace {

std::vector<double> parse_list(std::string_view text, std::string_view what) {
  std::vector<double> out;
  std::string buf(text);
  for (char& ch : buf)
    if (ch == ',' || ch == ';') ch = ' ';
  std::istringstream in(buf);
  std::string token;
  while (in >> token) out.push_back(parse_double(token, what));
  return out;
}

Point3 parse_point(std::string_view text, std::string_view what) {
  const auto v = parse_list(text, what);
  if (v.size() != 3) throw ConfigError(fmt::format("{}: expected 3 coordinates", what));
  return {v[0], v[1], v[2]};
}

bool parse_bool(std::string_view text, std::string_view what) {
  const std::string s = trim(text);
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw ConfigError(fmt::format("{}: '{}' is not a boolean", what, s));
}

class KeyValues {
 public:
  explicit KeyValues(std::string_view text) {
    std::istringstream in{std::string(text)};
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      const std::string t = trim(line);
      if (t.empty()) continue;
      const auto eq = t.find('=');
      if (eq == std::string::npos)
        throw ConfigError(fmt::format("line {}: expected 'key = value'", lineno));
      std::string key = trim(std::string_view(t).substr(0, eq));
      std::string value = trim(std::string_view(t).substr(eq + 1));
      if (key.empty()) throw ConfigError(fmt::format("line {}: empty key", lineno));
      if (!values_.emplace(key, value).second)
        throw ConfigError(fmt::format("line {}: duplicate key '{}'", lineno, key));
    }
  }

  const std::string* find(const std::string& key) {
    auto it = values_.find(key);
    if (it == values_.end()) return nullptr;
    used_.insert(key);
    return &it->second;
  }

  const std::string& require(const std::string& key) {
    const std::string* v = find(key);
    if (v == nullptr) throw ConfigError(fmt::format("missing required key '{}'", key));
    return *v;
  }

  void reject_unused() const {
    for (const auto& [key, value] : values_)
      if (!used_.contains(key)) throw ConfigError(fmt::format("unknown key '{}'", key));
  }

 private:
  std::map<std::string, std::string> values_;
  std::set<std::string> used_;
};

}  // namespace

ScenarioConfig parse_scenario(std::string_view text) {
  KeyValues kv(text);
  ScenarioConfig cfg;

  if (const auto* v = kv.find("id")) cfg.id = *v;
  if (const auto* v = kv.find("c")) cfg.c = parse_double(*v, "c");

  int np = 12;
  if (const auto* v = kv.find("sensors.set")) {
    if (kv.find("sensors.positions") != nullptr)
      throw ConfigError("sensors.set and sensors.positions are mutually exclusive");
    cfg.sensors = build_sensor_set(*v);
    np = default_samples_per_period(*v);
  } else if (const auto* pos = kv.find("sensors.positions")) {
    const auto coords = parse_list(*pos, "sensors.positions");
    if (coords.empty() || coords.size() % 3 != 0)
      throw ConfigError("sensors.positions must be groups of 'x y z'");
    std::vector<Point3> points;
    for (std::size_t i = 0; i < coords.size(); i += 3)
      points.push_back({coords[i], coords[i + 1], coords[i + 2]});
    cfg.sensors = SensorArray(std::move(points), "custom");
  }

  double terminal = 4.0;
  double period = 0.1;
  if (const auto* v = kv.find("time.terminal")) terminal = parse_double(*v, "time.terminal");
  if (const auto* v = kv.find("time.period")) period = parse_double(*v, "time.period");
  if (const auto* v = kv.find("time.samples_per_period"))
    np = static_cast<int>(parse_integer(*v, "time.samples_per_period"));
  cfg.time = TimeGrid(terminal, period, np);

  Point3 lower{-5, -5, -5};
  Point3 upper{5, 5, 5};
  int n = 41;
  if (const auto* v = kv.find("grid.lower")) lower = parse_point(*v, "grid.lower");
  if (const auto* v = kv.find("grid.upper")) upper = parse_point(*v, "grid.upper");
  if (const auto* v = kv.find("grid.n")) n = static_cast<int>(parse_integer(*v, "grid.n"));
  cfg.grid = SamplingGrid(lower, upper, n);

  if (const auto* v = kv.find("noise.level")) cfg.noise_level = parse_double(*v, "noise.level");
  if (const auto* v = kv.find("seed"))
    cfg.seed = static_cast<std::uint64_t>(parse_integer(*v, "seed"));
  if (const auto* v = kv.find("forward.model")) cfg.model = parse_field_model(*v);

  const long long count = parse_integer(kv.require("sources"), "sources");
  if (count < 1) throw ConfigError("sources must be >= 1");
  for (long long i = 1; i <= count; ++i) {
    const std::string prefix = fmt::format("source.{}.", i);
    const std::string& kind = kv.require(prefix + "kind");
    std::vector<double> params;
    if (kind == "piecewise-linear") {
      params = parse_list(kv.require(prefix + "samples"), prefix + "samples");
    } else {
      params = parse_list(kv.require(prefix + "params"), prefix + "params");
    }
    double f0 = 100.0;
    double amplitude = 1.0;
    if (const auto* v = kv.find(prefix + "f0")) f0 = parse_double(*v, prefix + "f0");
    if (const auto* v = kv.find(prefix + "amplitude"))
      amplitude = parse_double(*v, prefix + "amplitude");
    cfg.sources.push_back({make_trajectory(kind, params, terminal), Pulse(f0, period, amplitude)});
  }

  if (const auto* v = kv.find("adsm.floor")) cfg.adsm.floor = parse_double(*v, "adsm.floor");
  if (const auto* v = kv.find("adsm.peaks"))
    cfg.adsm.peaks = static_cast<int>(parse_integer(*v, "adsm.peaks"));
  if (const auto* v = kv.find("adsm.r_min")) cfg.adsm.r_min = parse_double(*v, "adsm.r_min");

  auto& m = cfg.mcmc;
  if (const auto* v = kv.find("mcmc.samples"))
    m.samples = static_cast<int>(parse_integer(*v, "mcmc.samples"));
  if (const auto* v = kv.find("mcmc.beta")) m.beta = parse_double(*v, "mcmc.beta");
  if (const auto* v = kv.find("mcmc.sigma_prop")) m.sigma_prop = parse_double(*v, "mcmc.sigma_prop");
  if (const auto* v = kv.find("mcmc.prior")) {
    if (*v == "normal") {
      m.prior = PriorFamily::normal;
    } else if (*v == "uniform") {
      m.prior = PriorFamily::uniform_box;
    } else {
      throw ConfigError(fmt::format("mcmc.prior: unknown family '{}'", *v));
    }
  }
  if (const auto* v = kv.find("mcmc.prior_var")) m.prior_var = parse_double(*v, "mcmc.prior_var");
  if (const auto* v = kv.find("mcmc.w_mean")) m.w_mean = parse_double(*v, "mcmc.w_mean");
  if (const auto* v = kv.find("mcmc.w_var")) m.w_var = parse_double(*v, "mcmc.w_var");
  if (const auto* v = kv.find("mcmc.corrected")) m.corrected = parse_bool(*v, "mcmc.corrected");
  if (const auto* v = kv.find("mcmc.seed_from_adsm"))
    m.seed_from_adsm = parse_bool(*v, "mcmc.seed_from_adsm");

  kv.reject_unused();
  cfg.validate();
  return cfg;
}

ScenarioConfig load_scenario(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError(fmt::format("cannot open scenario file '{}'", file.string()));
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

std::string format_scenario(const ScenarioConfig& cfg) {
  auto point = [](const Point3& p) {
    return fmt::format("{} {} {}", format_double(p.x), format_double(p.y), format_double(p.z));
  };
  auto list = [](const std::vector<double>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i > 0) out += ' ';
      out += format_double(v[i]);
    }
    return out;
  };
  std::string out;
  auto line = [&out](std::string_view key, const std::string& value) {
    out += fmt::format("{} = {}\n", key, value);
  };
  line("id", cfg.id);
  line("c", format_double(cfg.c));
  line("time.terminal", format_double(cfg.time.terminal_time()));
  line("time.period", format_double(cfg.time.period()));
  line("time.samples_per_period", std::to_string(cfg.time.samples_per_period()));
  const auto& label = cfg.sensors.label();
  if (label == "S1" || label == "S2" || label == "S3") {
    line("sensors.set", label);
  } else {
    std::string pos;
    for (std::size_t l = 0; l < cfg.sensors.size(); ++l) {
      if (l > 0) pos += ", ";
      pos += point(cfg.sensors[l]);
    }
    line("sensors.positions", pos);
  }
  line("grid.lower", point(cfg.grid.lower()));
  line("grid.upper", point(cfg.grid.upper()));
  line("grid.n", std::to_string(cfg.grid.n()));
  line("noise.level", format_double(cfg.noise_level));
  line("seed", std::to_string(cfg.seed));
  line("forward.model", std::string(to_string(cfg.model)));
  line("sources", std::to_string(cfg.sources.size()));
  for (std::size_t s = 0; s < cfg.sources.size(); ++s) {
    const std::string prefix = fmt::format("source.{}.", s + 1);
    const auto& src = cfg.sources[s];
    line(prefix + "kind", std::string(to_string(src.path.kind())));
    const bool pwl = src.path.kind() == TrajectoryKind::piecewise_linear;
    line(prefix + (pwl ? "samples" : "params"), list(trajectory_params(src.path)));
    line(prefix + "f0", format_double(src.pulse.central_frequency()));
    line(prefix + "amplitude", format_double(src.pulse.amplitude()));
  }
  line("adsm.floor", format_double(cfg.adsm.floor));
  line("adsm.peaks", std::to_string(cfg.adsm.peaks));
  line("adsm.r_min", format_double(cfg.adsm.r_min));
  const auto& m = cfg.mcmc;
  line("mcmc.samples", std::to_string(m.samples));
  line("mcmc.beta", format_double(m.beta));
  line("mcmc.sigma_prop", format_double(m.sigma_prop));
  line("mcmc.prior", m.prior == PriorFamily::normal ? "normal" : "uniform");
  line("mcmc.prior_var", format_double(m.prior_var));
  line("mcmc.w_mean", format_double(m.w_mean));
  line("mcmc.w_var", format_double(m.w_var));
  line("mcmc.corrected", m.corrected ? "true" : "false");
  line("mcmc.seed_from_adsm", m.seed_from_adsm ? "true" : "false");
  return out;
}

}  // namespace movsrc
