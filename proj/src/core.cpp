#include "movsrc/core.hpp"

#include <algorithm>
#include <array>
#include <fmt/format.h>

namespace movsrc {

// ---------------------------------------------------------------------------
// Pulse
// ---------------------------------------------------------------------------

Pulse::Pulse(double central_frequency, double period, double amplitude)
    : f0_(central_frequency),
      period_(period),
      amplitude_(amplitude),
      a_(kPi * kPi * central_frequency * central_frequency) {
  if (!(central_frequency > 0.0) || !std::isfinite(central_frequency))
    throw ConfigError("pulse central frequency must be positive");
  if (!(period > 0.0) || !std::isfinite(period))
    throw ConfigError("pulse period must be positive");
  if (!std::isfinite(amplitude)) throw ConfigError("pulse amplitude must be finite");
}

double Pulse::wrap(double t) const {
  double s = t - period_ * std::floor(t / period_);
  if (s >= period_) s -= period_;  // floor rounding at exact multiples
  if (s < 0.0) s += period_;
  return s;
}

double Pulse::periodic(double t) const {
  const double s = wrap(t) - 0.5 * period_;
  const double as2 = a_ * s * s;
  return amplitude_ * (1.0 - 2.0 * as2) * std::exp(-as2);
}

double Pulse::derivative(double t) const {
  const double s = wrap(t) - 0.5 * period_;
  const double as2 = a_ * s * s;
  // d/ds (1 - 2as^2) e^{-as^2} = (-6as + 4a^2 s^3) e^{-as^2}
  return amplitude_ * (-6.0 * a_ * s + 4.0 * a_ * a_ * s * s * s) * std::exp(-as2);
}

double ricker(double t, const Pulse& pulse) { return pulse(t); }

// ---------------------------------------------------------------------------
// Trajectories
// ---------------------------------------------------------------------------

namespace {

Kinematics eval_form(const CShapePath& f, double t) {
  const double cx = std::cos(f.x_phase - f.x_rate * t);
  const double sx = std::sin(f.x_phase - f.x_rate * t);
  const double sy = std::sin(f.y_phase + f.y_rate * t);
  const double cy = std::cos(f.y_phase + f.y_rate * t);
  const double sz = std::sin(f.z_rate * t);
  const double cz = std::cos(f.z_rate * t);
  return {{f.offset.x + f.ax * cx, f.offset.y + f.ay * sy, f.offset.z + f.az * sz},
          {f.ax * f.x_rate * sx, f.ay * f.y_rate * cy, f.az * f.z_rate * cz}};
}

Kinematics eval_form(const BowPath& f, double t) {
  return {{f.offset.x + f.vx * t, f.offset.y + f.ay * std::sin(f.wy * t),
           f.offset.z + f.az * std::sin(f.wz * t)},
          {f.vx, f.ay * f.wy * std::cos(f.wy * t), f.az * f.wz * std::cos(f.wz * t)}};
}

Kinematics eval_form(const CircleArcPath& f, double t) {
  const double angle = f.phase + f.rate * t;
  return {{f.center.x + f.radius * std::cos(angle), f.center.y + f.radius * std::sin(angle),
           f.center.z},
          {-f.radius * f.rate * std::sin(angle), f.radius * f.rate * std::cos(angle), 0.0}};
}

Kinematics eval_form(const LinePath& f, double t) {
  return {f.origin + f.velocity * t, f.velocity};
}

Kinematics eval_form(const StaticPoint& f, double) { return {f.position, {}}; }

Point3 chord_slope(const TimedPoint& a, const TimedPoint& b) {
  return (b.position - a.position) * (1.0 / (b.t - a.t));
}

Kinematics eval_form(const PiecewiseLinearPath& f, double t) {
  const auto& s = f.samples;
  if (s.size() == 1) return {s.front().position, {}};

  // Segment containing t (extrapolating with the end segments).
  auto upper = std::upper_bound(s.begin(), s.end(), t,
                                [](double v, const TimedPoint& p) { return v < p.t; });
  std::size_t seg = upper == s.begin() ? 0 : static_cast<std::size_t>(upper - s.begin()) - 1;
  seg = std::min(seg, s.size() - 2);
  const TimedPoint& a = s[seg];
  const TimedPoint& b = s[seg + 1];
  const Point3 position = a.position + chord_slope(a, b) * (t - a.t);

  // Velocity: chord slopes sit at segment midpoints.
  const std::size_t segments = s.size() - 1;
  auto midpoint = [&](std::size_t i) { return 0.5 * (s[i].t + s[i + 1].t); };
  Point3 velocity;
  if (t <= midpoint(0)) {
    velocity = chord_slope(s[0], s[1]);
  } else if (t >= midpoint(segments - 1)) {
    velocity = chord_slope(s[segments - 1], s[segments]);
  } else {
    std::size_t i = 0;
    while (i + 1 < segments && midpoint(i + 1) < t) ++i;
    const double m0 = midpoint(i);
    const double m1 = midpoint(i + 1);
    const double w = (t - m0) / (m1 - m0);
    velocity = chord_slope(s[i], s[i + 1]) * (1.0 - w) + chord_slope(s[i + 1], s[i + 2]) * w;
  }
  return {position, velocity};
}

}  // namespace

std::string_view to_string(TrajectoryKind kind) {
  switch (kind) {
    case TrajectoryKind::c_shape: return "c-shape";
    case TrajectoryKind::bow_shape: return "bow-shape";
    case TrajectoryKind::circle_arc: return "circle-arc";
    case TrajectoryKind::line: return "line";
    case TrajectoryKind::stationary: return "static";
    case TrajectoryKind::piecewise_linear: return "piecewise-linear";
  }
  return "unknown";
}

Trajectory::Trajectory(Form form, double t_end) : form_(std::move(form)), t_end_(t_end) {
  if (!(t_end > 0.0) || !std::isfinite(t_end))
    throw ConfigError("trajectory end time must be positive");
  if (const auto* pwl = std::get_if<PiecewiseLinearPath>(&form_)) {
    if (pwl->samples.empty()) throw ConfigError("piecewise-linear trajectory needs samples");
    for (std::size_t i = 0; i < pwl->samples.size(); ++i) {
      if (!pwl->samples[i].position.finite() || !std::isfinite(pwl->samples[i].t))
        throw ConfigError("piecewise-linear sample is not finite");
      if (i > 0 && !(pwl->samples[i].t > pwl->samples[i - 1].t))
        throw ConfigError("piecewise-linear sample times must be strictly increasing");
    }
  }
  constexpr std::array<double, 3> probes{0.0, 0.5, 1.0};
  for (double w : probes) {
    const Kinematics k = eval_extended(w * t_end_);
    if (!k.position.finite() || !k.velocity.finite())
      throw ConfigError("trajectory parameters produce non-finite values");
  }
}

TrajectoryKind Trajectory::kind() const {
  return static_cast<TrajectoryKind>(form_.index());
}

Kinematics Trajectory::eval(double t) const {
  if (!(t >= 0.0 && t <= t_end_))
    throw ConfigError(fmt::format("trajectory time {} outside [0, {}]", t, t_end_));
  return eval_extended(t);
}

Kinematics Trajectory::eval_extended(double t) const {
  return std::visit([t](const auto& f) { return eval_form(f, t); }, form_);
}

double Trajectory::max_speed(std::size_t samples) const {
  samples = std::max<std::size_t>(samples, 2);
  double vmax = 0.0;
  for (std::size_t i = 0; i < samples; ++i) {
    const double t = t_end_ * static_cast<double>(i) / static_cast<double>(samples - 1);
    vmax = std::max(vmax, norm(eval_extended(t).velocity));
  }
  return vmax;
}

Kinematics trajectory_eval(const Trajectory& traj, double t) { return traj.eval(t); }

// ---------------------------------------------------------------------------
// Sensors
// ---------------------------------------------------------------------------

SensorArray::SensorArray(std::vector<Point3> positions, std::string label)
    : positions_(std::move(positions)), label_(std::move(label)) {
  if (positions_.empty()) throw ConfigError("sensor array must contain at least one sensor");
  for (std::size_t a = 0; a < positions_.size(); ++a) {
    if (!positions_[a].finite()) throw ConfigError("sensor position is not finite");
    for (std::size_t b = 0; b < a; ++b) {
      if (positions_[a] == positions_[b])
        throw ConfigError(fmt::format("sensors {} and {} coincide", b, a));
    }
  }
}

Point3 spherical_point(double radius, double theta, double eta) {
  return {radius * std::sin(eta) * std::cos(theta), radius * std::sin(eta) * std::sin(theta),
          radius * std::cos(eta)};
}

SensorArray build_sensor_set(std::string_view label) {
  std::vector<double> thetas;
  std::vector<double> etas;
  if (label == "S1") {
    for (int l = 1; l <= 32; ++l) thetas.push_back(kPi * l / 16.0);
    for (int s = 1; s <= 4; ++s) etas.push_back(kPi * s / 5.0);
  } else if (label == "S2") {
    for (int l = 0; l <= 8; ++l) thetas.push_back(kPi + kPi * l / 8.0);
    etas = {kPi / 4.0, kPi / 2.0};
  } else if (label == "S3") {
    thetas = {kPi, 5.0 * kPi / 4.0, 3.0 * kPi / 2.0};
    etas = {kPi / 4.0, kPi / 2.0};
  } else {
    throw ConfigError(fmt::format("unknown sensor set '{}'", label));
  }
  std::vector<Point3> positions;
  positions.reserve(thetas.size() * etas.size());
  for (double theta : thetas)
    for (double eta : etas) positions.push_back(spherical_point(kSensorRadius, theta, eta));
  return SensorArray(std::move(positions), std::string(label));
}

int default_samples_per_period(std::string_view label) {
  if (label == "S1") return 12;
  if (label == "S2") return 10;
  if (label == "S3") return 7;
  throw ConfigError(fmt::format("unknown sensor set '{}'", label));
}

// ---------------------------------------------------------------------------
// Time and sampling grids
// ---------------------------------------------------------------------------

TimeGrid::TimeGrid(double terminal_time, double period, int samples_per_period)
    : terminal_(terminal_time), period_(period), np_(samples_per_period), periods_(0) {
  if (!(terminal_time > 0.0) || !(period > 0.0) || !std::isfinite(terminal_time) ||
      !std::isfinite(period))
    throw ConfigError("terminal time and period must be positive");
  if (samples_per_period < 1) throw ConfigError("samples per period must be >= 1");
  const double ratio = terminal_time / period;
  const double rounded = std::round(ratio);
  if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-9 * rounded)
    throw ConfigError(fmt::format("T/p = {} is not an integer", ratio));
  periods_ = static_cast<int>(rounded);
}

SamplingGrid::SamplingGrid(Point3 lower, Point3 upper, int n_per_axis)
    : lower_(lower), upper_(upper), n_(n_per_axis) {
  if (n_per_axis < 2) throw ConfigError("sampling grid needs at least 2 points per axis");
  if (!lower.finite() || !upper.finite() || !(lower.x < upper.x) || !(lower.y < upper.y) ||
      !(lower.z < upper.z))
    throw ConfigError("sampling box must satisfy lower < upper componentwise");
  spacing_ = (upper - lower) * (1.0 / (n_per_axis - 1));
}

Point3 SamplingGrid::point(int i, int j, int k) const {
  return {axis(lower_.x, spacing_.x, i, upper_.x), axis(lower_.y, spacing_.y, j, upper_.y),
          axis(lower_.z, spacing_.z, k, upper_.z)};
}

Point3 SamplingGrid::point(std::size_t idx) const {
  const auto n = static_cast<std::size_t>(n_);
  const auto k = static_cast<int>(idx % n);
  const auto j = static_cast<int>((idx / n) % n);
  const auto i = static_cast<int>(idx / (n * n));
  return point(i, j, k);
}

bool SamplingGrid::contains(const Point3& q, double margin) const {
  return q.x >= lower_.x - margin && q.x <= upper_.x + margin && q.y >= lower_.y - margin &&
         q.y <= upper_.y + margin && q.z >= lower_.z - margin && q.z <= upper_.z + margin;
}

std::size_t SamplingGrid::nearest_index(const Point3& q) const {
  auto axis_index = [this](double v, double lo, double h) {
    const double r = std::round((v - lo) / h);
    return static_cast<int>(std::clamp(r, 0.0, static_cast<double>(n_ - 1)));
  };
  return index(axis_index(q.x, lower_.x, spacing_.x), axis_index(q.y, lower_.y, spacing_.y),
               axis_index(q.z, lower_.z, spacing_.z));
}

double distance_to_box(const Point3& q, const Point3& lower, const Point3& upper) {
  const Point3 clamped{std::clamp(q.x, lower.x, upper.x), std::clamp(q.y, lower.y, upper.y),
                       std::clamp(q.z, lower.z, upper.z)};
  return distance(q, clamped);
}

double max_distance_to_box(const Point3& q, const Point3& lower, const Point3& upper) {
  const Point3 far{std::abs(q.x - lower.x) > std::abs(q.x - upper.x) ? lower.x : upper.x,
                   std::abs(q.y - lower.y) > std::abs(q.y - upper.y) ? lower.y : upper.y,
                   std::abs(q.z - lower.z) > std::abs(q.z - upper.z) ? lower.z : upper.z};
  return distance(q, far);
}

}  // namespace movsrc
