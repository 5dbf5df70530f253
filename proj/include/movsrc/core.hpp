#pragma once

// Geometry, pulses, trajectories and discretizations shared by the forward
// solvers, the sampling indicator and the Bayesian refinement.

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace movsrc {

inline constexpr double kPi = 3.141592653589793238462643383279502884;

// Minimum admissible distance between a sensor and any point the field
// kernel 1/|x - y| is evaluated at.
inline constexpr double kMinSeparation = 1e-6;

/// Raised for malformed configuration or invalid arguments.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a field kernel is evaluated at (or too close to) its
/// singularity.
class SingularityError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  constexpr Point3& operator+=(const Point3& o) {
    x += o.x;
    y += o.y;
    z += o.z;
    return *this;
  }
  constexpr Point3& operator-=(const Point3& o) {
    x -= o.x;
    y -= o.y;
    z -= o.z;
    return *this;
  }
  constexpr Point3& operator*=(double s) {
    x *= s;
    y *= s;
    z *= s;
    return *this;
  }
  friend constexpr Point3 operator+(Point3 a, const Point3& b) { return a += b; }
  friend constexpr Point3 operator-(Point3 a, const Point3& b) { return a -= b; }
  friend constexpr Point3 operator*(Point3 a, double s) { return a *= s; }
  friend constexpr Point3 operator*(double s, Point3 a) { return a *= s; }
  friend constexpr bool operator==(const Point3&, const Point3&) = default;

  [[nodiscard]] bool finite() const {
    return std::isfinite(x) && std::isfinite(y) && std::isfinite(z);
  }
};

constexpr double dot(const Point3& a, const Point3& b) {
  return a.x * b.x + a.y * b.y + a.z * b.z;
}
inline double norm(const Point3& a) { return std::sqrt(dot(a, a)); }
inline double distance(const Point3& a, const Point3& b) { return norm(a - b); }

// ---------------------------------------------------------------------------
// Pulse
// ---------------------------------------------------------------------------

/// Ricker wavelet centred in each period, extended causally-periodically:
/// zero for t < 0 and p-periodic on t >= 0.
class Pulse {
 public:
  Pulse(double central_frequency, double period, double amplitude = 1.0);

  /// Causal-periodic value.
  [[nodiscard]] double operator()(double t) const {
    return t < 0.0 ? 0.0 : periodic(t);
  }
  /// Periodic extension to all of R (no causality cut).
  [[nodiscard]] double periodic(double t) const;
  /// Derivative of the periodic extension.
  [[nodiscard]] double derivative(double t) const;

  [[nodiscard]] double central_frequency() const { return f0_; }
  [[nodiscard]] double period() const { return period_; }
  [[nodiscard]] double amplitude() const { return amplitude_; }
  /// max |lambda|; attained at the period centre.
  [[nodiscard]] double max_abs() const { return std::abs(amplitude_); }

 private:
  [[nodiscard]] double wrap(double t) const;

  double f0_;
  double period_;
  double amplitude_;
  double a_;  // pi^2 f0^2
};

double ricker(double t, const Pulse& pulse);

// ---------------------------------------------------------------------------
// Trajectories
// ---------------------------------------------------------------------------

struct Kinematics {
  Point3 position;
  Point3 velocity;
};

/// x = o.x + ax cos(x_phase - x_rate t)
/// y = o.y + ay sin(y_phase + y_rate t)
/// z = o.z + az sin(z_rate t)
struct CShapePath {
  Point3 offset;
  double ax = 0, x_phase = 0, x_rate = 0;
  double ay = 0, y_phase = 0, y_rate = 0;
  double az = 0, z_rate = 0;
};

/// x = o.x + vx t,  y = o.y + ay sin(wy t),  z = o.z + az sin(wz t)
struct BowPath {
  Point3 offset;
  double vx = 0;
  double ay = 0, wy = 0;
  double az = 0, wz = 0;
};

/// Horizontal arc: centre + radius (cos(phase + rate t), sin(phase + rate t), 0).
struct CircleArcPath {
  Point3 center;
  double radius = 0, rate = 0, phase = 0;
};

struct LinePath {
  Point3 origin;
  Point3 velocity;
};

struct StaticPoint {
  Point3 position;
};

struct TimedPoint {
  double t = 0;
  Point3 position;
};

/// Linear interpolation of samples with linear extrapolation beyond the
/// first/last sample. Velocity is the chord slope placed at each segment
/// midpoint, interpolated linearly between midpoints and held constant
/// (one-sided slope) outside the first/last midpoint.
struct PiecewiseLinearPath {
  std::vector<TimedPoint> samples;
};

enum class TrajectoryKind { c_shape, bow_shape, circle_arc, line, stationary, piecewise_linear };

std::string_view to_string(TrajectoryKind kind);

class Trajectory {
 public:
  using Form = std::variant<CShapePath, BowPath, CircleArcPath, LinePath, StaticPoint,
                            PiecewiseLinearPath>;

  Trajectory(Form form, double t_end);

  [[nodiscard]] TrajectoryKind kind() const;
  [[nodiscard]] const Form& form() const { return form_; }
  [[nodiscard]] double t_end() const { return t_end_; }

  /// Position and velocity for t in [0, t_end]; throws ConfigError otherwise.
  [[nodiscard]] Kinematics eval(double t) const;
  /// Same closed form without the domain check; used where the retarded
  /// time may precede the start of the recording.
  [[nodiscard]] Kinematics eval_extended(double t) const;
  [[nodiscard]] Point3 position(double t) const { return eval(t).position; }

  /// max |v| over a uniform sample of [0, t_end].
  [[nodiscard]] double max_speed(std::size_t samples = 4001) const;

 private:
  Form form_;
  double t_end_;
};

Kinematics trajectory_eval(const Trajectory& traj, double t);

// ---------------------------------------------------------------------------
// Sensors and discretizations
// ---------------------------------------------------------------------------

class SensorArray {
 public:
  SensorArray(std::vector<Point3> positions, std::string label);

  [[nodiscard]] std::span<const Point3> positions() const { return positions_; }
  [[nodiscard]] const Point3& operator[](std::size_t l) const { return positions_[l]; }
  [[nodiscard]] std::size_t size() const { return positions_.size(); }
  [[nodiscard]] const std::string& label() const { return label_; }

 private:
  std::vector<Point3> positions_;
  std::string label_;
};

inline constexpr double kSensorRadius = 7.0;

/// Point on the sphere of radius R at azimuth theta and polar angle eta.
Point3 spherical_point(double radius, double theta, double eta);

/// Built-in measurement apertures "S1" (full sphere, 128 sensors), "S2"
/// (quarter, 18) and "S3" (eighth, 6) on the radius-7 sphere.
SensorArray build_sensor_set(std::string_view label);

/// Samples per period used with each built-in aperture (12, 10, 7).
int default_samples_per_period(std::string_view label);

/// Uniform partition of (0, T] into J = T/p periods with N_p samples each.
class TimeGrid {
 public:
  TimeGrid(double terminal_time, double period, int samples_per_period);

  [[nodiscard]] double terminal_time() const { return terminal_; }
  [[nodiscard]] double period() const { return period_; }
  [[nodiscard]] int samples_per_period() const { return np_; }
  [[nodiscard]] int periods() const { return periods_; }
  [[nodiscard]] int total_samples() const { return periods_ * np_; }
  [[nodiscard]] double dt() const { return period_ / np_; }

  /// Global sample time t_k, k = 1..N_T.
  [[nodiscard]] double time(int k) const {
    return terminal_ * static_cast<double>(k) / static_cast<double>(total_samples());
  }
  /// t_j^n, j = 1..J, n = 1..N_p.
  [[nodiscard]] double time(int j, int n) const { return time(column(j, n) + 1); }
  /// Offset of t_j^n from the start of its period, n * dt.
  [[nodiscard]] double phase(int n) const {
    return period_ * static_cast<double>(n) / static_cast<double>(np_);
  }
  /// Zero-based column of t_j^n in a record matrix.
  [[nodiscard]] int column(int j, int n) const { return (j - 1) * np_ + n - 1; }
  [[nodiscard]] double period_midpoint(int j) const { return (j - 0.5) * period_; }

 private:
  double terminal_;
  double period_;
  int np_;
  int periods_;
};

/// n^3 lattice over the box [lower, upper]; linear index (i * n + j) * n + k
/// for axis indices (i, j, k) along (x, y, z).
class SamplingGrid {
 public:
  SamplingGrid(Point3 lower, Point3 upper, int n_per_axis);

  [[nodiscard]] const Point3& lower() const { return lower_; }
  [[nodiscard]] const Point3& upper() const { return upper_; }
  [[nodiscard]] int n() const { return n_; }
  [[nodiscard]] std::size_t size() const {
    return static_cast<std::size_t>(n_) * n_ * n_;
  }
  [[nodiscard]] Point3 spacing() const { return spacing_; }
  /// Length of one lattice cell diagonal.
  [[nodiscard]] double diagonal() const { return norm(spacing_); }

  [[nodiscard]] std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(i) * n_ + j) * n_ + k;
  }
  [[nodiscard]] Point3 point(int i, int j, int k) const;
  [[nodiscard]] Point3 point(std::size_t idx) const;
  [[nodiscard]] bool contains(const Point3& q, double margin = 0.0) const;
  /// Lattice point closest to q (q is clamped into the box first).
  [[nodiscard]] std::size_t nearest_index(const Point3& q) const;

 private:
  [[nodiscard]] double axis(double lo, double h, int i, double hi) const {
    return i == n_ - 1 ? hi : lo + h * i;
  }

  Point3 lower_;
  Point3 upper_;
  int n_;
  Point3 spacing_;
};

/// Distance from q to the closed box [lower, upper] (0 inside).
double distance_to_box(const Point3& q, const Point3& lower, const Point3& upper);
/// Largest distance from q to any point of the box.
double max_distance_to_box(const Point3& q, const Point3& lower, const Point3& upper);

}  // namespace movsrc
