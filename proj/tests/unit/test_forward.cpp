#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <limits>
#include <random>

#include "movsrc/experiments.hpp"
#include "movsrc/forward.hpp"
#include "support.hpp"

using namespace movsrc;
using movsrc::testing::max_abs_derivative;
using movsrc::testing::scratch_dir;

namespace {

const Pulse kPulse(100.0, 0.1);
constexpr double kC = 330.0;

double residual(const Point3& x, const Trajectory& traj, double t, double tau, double c) {
  return t - tau - distance(x, traj.eval_extended(tau).position) / c;
}

// Independent root finder: g(tau) = t - tau - |x - z(tau)| / c is strictly
// decreasing when |v| < c.
double bisect_retarded_time(const Point3& x, const Trajectory& traj, double t, double c) {
  double lo = t - 100.0;
  double hi = t;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (residual(x, traj, t, mid, c) > 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

std::vector<Trajectory> builtin_paths() {
  std::vector<Trajectory> out;
  for (const char* id : {"ex1", "ex2", "ex3", "static"})
    for (const auto& s : build_scenario(id).sources) out.push_back(s.path);
  return out;
}

}  // namespace

TEST_CASE("retarded time: static closed form") {
  const Trajectory still(StaticPoint{{0.5, -1.0, 2.0}}, 4.0);
  const Point3 x{-7, 0, 0};
  for (double t : {0.0, 0.3, 2.0}) {
    CHECK(retarded_time(x, still, t, kC) == t - distance(x, {0.5, -1.0, 2.0}) / kC);
  }
}

TEST_CASE("retarded time: C-shaped path against a bisection oracle") {
  const Trajectory ex1 = build_scenario("ex1").sources[0].path;
  const Point3 x{-7, 0, 0};
  const double tau = retarded_time(x, ex1, 1.0, kC);
  CHECK(std::abs(residual(x, ex1, 1.0, tau, kC)) < 1e-12);
  CHECK(std::abs(tau - bisect_retarded_time(x, ex1, 1.0, kC)) < 1e-12);
  CHECK(tau <= 1.0);
}

TEST_CASE("retarded time: near-infinite speed gives tau -> t") {
  const Trajectory ex1 = build_scenario("ex1").sources[0].path;
  CHECK(std::abs(retarded_time({-7, 0, 0}, ex1, 1.0, 1e9) - 1.0) < 1e-7);
}

TEST_CASE("retarded time: residual and contraction on random samples") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> ut(0.0, 4.0);
  const auto sensors = build_sensor_set("S1");
  std::uniform_int_distribution<std::size_t> ul(0, sensors.size() - 1);
  for (const auto& path : builtin_paths()) {
    const double ratio = path.max_speed() / kC;
    for (int i = 0; i < 200; ++i) {
      const Point3 x = sensors[ul(rng)];
      const double t = ut(rng);
      const double tau = retarded_time(x, path, t, kC);
      CHECK(std::abs(residual(x, path, t, tau, kC)) <= 1e-12);
      CHECK(tau <= t);
      const auto it = retarded_time_iterates(x, path, t, kC);
      // Contraction by vmax / c, up to rounding of tau near t.
      const double ulps = 8.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, t);
      for (std::size_t k = 2; k < it.size(); ++k) {
        const double prev = std::abs(it[k - 1] - it[k - 2]);
        CHECK(std::abs(it[k] - it[k - 1]) <= ratio * prev * (1 + 1e-9) + ulps);
      }
    }
  }
}

TEST_CASE("retarded time: a superluminal path fails to converge") {
  const Trajectory fast(LinePath{{0, 0, 0}, {2.0, 0.0, 0.0}}, 4.0);
  CHECK_THROWS_AS(retarded_time({7, 0, 0}, fast, 3.0, 1.0), std::runtime_error);
}

TEST_CASE("lw_field equals quasistatic_field for a static source") {
  const Trajectory still(StaticPoint{{1.0, -1.5, 0.5}}, 4.0);
  const auto sensors = build_sensor_set("S1");
  double worst = 0.0;
  for (std::size_t l = 0; l < sensors.size(); ++l)
    for (int k = 0; k <= 400; ++k) {
      const double t = 0.01 * k;
      worst = std::max(worst, std::abs(lw_field(sensors[l], t, still, kPulse, kC) -
                                       quasistatic_field(sensors[l], t, still, kPulse, kC)));
    }
  CHECK(worst <= 1e-13);
}

TEST_CASE("fields vanish before the first arrival") {
  const Trajectory ex1 = build_scenario("ex1").sources[0].path;
  const Point3 x{-7, 0, 0};
  const double arrival = distance(x, ex1.position(0.0)) / kC;
  for (double t : {0.0, 0.3 * arrival, 0.9 * arrival}) {
    CHECK(lw_field(x, t, ex1, kPulse, kC) == 0.0);
    CHECK(quasistatic_field(x, t, ex1, kPulse, kC) == 0.0);
  }
}

TEST_CASE("quasistatic field: peak alignment and periodicity") {
  const Trajectory origin(StaticPoint{{0, 0, 0}}, 4.0);
  const Point3 x{-7, 0, 0};
  const double t = 0.05 + 7.0 / kC;
  CHECK(quasistatic_field(x, t, origin, kPulse, kC) ==
        doctest::Approx(1.0 / (28.0 * kPi)).epsilon(1e-14));
  CHECK(1.0 / (28.0 * kPi) == doctest::Approx(0.011368).epsilon(1e-4));
  for (double s : {0.031, 0.077, 1.234})
    CHECK(quasistatic_field(x, s + 0.1, origin, kPulse, kC) ==
          doctest::Approx(quasistatic_field(x, s, origin, kPulse, kC)).epsilon(1e-9));
  CHECK_THROWS_AS(quasistatic_field({0, 0, 0}, 1.0, origin, kPulse, kC), SingularityError);
  CHECK_THROWS_AS(lw_field({0, 0, 0}, 1.0, origin, kPulse, kC), SingularityError);
}

TEST_CASE("lw and quasistatic fields differ by at most the slow-source bound") {
  // |lw - qs| <= [C2 beta r_max / c + 2 C1 beta] / (4 pi d (1 - beta)),
  // beta = vmax / c: pulse shift by at most beta r_max / c plus the Doppler
  // and distance changes, each O(beta).
  const Trajectory ex1 = build_scenario("ex1").sources[0].path;
  const auto sensors = build_sensor_set("S3");
  const double beta = ex1.max_speed() / kC;
  const double c1 = kPulse.max_abs();
  const double c2 = max_abs_derivative(kPulse);
  double d = 1e300;
  double r_max = 0.0;
  for (int i = 0; i <= 4000; ++i) {
    const Point3 z = ex1.position(4.0 * i / 4000.0);
    for (const auto& x : sensors.positions()) {
      d = std::min(d, distance(x, z));
      r_max = std::max(r_max, distance(x, z));
    }
  }
  const double bound = (c2 * beta * r_max / kC + 2 * c1 * beta) / (4 * kPi * d * (1 - beta));
  double worst = 0.0;
  for (const auto& x : sensors.positions())
    for (int k = 0; k <= 8000; ++k) {
      const double t = 4.0 * k / 8000.0;
      worst = std::max(worst, std::abs(lw_field(x, t, ex1, kPulse, kC) -
                                       quasistatic_field(x, t, ex1, kPulse, kC)));
    }
  CHECK(worst > 0.0);
  CHECK(worst <= bound);
}

TEST_CASE("simulate_record: shape, superposition, zero and scaled amplitude") {
  auto cfg = build_scenario("ex3", "S3");
  const FieldRecord both = simulate_record(cfg, FieldModel::quasistatic);
  CHECK(both.rows() == 6);
  CHECK(both.cols() == 280);

  auto first = cfg;
  first.sources = {cfg.sources[0]};
  auto second = cfg;
  second.sources = {cfg.sources[1]};
  for (FieldModel model : {FieldModel::quasistatic, FieldModel::lienard_wiechert}) {
    const auto a = simulate_record(first, model);
    const auto b = simulate_record(second, model);
    const auto ab = simulate_record(cfg, model);
    for (std::size_t i = 0; i < ab.values().size(); ++i)
      CHECK(ab.values()[i] == a.values()[i] + b.values()[i]);
  }

  auto silent = first;
  silent.sources[0].pulse = Pulse(100, 0.1, 0.0);
  const auto zero = simulate_record(silent, FieldModel::lienard_wiechert);
  CHECK(std::all_of(zero.values().begin(), zero.values().end(), [](double v) { return v == 0.0; }));

  auto loud = first;
  loud.sources[0].pulse = Pulse(100, 0.1, 2.5);
  const auto base = simulate_record(first, FieldModel::lienard_wiechert);
  const auto scaled = simulate_record(loud, FieldModel::lienard_wiechert);
  for (std::size_t i = 0; i < base.values().size(); ++i)
    CHECK(std::abs(scaled.values()[i] - 2.5 * base.values()[i]) <= 1e-14 * std::abs(2.5 * base.values()[i]) + 1e-300);
}

TEST_CASE("simulated magnitudes respect the boundedness bound") {
  for (const char* id : {"ex1", "ex2"}) {
    for (const char* geometry : {"S1", "S3"}) {
      const auto cfg = build_scenario(id, geometry);
      const auto& path = cfg.sources[0].path;
      double d = 1e300;
      for (int i = 0; i <= 4000; ++i)
        for (const auto& x : cfg.sensors.positions())
          d = std::min(d, distance(x, path.position(4.0 * i / 4000.0)));
      const double bound = kPulse.max_abs() / (4 * kPi * d);
      const auto rec = simulate_record(cfg, FieldModel::quasistatic);
      for (double v : rec.values()) CHECK(std::abs(v) <= bound * (1 + 1e-12));
    }
  }
}

TEST_CASE("simulate_record is independent of the thread count") {
  const auto cfg = build_scenario("ex1", "S2");
  const auto a = simulate_record(cfg, FieldModel::lienard_wiechert, 1);
  const auto b = simulate_record(cfg, FieldModel::lienard_wiechert, 3);
  CHECK(std::equal(a.values().begin(), a.values().end(), b.values().begin()));
}

TEST_CASE("add_noise: identity, bound and determinism") {
  const auto cfg = build_scenario("ex1", "S3");
  const auto clean = simulate_record(cfg, FieldModel::quasistatic);
  const auto same = add_noise(clean, 0.0, 3);
  CHECK(std::equal(clean.values().begin(), clean.values().end(), same.values().begin()));

  const auto a = add_noise(clean, 0.1, 42);
  const auto b = add_noise(clean, 0.1, 42);
  const auto c = add_noise(clean, 0.1, 43);
  CHECK(std::equal(a.values().begin(), a.values().end(), b.values().begin()));
  CHECK_FALSE(std::equal(a.values().begin(), a.values().end(), c.values().begin()));
  for (std::size_t i = 0; i < clean.values().size(); ++i) {
    const double u = clean.values()[i];
    CHECK(std::abs(a.values()[i] - u) <= 0.1 * std::abs(u) * (1 + 1e-15));
  }
  CHECK(a.noise_level() == 0.1);
  CHECK(a.noise_seed() == 42);
  CHECK_THROWS_AS(add_noise(clean, -0.01, 1), ConfigError);
}

TEST_CASE("record files round-trip bit for bit") {
  const auto cfg = build_scenario("ex3", "S2");
  const auto rec = add_noise(simulate_record(cfg, FieldModel::lienard_wiechert), 0.05, 9);
  const auto dir = scratch_dir("record_roundtrip");
  write_record(rec, dir);
  const auto back = read_record(dir);
  CHECK(back.origin() == RecordOrigin::file);
  CHECK(back.rows() == rec.rows());
  CHECK(back.cols() == rec.cols());
  CHECK(std::equal(rec.values().begin(), rec.values().end(), back.values().begin()));
  CHECK(back.noise_level() == 0.05);
  CHECK(back.noise_seed() == 9);
  CHECK(back.wave_speed() == rec.wave_speed());
  CHECK(back.pulse().central_frequency() == 100.0);
  for (std::size_t l = 0; l < rec.rows(); ++l) CHECK(back.sensors()[l] == rec.sensors()[l]);

  // A truncated matrix is rejected against the sidecar.
  {
    std::ifstream in(dir / "record.csv");
    std::string header, row;
    std::getline(in, header);
    std::getline(in, row);
    std::ofstream out(dir / "record.csv");
    out << header << '\n' << row << '\n';
  }
  CHECK_THROWS_AS(read_record(dir), ConfigError);
  CHECK_THROWS_AS(read_record(dir / "missing"), ConfigError);
}

TEST_CASE("FieldRecord rejects bad shapes and non-finite values") {
  const auto sensors = build_sensor_set("S3");
  const TimeGrid time(0.2, 0.1, 7);
  CHECK_THROWS_AS(FieldRecord(sensors, time, kPulse, kC, std::vector<double>(5), RecordOrigin::file),
                  ConfigError);
  std::vector<double> bad(6 * 14, 0.0);
  bad[3] = std::nan("");
  CHECK_THROWS_AS(FieldRecord(sensors, time, kPulse, kC, bad, RecordOrigin::file), ConfigError);
}
