#include <doctest.h>

#include "movsrc/config.hpp"
#include "movsrc/experiments.hpp"

using namespace movsrc;

TEST_CASE("format_scenario and parse_scenario round-trip exactly") {
  for (const char* id : {"ex1", "ex2", "ex3", "static"}) {
    const ScenarioConfig a = build_scenario(id, "S2");
    const std::string text = format_scenario(a);
    const ScenarioConfig b = parse_scenario(text);
    CHECK(format_scenario(b) == text);
    CHECK(b.sources.size() == a.sources.size());
    CHECK(b.sensors.size() == 18);
    CHECK(b.time.samples_per_period() == 10);
    for (std::size_t s = 0; s < a.sources.size(); ++s)
      for (double t : {0.0, 1.234, 4.0})
        CHECK(b.sources[s].path.position(t) == a.sources[s].path.position(t));
  }
}

TEST_CASE("parse_scenario: defaults, comments and custom sensors") {
  const auto cfg = parse_scenario(R"(# comment
id = tiny
time.terminal = 0.2
time.period = 0.1
sensors.positions = 7 0 0, 0 7 0, 0 0 7
sources = 1
source.1.kind = static
source.1.params = 0.5 0.5 0.5   # trailing comment
source.1.f0 = 100
)");
  CHECK(cfg.id == "tiny");
  CHECK(cfg.sensors.size() == 3);
  CHECK(cfg.time.periods() == 2);
  CHECK(cfg.c == 330.0);
  CHECK(cfg.sources[0].path.position(0.1) == Point3{0.5, 0.5, 0.5});
  CHECK(cfg.mcmc.samples == 5000);
}

TEST_CASE("parse_scenario rejects unknown and duplicate keys and bad values") {
  const std::string base = "time.terminal = 0.2\ntime.period = 0.1\nsources = 1\n"
                           "source.1.kind = static\nsource.1.params = 0 0 0\n";
  CHECK_NOTHROW(parse_scenario(base));
  CHECK_THROWS_AS(parse_scenario(base + "grid.bogus = 3\n"), ConfigError);
  CHECK_THROWS_AS(parse_scenario(base + "seed = 1\nseed = 2\n"), ConfigError);
  CHECK_THROWS_AS(parse_scenario(base + "c = fast\n"), ConfigError);
  CHECK_THROWS_AS(parse_scenario(base + "c = -1\n"), ConfigError);
  CHECK_THROWS_AS(parse_scenario(base + "noise.level = -0.1\n"), ConfigError);
  CHECK_THROWS_AS(parse_scenario(base + "mcmc.beta = 1.5\n"), ConfigError);
  CHECK_THROWS_AS(parse_scenario(base + "mcmc.samples = 0\n"), ConfigError);
  CHECK_THROWS_AS(parse_scenario(base + "mcmc.sigma_prop = 0\n"), ConfigError);
  CHECK_THROWS_AS(parse_scenario("time.terminal = 0.25\ntime.period = 0.1\nsources = 1\n"
                                  "source.1.kind = static\nsource.1.params = 0 0 0\n"),
                  ConfigError);
  CHECK_THROWS_AS(parse_scenario("line without equals sign\n"), ConfigError);
}

TEST_CASE("validation: speed limit and sensor separation") {
  ScenarioConfig cfg = build_scenario("static");
  CHECK_NOTHROW(cfg.validate());

  cfg.c = 1.0;
  cfg.sources = {{Trajectory(LinePath{{0, 0, 0}, {0.5, 0.5, 0.5}}, 4.0), Pulse(100, 0.1)}};
  CHECK_NOTHROW(cfg.validate());
  cfg.sources = {{Trajectory(LinePath{{0, 0, 0}, {1.0, 0.0, 0.0}}, 4.0), Pulse(100, 0.1)}};
  CHECK_THROWS_AS(cfg.validate(), ConfigError);

  // A source passing through a sensor.
  cfg = build_scenario("static");
  cfg.sources = {{Trajectory(StaticPoint{{-7.0, 0.0, 0.0}}, 4.0), Pulse(100, 0.1)}};
  cfg.sensors = build_sensor_set("S3");
  CHECK_THROWS_AS(cfg.validate(), ConfigError);

  // A sensor on a lattice point.
  cfg = build_scenario("static");
  cfg.sensors = SensorArray({{5.0, 5.0, 5.0}, {7, 0, 0}}, "custom");
  CHECK_THROWS_AS(cfg.validate(), ConfigError);

  // Pulse period must equal the time grid period.
  cfg = build_scenario("static");
  cfg.sources[0].pulse = Pulse(100, 0.2);
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("make_trajectory checks parameter counts") {
  CHECK_NOTHROW(make_trajectory("line", {0, 0, 0, 1, 0, 0}, 1.0));
  CHECK_THROWS_AS(make_trajectory("line", {0, 0, 0}, 1.0), ConfigError);
  CHECK_THROWS_AS(make_trajectory("spiral", {0, 0, 0}, 1.0), ConfigError);
  const auto t = make_trajectory("c-shape", trajectory_params(build_scenario("ex1").sources[0].path), 4.0);
  CHECK(t.position(2.0) == build_scenario("ex1").sources[0].path.position(2.0));
}

TEST_CASE("derive_seed separates streams and indices deterministically") {
  CHECK(derive_seed(7, 0, 0) == derive_seed(7, 0, 0));
  CHECK(derive_seed(7, 0, 0) != derive_seed(7, 1, 0));
  CHECK(derive_seed(7, 1, 0) != derive_seed(7, 1, 1));
  CHECK(derive_seed(7, 1, 1) != derive_seed(8, 1, 1));
}

TEST_CASE("number formatting round-trips") {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0}) {
    CHECK(parse_double(format_double(v), "v") == v);
  }
  CHECK_THROWS_AS(parse_double("1.5x", "v"), ConfigError);
  CHECK_THROWS_AS(parse_integer("3.5", "n"), ConfigError);
  CHECK(trim("  a b \t") == "a b");
}
