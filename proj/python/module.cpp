#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "movsrc/adsm.hpp"
#include "movsrc/bayes.hpp"
#include "movsrc/config.hpp"
#include "movsrc/experiments.hpp"
#include "movsrc/forward.hpp"

namespace py = pybind11;
using namespace pybind11::literals;

// Point3 crosses the boundary as a 3-tuple of floats.
namespace pybind11::detail {
template <>
struct type_caster<movsrc::Point3> {
  PYBIND11_TYPE_CASTER(movsrc::Point3, const_name("tuple[float, float, float]"));

  bool load(handle src, bool) {
    if (!isinstance<sequence>(src)) return false;
    const auto seq = reinterpret_borrow<sequence>(src);
    if (seq.size() != 3) return false;
    value = {seq[0].cast<double>(), seq[1].cast<double>(), seq[2].cast<double>()};
    return true;
  }

  static handle cast(const movsrc::Point3& p, return_value_policy, handle) {
    return make_tuple(p.x, p.y, p.z).release();
  }
};
}  // namespace pybind11::detail

namespace {

using namespace movsrc;

py::array_t<double> track_array(const std::vector<Point3>& track) {
  py::array_t<double> out({static_cast<py::ssize_t>(track.size()), py::ssize_t{3}});
  auto v = out.mutable_unchecked<2>();
  for (std::size_t j = 0; j < track.size(); ++j) {
    v(j, 0) = track[j].x;
    v(j, 1) = track[j].y;
    v(j, 2) = track[j].z;
  }
  return out;
}

std::vector<Point3> track_points(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 2 || a.shape(1) != 3) throw ConfigError("track must have shape (J, 3)");
  auto v = a.unchecked<2>();
  std::vector<Point3> out(static_cast<std::size_t>(a.shape(0)));
  for (py::ssize_t j = 0; j < a.shape(0); ++j) out[static_cast<std::size_t>(j)] = {v(j, 0), v(j, 1), v(j, 2)};
  return out;
}

py::list track_list(const std::vector<std::vector<Point3>>& tracks) {
  py::list out;
  for (const auto& t : tracks) out.append(track_array(t));
  return out;
}

py::list metrics_list(const std::vector<PathMetrics>& metrics) {
  py::list out;
  for (const auto& m : metrics)
    out.append(py::dict("source"_a = m.source, "track"_a = m.track, "errors"_a = m.errors,
                        "mean"_a = m.mean, "max"_a = m.max, "rmse"_a = m.rmse));
  return out;
}

py::array_t<double> field_array(const IndicatorField& field) {
  const auto n = static_cast<py::ssize_t>(field.grid().n());
  py::array_t<double> out({n, n, n});
  std::copy(field.values().begin(), field.values().end(), out.mutable_data());
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Moving point source reconstruction: forward model, direct sampling and MCMC";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<SingularityError>(m, "SingularityError", PyExc_ArithmeticError);

  py::class_<SamplingGrid>(m, "SamplingGrid")
      .def(py::init<Point3, Point3, int>(), "lower"_a, "upper"_a, "n"_a)
      .def_property_readonly("lower", &SamplingGrid::lower)
      .def_property_readonly("upper", &SamplingGrid::upper)
      .def_property_readonly("n", &SamplingGrid::n)
      .def_property_readonly("spacing", &SamplingGrid::spacing)
      .def("point", py::overload_cast<std::size_t>(&SamplingGrid::point, py::const_), "index"_a);

  py::class_<ScenarioConfig>(m, "Scenario")
      .def_readwrite("id", &ScenarioConfig::id)
      .def_readwrite("noise_level", &ScenarioConfig::noise_level)
      .def_readwrite("seed", &ScenarioConfig::seed)
      .def_readwrite("grid", &ScenarioConfig::grid)
      .def_readonly("c", &ScenarioConfig::c)
      .def_property(
          "samples",
          [](const ScenarioConfig& s) { return s.mcmc.samples; },
          [](ScenarioConfig& s, int k) { s.mcmc.samples = k; })
      .def_property_readonly("periods", [](const ScenarioConfig& s) { return s.time.periods(); })
      .def_property_readonly("sources", [](const ScenarioConfig& s) { return s.sources.size(); })
      .def_property_readonly("sensors",
                             [](const ScenarioConfig& s) {
                               const auto p = s.sensors.positions();
                               return track_array({p.begin(), p.end()});
                             })
      .def("truth", [](const ScenarioConfig& s, std::size_t k) {
        return track_array(midpoint_truth(s, k));
      }, "source"_a = 0, "exact positions at the period midpoints, shape (J, 3)")
      .def("validate", &ScenarioConfig::validate)
      .def("to_text", [](const ScenarioConfig& s) { return format_scenario(s); })
      .def_static("from_text", [](const std::string& text) { return parse_scenario(text); });

  py::class_<FieldRecord>(m, "Record")
      .def_property_readonly("values",
                             [](const FieldRecord& r) {
                               py::array_t<double> out({static_cast<py::ssize_t>(r.rows()),
                                                        static_cast<py::ssize_t>(r.cols())});
                               std::copy(r.values().begin(), r.values().end(), out.mutable_data());
                               return out;
                             })
      .def_property_readonly("periods", [](const FieldRecord& r) { return r.time().periods(); })
      .def_property_readonly("samples_per_period",
                             [](const FieldRecord& r) { return r.time().samples_per_period(); })
      .def_property_readonly("noise_level", &FieldRecord::noise_level)
      .def("save", [](const FieldRecord& r, const std::filesystem::path& dir) { write_record(r, dir); })
      .def_static("load", &read_record, "dir"_a);

  m.def("build_scenario", &build_scenario, "id"_a, "geometry"_a = "S1", "grid_n"_a = 41);
  m.def("derive_seed", &derive_seed, "master"_a, "stream"_a, "index"_a);

  m.def(
      "simulate",
      [](const ScenarioConfig& s, const std::string& model, unsigned threads) {
        return simulate_record(s, parse_field_model(model), threads);
      },
      "scenario"_a, "model"_a = "quasistatic", "threads"_a = 0);
  m.def("add_noise", &add_noise, "record"_a, "eps"_a, "seed"_a);

  m.def("indicator", &indicator, "record"_a, "period"_a, "y"_a, "floor"_a = 1e-14);
  m.def(
      "sweep",
      [](const FieldRecord& r, const SamplingGrid& g, int j, unsigned threads) {
        std::optional<IndicatorField> field;
        {
          py::gil_scoped_release release;
          field.emplace(sweep(r, g, j, {1e-14, threads}));
        }
        return field_array(*field);
      },
      "record"_a, "grid"_a, "period"_a, "threads"_a = 0,
      "indicator on the lattice, shape (n, n, n) indexed [ix, iy, iz]");
  m.def(
      "run_adsm",
      [](const FieldRecord& r, const SamplingGrid& g, int peaks, double r_min, unsigned threads) {
        CoarsePath coarse;
        {
          py::gil_scoped_release release;
          coarse = run_adsm(r, g, peaks, r_min, {1e-14, threads});
        }
        return track_list(positions(coarse.tracks));
      },
      "record"_a, "grid"_a, "peaks"_a = 1, "r_min"_a = 1.0, "threads"_a = 0,
      "coarse tracks, one (J, 3) array per source");

  m.def(
      "path_error",
      [](const std::vector<py::array_t<double, py::array::c_style | py::array::forcecast>>& tracks,
         const ScenarioConfig& s) {
        std::vector<std::vector<Point3>> pts;
        for (const auto& t : tracks) pts.push_back(track_points(t));
        return metrics_list(path_error(pts, s));
      },
      "tracks"_a, "scenario"_a);
  m.def(
      "read_path",
      [](const std::filesystem::path& file) { return track_list(read_path_tracks(file)); },
      "file"_a);

  m.def(
      "run_pipeline",
      [](const ScenarioConfig& s, const std::optional<std::filesystem::path>& out,
         unsigned threads, bool dump_chains) {
        PipelineOptions opts;
        opts.threads = threads;
        opts.dump_chains = dump_chains;
        PipelineReport report;
        {
          py::gil_scoped_release release;
          report = out ? run_pipeline(s, *out, opts) : run_pipeline(s, opts);
        }
        py::list acceptance;
        for (const auto& a : report.refined.acceptance) acceptance.append(a);
        return py::dict("adsm"_a = track_list(positions(report.coarse.tracks)),
                        "mcmc"_a = track_list(report.refined.tracks),
                        "adsm_metrics"_a = metrics_list(report.adsm_metrics),
                        "mcmc_metrics"_a = metrics_list(report.mcmc_metrics),
                        "acceptance"_a = acceptance);
      },
      "scenario"_a, "out"_a = py::none(), "threads"_a = 0, "dump_chains"_a = false);
}
