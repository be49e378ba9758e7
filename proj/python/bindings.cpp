#include "affdiff/harness.hpp"

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace affdiff;

namespace {

py::dict table_dict(const SeriesTable& t) {
  py::dict series;
  for (size_t i = 0; i < t.names.size(); ++i)
    series[py::str(t.names[i])] = py::array_t<double>(static_cast<py::ssize_t>(t.columns[i].size()), t.columns[i].data());
  return series;
}

py::dict steady_dict(const theory::SteadyReport& s, const theory::UniversalityReport& u) {
  py::dict d;
  d["msd"] = s.msd;
  d["msd_1"] = s.msd1;
  d["msd_2"] = s.msd2;
  d["msd_cross"] = s.msd_cross;
  d["emse"] = s.emse;
  d["emse_1"] = u.net1;
  d["emse_2"] = u.net2;
  d["emse_optimal"] = u.net;
  d["universal"] = u.universal;
  d["gamma_mean"] = s.gbar;
  d["gamma_ms"] = s.g2bar;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Affine combinations of diffusion LMS strategies";

  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<ConfigError>(m, "ConfigError", base);
  py::register_exception<ParseError>(m, "ParseError", base);
  py::register_exception<IoError>(m, "IoError", base);
  py::register_exception<DomainError>(m, "DomainError", base);

  py::class_<GraphStats>(m, "GraphStats")
      .def_readonly("size", &GraphStats::size)
      .def_readonly("density", &GraphStats::density)
      .def_readonly("lambda2", &GraphStats::lambda2)
      .def_readonly("diameter", &GraphStats::diameter);

  py::class_<Topology>(m, "Topology")
      .def(py::init([](int n, const std::vector<std::pair<int, int>>& edges) { return Topology(n, edges); }),
           py::arg("n_agents"), py::arg("edges"))
      .def_property_readonly("size", &Topology::size)
      .def("neighbors", &Topology::neighbors)
      .def("edges", &Topology::edges)
      .def("stats", [](const Topology& t) { return stats(t); })
      .def("rule", [](const Topology& t, const std::string& rule) { return static_rule(t, parse_static_rule(rule)); },
           py::arg("rule"), "Left-stochastic combination matrix for a named rule.");

  m.def("build_preset", &build_preset, py::arg("name"));

  py::class_<ExperimentConfig>(m, "ExperimentConfig")
      .def_readonly("name", &ExperimentConfig::name)
      .def_readonly("filter_len", &ExperimentConfig::filter_len)
      .def_readwrite("horizon", &ExperimentConfig::horizon)
      .def_readwrite("runs", &ExperimentConfig::runs)
      .def_readwrite("seed", &ExperimentConfig::seed)
      .def_property_readonly("n_agents", &ExperimentConfig::n_agents)
      .def("hash", &ExperimentConfig::hash);

  m.def("parse_config", &parse_config, py::arg("text"), py::arg("base_dir") = std::filesystem::path());
  m.def("load_config", &load_config, py::arg("path"));

  py::class_<SeriesTable>(m, "SeriesTable")
      .def_readonly("kind", &SeriesTable::kind)
      .def_readonly("names", &SeriesTable::names)
      .def_readonly("runs", &SeriesTable::runs)
      .def_readonly("seed", &SeriesTable::seed)
      .def_readonly("config_hash", &SeriesTable::config_hash)
      .def_readonly("stages", &SeriesTable::stages)
      .def("__len__", &SeriesTable::length)
      .def("__getitem__",
           [](const SeriesTable& t, const std::string& name) {
             const auto& c = t.column(name);
             return py::array_t<double>(static_cast<py::ssize_t>(c.size()), c.data());
           })
      .def("to_dict", &table_dict, "Linear-valued series keyed by name.")
      .def("export", [](const SeriesTable& t, const std::filesystem::path& p) { export_table(t, p); }, py::arg("path"));

  m.def("read_table", &read_table, py::arg("path"));

  m.def(
      "simulate",
      [](const ExperimentConfig& cfg, int workers) {
        py::gil_scoped_release release;
        return run_monte_carlo(cfg, workers);
      },
      py::arg("config"), py::arg("workers") = 0, "Monte Carlo average over config.runs runs.");

  m.def(
      "theory",
      [](const ExperimentConfig& cfg) {
        TheoryResult r;
        {
          py::gil_scoped_release release;
          r = run_theory(cfg);
        }
        py::list steady;
        for (size_t s = 0; s < r.steady.size(); ++s) steady.append(steady_dict(r.steady[s], r.universality[s]));
        return py::make_tuple(r.series, steady);
      },
      py::arg("config"), "Returns (series table, per-stage steady-state summaries).");

  m.def(
      "compare",
      [](const SeriesTable& sim, const SeriesTable& th, double tol_msd_db, double tol_gamma, std::optional<long> window) {
        CompareOptions o;
        o.tol_msd_db = tol_msd_db;
        o.tol_gamma = tol_gamma;
        o.window = window;
        const ComparisonReport rep = compare(sim, th, o);
        py::dict series;
        for (const auto& s : rep.series) {
          py::dict d;
          d["max_dev"] = s.max_dev;
          d["steady_dev"] = s.steady_dev;
          d["pass"] = s.pass;
          d["db"] = s.db;
          series[py::str(s.name)] = d;
        }
        return py::make_tuple(rep.pass, series);
      },
      py::arg("sim"), py::arg("theory"), py::arg("tol_msd_db") = 1.0, py::arg("tol_gamma") = 0.05,
      py::arg("window") = py::none(), "Returns (pass, per-series deviations).");

  m.def("optimal_gamma", &optimal_gamma, py::arg("j1"), py::arg("j2"), py::arg("j12"), py::arg("tol") = 1e-15);
}
