#include "affdiff/harness.hpp"

#include "doctest.h"
#include "json.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace affdiff;
namespace fs = std::filesystem;

namespace {

const char* kSmall = R"({
  "name": "small",
  "topology": "net1",
  "filter_len": 2,
  "agents": {"sigma_x2": 1.0, "sigma_z2": 0.05},
  "targets": {"stages": [{"start": 0, "w": [0.5, -0.3]}]},
  "components": [{"a2": "identity", "mu": 0.05}, {"a2": "averaging", "mu": 0.05}],
  "combiner": {"scheme": "power_normalized", "nu": 0.01},
  "horizon": 200,
  "runs": 8,
  "seed": 11
})";

ExperimentConfig small(const std::string& patch = "{}") {
  auto j = nlohmann::json::parse(kSmall);
  j.merge_patch(nlohmann::json::parse(patch));
  return parse_config(j.dump());
}

fs::path tmp(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "affdiff_tests";
  fs::create_directories(dir);
  return dir / name;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool same(const SeriesTable& a, const SeriesTable& b) { return a.names == b.names && a.columns == b.columns; }

}  // namespace

TEST_CASE("config parsing") {
  const ExperimentConfig c = small();
  CHECK(c.n_agents() == 10);
  CHECK(c.components.size() == 2);
  CHECK(c.combiner.m == 2);
  CHECK(c.combiner.nu.size() == 10);
  CHECK(c.hash().size() == 16);
  CHECK(c.hash() != small(R"({"seed": 12})").hash());
  CHECK(c.stationary_intervals() == std::vector<std::pair<long, long>>{{0, 200}});
}

TEST_CASE("config errors") {
  CHECK_THROWS_AS(parse_config("{not json"), ParseError);
  CHECK_THROWS_AS(parse_config("[]"), ParseError);
  CHECK_THROWS_AS(small(R"({"horizon": null})"), ParseError);
  CHECK_THROWS_AS(small(R"({"horizon": "long"})"), ParseError);
  CHECK_THROWS_AS(small(R"({"horizon": 0})"), ConfigError);
  CHECK_THROWS_AS(small(R"({"topology": "net9"})"), ConfigError);
  CHECK_THROWS_AS(small(R"({"agents": {"sigma_x2": [1, 2]}})"), ConfigError);
  CHECK_THROWS_AS(small(R"({"combiner": {"scheme": "newton"}})"), ConfigError);
  CHECK_THROWS_AS(small(R"({"components": [{"a2": "identity", "mu": 0.05}]})"), ConfigError);
  CHECK_THROWS_AS(small(R"({"targets": {"stages": [{"start": 5, "w": [0.5, -0.3]}]}})"), ConfigError);
  CHECK_THROWS_AS(small(R"({"targets": {"stages": [{"start": 0, "w": [0.5]}]}})"), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), IoError);
}

TEST_CASE("inline and file topologies") {
  const ExperimentConfig c = small(R"({"topology": {"n_agents": 3, "edges": [[1, 2], [2, 3]]}})");
  CHECK(c.n_agents() == 3);
  const fs::path edges = tmp("path.edges");
  std::ofstream(edges) << "1 2\n2 3\n3 4\n";
  const fs::path cfg = tmp("path.json");
  auto j = nlohmann::json::parse(kSmall);
  j["topology"] = {{"edge_list", "path.edges"}};
  std::ofstream(cfg) << j.dump();
  CHECK(load_config(cfg).n_agents() == 4);
}

TEST_CASE("series layout") {
  const SeriesTable t = run_monte_carlo(small(R"({"runs": 1, "horizon": 5})"), 1);
  CHECK(t.length() == 5);
  CHECK(t.names.front() == "msd_1");
  CHECK(t.index_of("msd") == 3);
  CHECK(t.index_of("emse_cross") == 6);
  CHECK(t.index_of("gamma_1") == 8);
  CHECK(t.index_of("gamma2_10") == static_cast<int>(t.names.size()) - 1);
  CHECK(t.column("gamma_3")[0] == 0.5);
  CHECK(t.column("gamma2_3")[0] == 0.25);
  CHECK(t.filtered({"msd"}).names.size() == 4);
  CHECK_THROWS_AS(t.column("nothing"), ConfigError);
}

TEST_CASE("replicated runs equal a single run") {
  const SeriesTable one = run_monte_carlo(small(R"({"runs": 1})"), 1);
  const SeriesTable two = run_monte_carlo(small(R"({"runs": 2, "replicate_runs": true})"), 2);
  for (size_t s = 0; s < one.names.size(); ++s)
    for (long t = 0; t < one.length(); ++t) CHECK(two.columns[s][static_cast<size_t>(t)] == doctest::Approx(one.columns[s][static_cast<size_t>(t)]).epsilon(1e-15));
}

TEST_CASE("frozen coefficient reproduces component 1") {
  const SeriesTable t = run_monte_carlo(small(R"({"combiner": {"nu": 0.0, "gamma0": 1.0}})"), 2);
  CHECK(t.column("msd") == t.column("msd_1"));
  CHECK(t.column("emse") == t.column("emse_1"));
}

TEST_CASE("results do not depend on the worker count") {
  const ExperimentConfig c = small(R"({"runs": 13})");
  const SeriesTable a = run_monte_carlo(c, 1);
  CHECK(same(a, run_monte_carlo(c, 2)));
  CHECK(same(a, run_monte_carlo(c, 5)));
  CHECK(same(a, run_monte_carlo(c, 16)));
}

TEST_CASE("aggregation is linear over run ranges") {
  const SeriesTable all = run_monte_carlo(small(R"({"runs": 8})"), 3);
  const SeriesTable lo = run_monte_carlo(small(R"({"runs": 4})"), 3);
  const SeriesTable hi = run_monte_carlo(small(R"({"runs": 4, "run_offset": 4})"), 3);
  for (size_t s = 0; s < all.names.size(); ++s)
    for (long t = 0; t < all.length(); ++t) {
      const auto u = static_cast<size_t>(t);
      CHECK(all.columns[s][u] == doctest::Approx(0.5 * (lo.columns[s][u] + hi.columns[s][u])).epsilon(1e-12));
    }
}

TEST_CASE("components are unaffected by the combiner and by their partner") {
  const SeriesTable a = run_monte_carlo(small(), 2);
  const SeriesTable b =
      run_monte_carlo(small(R"({"components": [{"a2": "identity", "mu": 0.05}, {"a2": "metropolis", "mu": 0.02}],
                                "combiner": {"scheme": "sign_regressor", "nu": 0.03}})"),
                      2);
  CHECK(a.column("msd_1") == b.column("msd_1"));
  CHECK(a.column("emse_1") == b.column("emse_1"));
}

TEST_CASE("multi-strategy series") {
  const ExperimentConfig c = small(R"({"components": [{"a2": "identity", "mu": 0.05}, {"a2": "averaging", "mu": 0.05},
                                                      {"a2": "metropolis", "mu": 0.05}],
                                       "combiner": {"scheme": "multi_sign", "nu": 0.01}, "runs": 2})");
  const SeriesTable t = run_monte_carlo(c, 2);
  CHECK(t.index_of("msd_3") == 2);
  CHECK(t.index_of("gamma_10_3") == static_cast<int>(t.names.size()) - 1);
  for (long n = 0; n < t.length(); ++n) {
    const auto u = static_cast<size_t>(n);
    CHECK(t.column("gamma_4_1")[u] + t.column("gamma_4_2")[u] + t.column("gamma_4_3")[u] == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK_THROWS_AS(run_theory(c), DomainError);
}

TEST_CASE("theory refuses adaptive matrices") {
  CHECK_THROWS_AS(run_theory(small(R"({"components": [{"a2_mode": "adaptive_projection", "mu": 0.05},
                                                      {"a2": "averaging", "mu": 0.05}]})")),
                  DomainError);
}

TEST_CASE("scalar LMS theory") {
  const ExperimentConfig c = parse_config(R"({
    "topology": {"n_agents": 1},
    "filter_len": 1,
    "agents": {"sigma_x2": 1.0, "sigma_z2": 0.1},
    "targets": {"stages": [{"start": 0, "w": [1.0]}]},
    "components": [{"mu": 0.01}, {"mu": 0.01}],
    "combiner": {"scheme": "power_normalized", "nu": 0.01},
    "horizon": 5000, "runs": 1, "seed": 1
  })");
  const TheoryResult r = run_theory(c);
  const double expect = 0.01 * 0.1 / (2 - 0.01);
  CHECK(std::abs(r.steady[0].msd - expect) <= 1e-12 * expect);
  CHECK(r.series.column("msd").back() == doctest::Approx(expect).epsilon(1e-6));
  const auto& comb = r.series.column("msd");
  const auto& first = r.series.column("msd_1");
  for (size_t t = 0; t < comb.size(); ++t) CHECK(comb[t] == doctest::Approx(first[t]).epsilon(1e-12));
  CHECK(comb[0] == 1.0);
}

TEST_CASE("theory tracks moments across a target change") {
  const ExperimentConfig c = small(R"({"targets": {"transition_len": 50,
      "stages": [{"start": 0, "w": [0.5, -0.3]}, {"start": 300, "w": [-0.2, 0.4]}]}, "horizon": 800})");
  const TheoryResult r = run_theory(c);
  CHECK(r.steady.size() == 2);
  const double end_msd = r.series.column("msd_1").back();
  CHECK(end_msd == doctest::Approx(r.steady[1].msd1).epsilon(1e-6));
  CHECK(r.series.column("msd_1")[320] > 10 * end_msd);
}

TEST_CASE("compare") {
  const TheoryResult r = run_theory(small(R"({"horizon": 400})"));
  ComparisonReport rep = compare(r.series, r.series);
  CHECK(rep.pass);
  for (const auto& s : rep.series) {
    CHECK(s.max_dev == 0.0);
    CHECK(s.steady_dev == 0.0);
  }
  SeriesTable shifted = r.series;
  for (auto& v : shifted.columns[static_cast<size_t>(shifted.index_of("msd"))]) v *= std::pow(10.0, 0.1);
  rep = compare(shifted, r.series);
  for (const auto& s : rep.series)
    if (s.name == "msd") {
      CHECK(s.max_dev == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(s.steady_dev == doctest::Approx(1.0).epsilon(1e-12));
    }
  CompareOptions strict;
  strict.tol_msd_db = 0.5;
  CHECK_FALSE(compare(shifted, r.series, strict).pass);
  SeriesTable g = r.series;
  for (auto& v : g.columns[static_cast<size_t>(g.index_of("gamma_2"))]) v += 0.06;
  CHECK_FALSE(compare(g, r.series).pass);
  SeriesTable shorter = r.series;
  for (auto& col : shorter.columns) col.pop_back();
  CHECK_THROWS_AS(compare(shorter, r.series), ConfigError);
}

TEST_CASE("steady windows") {
  SeriesTable t;
  t.columns = {std::vector<double>(1000, 1.0)};
  t.stages = {{0, 400}, {600, 1000}};
  CHECK(steady_windows(t, std::nullopt) == std::vector<std::pair<long, long>>{{360, 400}, {960, 1000}});
  CHECK(steady_windows(t, 100L) == std::vector<std::pair<long, long>>{{300, 400}, {900, 1000}});
  t.steady_window = 50;
  CHECK(steady_windows(t, std::nullopt).front() == std::pair<long, long>{350, 400});
  CHECK(window_mean({1, 2, 3, 4}, {1, 3}) == 2.5);
  CHECK_THROWS_AS(window_mean({1, 2}, {1, 3}), ConfigError);
}

TEST_CASE("CSV export") {
  SeriesTable t;
  t.names = {"msd", "gamma_1"};
  t.columns = {{0.001, 0.01, 1.0}, {0.5, 0.25, 2.0}};
  const fs::path p = tmp("t.csv");
  export_table(t, p);
  const std::string text = slurp(p);
  CHECK(text == "n,msd,gamma_1\n0,-30,0.5\n1,-20,0.25\n2,0,2\n");
  export_table(t, p);
  CHECK(slurp(p) == text);
  const SeriesTable back = read_table(p);
  CHECK(back.names == t.names);
  CHECK(back.columns[0][0] == doctest::Approx(0.001).epsilon(1e-12));
  CHECK(back.columns[1][1] == 0.25);
}

TEST_CASE("JSON export carries metadata") {
  const ExperimentConfig c = small(R"({"runs": 2, "horizon": 20})");
  const SeriesTable t = run_monte_carlo(c, 2);
  const fs::path p = tmp("t.json");
  export_table(t, p);
  const auto j = nlohmann::json::parse(slurp(p));
  CHECK(j["kind"] == "simulation");
  CHECK(j["config_hash"] == c.hash());
  CHECK(j["seed"] == 11);
  CHECK(j["runs"] == 2);
  CHECK(j["units"]["msd"] == "dB");
  CHECK(j["units"]["gamma_1"] == "linear");
  CHECK(j["series"]["msd"].size() == 20);
  const SeriesTable back = read_table(p);
  CHECK(back.stages == t.stages);
  CHECK(back.column("msd")[3] == doctest::Approx(t.column("msd")[3]).epsilon(1e-12));
  CHECK(back.column("gamma_4") == t.column("gamma_4"));
}

TEST_CASE("export and import errors") {
  SeriesTable t;
  t.names = {"msd"};
  t.columns = {{1.0}};
  CHECK_THROWS_AS(export_table(t, "/nonexistent/dir/out.csv"), IoError);
  CHECK_THROWS_AS(read_table("/nonexistent/file.csv"), IoError);
  const fs::path p = tmp("bad.csv");
  std::ofstream(p) << "x,msd\n0,1\n";
  CHECK_THROWS_AS(read_table(p), ParseError);
}

TEST_CASE("static tracking preset approaches the best component in every stage") {
  ExperimentConfig c = load_config(fs::path(AFFDIFF_SOURCE_DIR) / "configs" / "tracking_static_pn.json");
  c.runs = 40;
  const SeriesTable t = run_monte_carlo(c);
  const auto wins = steady_windows(t, 500L);
  REQUIRE(wins.size() == 4);
  for (const auto& w : wins) {
    const double comb = 10 * std::log10(window_mean(t.column("msd"), w));
    const double best = 10 * std::log10(std::min(window_mean(t.column("msd_1"), w), window_mean(t.column("msd_2"), w)));
    INFO("window ending at ", w.second);
    CHECK(comb <= best + 0.5);
  }
}
