#include "affdiff/harness.hpp"

#include "json.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

namespace affdiff {

using nlohmann::json;

namespace {

constexpr int kBlockRuns = 4;

[[noreturn]] void parse_fail(const std::string& what) { throw ParseError(what); }

const json& require(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) parse_fail(std::string("missing key '") + key + "'");
  return j.at(key);
}

double as_number(const json& j, const std::string& what) {
  if (!j.is_number()) parse_fail(what + " must be a number");
  return j.get<double>();
}

long as_integer(const json& j, const std::string& what) {
  if (!j.is_number_integer()) parse_fail(what + " must be an integer");
  return j.get<long>();
}

/// Scalar broadcast to n entries, or an array of exactly n numbers.
Vec per_agent(const json& j, int n, const std::string& what) {
  if (j.is_number()) return Vec::Constant(n, j.get<double>());
  if (!j.is_array()) parse_fail(what + " must be a number or an array");
  if (static_cast<int>(j.size()) != n)
    throw ConfigError(what + " has " + std::to_string(j.size()) + " entries, expected " + std::to_string(n));
  Vec v(n);
  for (int i = 0; i < n; ++i) v(i) = as_number(j[static_cast<size_t>(i)], what);
  return v;
}

Vec as_vector(const json& j, const std::string& what) {
  if (!j.is_array()) parse_fail(what + " must be an array");
  Vec v(static_cast<Eigen::Index>(j.size()));
  for (size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = as_number(j[i], what);
  return v;
}

Mat as_matrix(const json& j, const Topology& t, const std::string& what) {
  if (j.is_string()) return static_rule(t, parse_static_rule(j.get<std::string>()));
  if (!j.is_array()) parse_fail(what + " must be a rule name or a matrix");
  const auto rows = static_cast<Eigen::Index>(j.size());
  Mat m(rows, rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Vec row = as_vector(j[static_cast<size_t>(r)], what);
    if (row.size() != rows) throw ConfigError(what + " must be square");
    m.row(r) = row.transpose();
  }
  return m;
}

std::vector<Vec> stage_targets(const json& j, int n, int len) {
  if (!j.is_array() || j.empty()) parse_fail("stage targets must be a non-empty array");
  std::vector<Vec> w;
  if (j.front().is_number()) {
    w.assign(static_cast<size_t>(n), as_vector(j, "target"));
  } else {
    for (const auto& row : j) w.push_back(as_vector(row, "target"));
  }
  for (const auto& v : w)
    if (v.size() != len) throw ConfigError("target vector length differs from filter_len");
  return w;
}

Topology parse_topology(const json& j, const std::filesystem::path& base) {
  if (j.is_string()) return build_preset(j.get<std::string>());
  if (j.contains("preset")) return build_preset(require(j, "preset").get<std::string>());
  if (j.contains("edge_list")) {
    std::filesystem::path p = require(j, "edge_list").get<std::string>();
    if (p.is_relative()) p = base / p;
    return load_edge_list(p.string());
  }
  if (j.contains("n_agents")) {
    const long n = as_integer(j["n_agents"], "topology.n_agents");
    std::vector<std::pair<int, int>> edges;
    for (const auto& e : j.value("edges", json::array())) {
      if (!e.is_array() || e.size() != 2) parse_fail("topology edges must be index pairs");
      edges.emplace_back(static_cast<int>(as_integer(e[0], "edge")) - 1, static_cast<int>(as_integer(e[1], "edge")) - 1);
    }
    return Topology(static_cast<int>(n), edges);
  }
  parse_fail("topology needs 'preset', 'edge_list' or 'n_agents'");
}

A2Mode parse_a2_mode(const std::string& s) {
  if (s == "static") return A2Mode::fixed;
  if (s == "adaptive_projection") return A2Mode::adaptive_projection;
  if (s == "adaptive_relative_variance") return A2Mode::adaptive_relative_variance;
  throw ConfigError("unknown a2_mode '" + s + "'");
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

double to_db(double v) { return 10.0 * std::log10(v); }

}  // namespace

void ExperimentConfig::validate() const {
  if (!topology) throw ConfigError("no topology");
  const int n = n_agents();
  if (!topology->is_connected()) throw ConfigError("topology must be connected");
  if (filter_len < 1) throw ConfigError("filter_len must be at least 1");
  if (static_cast<int>(agents.size()) != n) throw ConfigError("agent parameter count differs from N");
  for (const auto& a : agents) {
    a.validate();
    if (a.filter_len != filter_len) throw ConfigError("agent filter length differs from filter_len");
  }
  targets.validate(n, filter_len);
  if (targets.stages.front().start != 0) throw ConfigError("the first stage must start at n = 0");
  if (components.size() < 2) throw ConfigError("at least two component strategies are required");
  for (const auto& c : components) c.validate(*topology);
  combiner.validate(n);
  if (combiner.m != static_cast<int>(components.size()))
    throw ConfigError("combiner component count differs from the number of strategies");
  if (horizon < 1) throw ConfigError("horizon must be at least 1");
  if (runs < 1) throw ConfigError("runs must be at least 1");
  if (run_offset < 0) throw ConfigError("run_offset must be nonnegative");
  if (steady_window && *steady_window < 1) throw ConfigError("steady_window must be positive");
}

std::string ExperimentConfig::hash() const {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : canonical) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::vector<std::pair<long, long>> ExperimentConfig::stationary_intervals() const {
  std::vector<std::pair<long, long>> out;
  for (int s = 0; s < static_cast<int>(targets.stages.size()); ++s) {
    const long a = targets.stationary_start(s);
    const long b = std::min(targets.stage_end(s, horizon), horizon);
    if (a < b) out.emplace_back(a, b);
  }
  return out;
}

theory::DataStats ExperimentConfig::data_stats(long n) const {
  theory::DataStats d;
  d.sigma_z2.resize(n_agents());
  for (int k = 0; k < n_agents(); ++k) {
    d.rx.push_back(agents[static_cast<size_t>(k)].covariance());
    d.sigma_z2(k) = agents[static_cast<size_t>(k)].sigma_z2;
  }
  d.w_opt = target_at(targets, n);
  return d;
}

ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("configuration is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) parse_fail("configuration must be an object");

  ExperimentConfig cfg;
  try {
    cfg.canonical = j.dump();
    cfg.name = j.value("name", std::string());
    cfg.topology = std::make_shared<const Topology>(parse_topology(require(j, "topology"), base_dir));
    const Topology& t = *cfg.topology;
    const int n = t.size();
    cfg.filter_len = static_cast<int>(as_integer(require(j, "filter_len"), "filter_len"));

    const json& ag = require(j, "agents");
    const Vec sx = per_agent(require(ag, "sigma_x2"), n, "sigma_x2");
    const Vec sz = per_agent(require(ag, "sigma_z2"), n, "sigma_z2");
    const std::string kind = ag.value("regressor", std::string("white"));
    if (kind != "white" && kind != "ar1") throw ConfigError("unknown regressor kind '" + kind + "'");
    for (int k = 0; k < n; ++k) {
      AgentSignalParams p;
      p.sigma_x2 = sx(k);
      p.sigma_z2 = sz(k);
      p.regressor = kind == "ar1" ? RegressorKind::ar1 : RegressorKind::white;
      p.filter_len = cfg.filter_len;
      cfg.agents.push_back(p);
    }

    const json& tg = require(j, "targets");
    cfg.targets.transition_len = tg.contains("transition_len") ? as_integer(tg["transition_len"], "transition_len") : 500;
    const json& stages = require(tg, "stages");
    if (!stages.is_array()) parse_fail("targets.stages must be an array");
    for (const auto& st : stages)
      cfg.targets.stages.push_back(
          {as_integer(require(st, "start"), "stage start"), stage_targets(require(st, "w"), n, cfg.filter_len)});

    const json& comps = require(j, "components");
    if (!comps.is_array()) parse_fail("components must be an array");
    for (const auto& c : comps) {
      StrategyConfig sc;
      sc.a1 = as_matrix(c.value("a1", json("identity")), t, "a1");
      sc.c = as_matrix(c.value("c", json("identity")), t, "c");
      sc.a2_mode = parse_a2_mode(c.value("a2_mode", std::string("static")));
      const json a2def = sc.a2_mode == A2Mode::fixed ? json("identity") : json("averaging");
      sc.a2 = as_matrix(c.value("a2", a2def), t, "a2");
      sc.mu = per_agent(require(c, "mu"), n, "mu");
      if (c.contains("tau")) sc.tau = per_agent(c["tau"], n, "tau");
      cfg.components.push_back(std::move(sc));
    }

    const json& cb = require(j, "combiner");
    cfg.combiner.scheme = parse_scheme(require(cb, "scheme").get<std::string>());
    cfg.combiner.nu = per_agent(require(cb, "nu"), n, "nu");
    if (cb.contains("epsilon")) cfg.combiner.epsilon = as_number(cb["epsilon"], "epsilon");
    if (cb.contains("eta")) cfg.combiner.eta = as_number(cb["eta"], "eta");
    if (cb.contains("delta")) cfg.combiner.delta = as_number(cb["delta"], "delta");
    if (cb.contains("gamma0")) cfg.combiner.gamma0 = as_number(cb["gamma0"], "gamma0");
    cfg.combiner.m = static_cast<int>(cfg.components.size());

    cfg.horizon = as_integer(require(j, "horizon"), "horizon");
    cfg.runs = static_cast<int>(as_integer(require(j, "runs"), "runs"));
    cfg.seed = require(j, "seed").get<std::uint64_t>();
    if (j.contains("run_offset")) cfg.run_offset = as_integer(j["run_offset"], "run_offset");
    cfg.replicate_runs = j.value("replicate_runs", false);
    if (j.contains("steady_window") && !j["steady_window"].is_null())
      cfg.steady_window = as_integer(j["steady_window"], "steady_window");
    if (j.contains("outputs")) cfg.outputs = j["outputs"].get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed configuration: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open configuration '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.parent_path());
}

int SeriesTable::index_of(const std::string& name) const {
  const auto it = std::find(names.begin(), names.end(), name);
  return it == names.end() ? -1 : static_cast<int>(it - names.begin());
}

const std::vector<double>& SeriesTable::column(const std::string& name) const {
  const int i = index_of(name);
  if (i < 0) throw ConfigError("no series named '" + name + "'");
  return columns[static_cast<size_t>(i)];
}

SeriesTable SeriesTable::filtered(const std::vector<std::string>& prefixes) const {
  if (prefixes.empty()) return *this;
  SeriesTable out = *this;
  out.names.clear();
  out.columns.clear();
  for (size_t i = 0; i < names.size(); ++i)
    for (const auto& p : prefixes)
      if (names[i].rfind(p, 0) == 0) {
        out.names.push_back(names[i]);
        out.columns.push_back(columns[i]);
        break;
      }
  return out;
}

bool is_db_series(const std::string& name) { return name.rfind("msd", 0) == 0 || name.rfind("emse", 0) == 0; }

int default_workers() {
  if (const char* env = std::getenv("AFFDIFF_WORKERS")) {
    const int w = std::atoi(env);
    if (w > 0) return w;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

namespace {

std::vector<std::string> series_names(const ExperimentConfig& cfg) {
  const int m = static_cast<int>(cfg.components.size());
  const int n = cfg.n_agents();
  std::vector<std::string> names;
  for (int i = 1; i <= m; ++i) names.push_back("msd_" + std::to_string(i));
  names.push_back("msd_cross");
  names.push_back("msd");
  for (int i = 1; i <= m; ++i) names.push_back("emse_" + std::to_string(i));
  names.push_back("emse_cross");
  names.push_back("emse");
  if (cfg.combiner.scheme == CombinerScheme::multi_sign) {
    for (int k = 1; k <= n; ++k)
      for (int i = 1; i <= m; ++i) names.push_back("gamma_" + std::to_string(k) + "_" + std::to_string(i));
  } else {
    for (int k = 1; k <= n; ++k) names.push_back("gamma_" + std::to_string(k));
    for (int k = 1; k <= n; ++k) names.push_back("gamma2_" + std::to_string(k));
  }
  return names;
}

/// Adds one run's metrics to `acc` (row-major, horizon x series).
void simulate_run(const ExperimentConfig& cfg, const std::vector<std::unique_ptr<ComponentStrategy>>& protos,
                  long run, std::vector<double>& acc, size_t width) {
  const int n = cfg.n_agents();
  const int m = static_cast<int>(protos.size());
  const bool multi = cfg.combiner.scheme == CombinerScheme::multi_sign;
  const auto stream_run = static_cast<std::uint64_t>(cfg.replicate_runs ? 0 : run);
  std::vector<AgentStream> streams;
  streams.reserve(static_cast<size_t>(n));
  for (int k = 0; k < n; ++k) streams.emplace_back(cfg.seed, stream_run, static_cast<std::uint64_t>(k));
  std::vector<std::unique_ptr<ComponentStrategy>> comps;
  for (const auto& p : protos) comps.push_back(p->fresh());
  CombinerState comb = CombinerState::initial(cfg.combiner, n);

  SampleBatch batch(static_cast<size_t>(n));
  std::vector<Vec> dev(static_cast<size_t>(m));
  std::vector<double> ea(static_cast<size_t>(m)), y(static_cast<size_t>(m)), ecomp(static_cast<size_t>(m));
  Vec wdev(cfg.filter_len);
  const double inv_n = 1.0 / n;

  for (long t = 0; t < cfg.horizon; ++t) {
    const std::vector<Vec> wopt = target_at(cfg.targets, t);
    for (int k = 0; k < n; ++k) {
      const auto& p = cfg.agents[static_cast<size_t>(k)];
      auto& s = streams[static_cast<size_t>(k)];
      batch[static_cast<size_t>(k)] = emit_sample(p, wopt[static_cast<size_t>(k)], s.draw_regressor(p), s);
    }
    double* row = acc.data() + static_cast<size_t>(t) * width;
    for (int k = 0; k < n; ++k) {
      const Sample& smp = batch[static_cast<size_t>(k)];
      wdev.setZero();
      double ea_c = 0.0, y_c = 0.0;
      for (int i = 0; i < m; ++i) {
        const Vec& w = comps[static_cast<size_t>(i)]->estimates()[static_cast<size_t>(k)];
        auto ui = static_cast<size_t>(i);
        dev[ui] = w - smp.w_opt;
        y[ui] = smp.x.dot(w);
        ea[ui] = -smp.x.dot(dev[ui]);
        ecomp[ui] = smp.d - y[ui];
        const double c = comb.coefficient(k, i);
        wdev += c * dev[ui];
        ea_c += c * ea[ui];
        y_c += c * y[ui];
        row[ui] += dev[ui].squaredNorm() * inv_n;
        row[static_cast<size_t>(m + 2) + ui] += ea[ui] * ea[ui];
      }
      const auto mi = static_cast<size_t>(m);
      row[mi] += dev[0].dot(dev[1]) * inv_n;
      row[mi + 1] += wdev.squaredNorm() * inv_n;
      row[2 * mi + 2] += ea[0] * ea[1];
      row[2 * mi + 3] += ea_c * ea_c;
      const size_t gbase = 2 * mi + 4;
      if (multi) {
        for (size_t i = 0; i < mi; ++i) row[gbase + static_cast<size_t>(k) * mi + i] += comb.coefficient(k, static_cast<int>(i));
      } else {
        const double g = comb.gamma(k);
        row[gbase + static_cast<size_t>(k)] += g;
        row[gbase + static_cast<size_t>(n + k)] += g * g;
      }
      const double e = smp.d - y_c;
      switch (cfg.combiner.scheme) {
        case CombinerScheme::power_normalized:
          pn_update(cfg.combiner, comb, k, {e, y[0] - y[1]});
          break;
        case CombinerScheme::sign_regressor:
          sr_update(cfg.combiner, comb, k, {e, y[0] - y[1]});
          break;
        case CombinerScheme::multi_sign:
          multi_update(cfg.combiner, comb, k, e, ecomp);
          break;
      }
    }
    for (auto& c : comps) c->step(batch);
  }
}

}  // namespace

SeriesTable run_monte_carlo(const ExperimentConfig& cfg, int workers) {
  cfg.validate();
  if (workers <= 0) workers = default_workers();
  std::vector<std::unique_ptr<ComponentStrategy>> protos;
  for (const auto& c : cfg.components)
    protos.push_back(std::make_unique<DiffusionLms>(cfg.topology, c, cfg.filter_len));

  SeriesTable out;
  out.kind = "simulation";
  out.config_hash = cfg.hash();
  out.seed = cfg.seed;
  out.runs = cfg.runs;
  out.stages = cfg.stationary_intervals();
  out.steady_window = cfg.steady_window;
  out.names = series_names(cfg);
  const size_t width = out.names.size();
  const size_t cells = width * static_cast<size_t>(cfg.horizon);

  // Runs are grouped into fixed blocks summed sequentially; blocks are merged in
  // index order, so the floating-point result is independent of scheduling.
  const int n_blocks = (cfg.runs + kBlockRuns - 1) / kBlockRuns;
  std::vector<double> total(cells, 0.0);
  std::map<int, std::vector<double>> pending;
  int next_merge = 0;
  std::mutex mtx;
  std::atomic<int> next_block{0};
  std::exception_ptr failure;

  auto worker = [&] {
    try {
      for (int b = next_block++; b < n_blocks; b = next_block++) {
        std::vector<double> acc(cells, 0.0);
        const int first = b * kBlockRuns;
        const int last = std::min(cfg.runs, first + kBlockRuns);
        for (int r = first; r < last; ++r) simulate_run(cfg, protos, cfg.run_offset + r, acc, width);
        std::lock_guard lock(mtx);
        pending.emplace(b, std::move(acc));
        for (auto it = pending.find(next_merge); it != pending.end(); it = pending.find(next_merge)) {
          for (size_t i = 0; i < cells; ++i) total[i] += it->second[i];
          pending.erase(it);
          ++next_merge;
        }
      }
    } catch (...) {
      std::lock_guard lock(mtx);
      if (!failure) failure = std::current_exception();
      next_block = n_blocks;
    }
  };
  const int n_threads = std::min(workers, n_blocks);
  std::vector<std::thread> pool;
  for (int i = 1; i < n_threads; ++i) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);

  out.columns.assign(width, std::vector<double>(static_cast<size_t>(cfg.horizon)));
  const double inv_runs = 1.0 / cfg.runs;
  for (size_t t = 0; t < static_cast<size_t>(cfg.horizon); ++t)
    for (size_t s = 0; s < width; ++s) out.columns[s][t] = total[t * width + s] * inv_runs;
  return out;
}

namespace {

void shift_moments(theory::MomentState& st, const Vec& delta) {
  const Vec m1 = st.m1, m2 = st.m2;
  st.om1 += m1 * delta.transpose() + delta * m1.transpose() + delta * delta.transpose();
  st.om2 += m2 * delta.transpose() + delta * m2.transpose() + delta * delta.transpose();
  st.omx += m1 * delta.transpose() + delta * m2.transpose() + delta * delta.transpose();
  st.m1 += delta;
  st.m2 += delta;
}

}  // namespace

TheoryResult run_theory(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.components.size() != 2 || cfg.combiner.scheme == CombinerScheme::multi_sign)
    throw DomainError("the theoretical model covers two components with the power-normalized or sign-regressor scheme");
  for (const auto& c : cfg.components)
    if (c.a2_mode != A2Mode::fixed) throw DomainError("theory is not available for adaptive combination matrices");

  const int n = cfg.n_agents();
  const Topology& topo = *cfg.topology;
  theory::DataStats data = cfg.data_stats(0);
  theory::ComponentModel m1 = theory::build_component_model(topo, cfg.components[0], data);
  theory::ComponentModel m2 = theory::build_component_model(topo, cfg.components[1], data);
  const Mat gx = theory::cross_noise_moment(m1, m2, data);
  theory::MomentState st =
      theory::initial_moments(m1, m2, Vec::Zero(n * cfg.filter_len), data, cfg.combiner.gamma0);

  TheoryResult res;
  SeriesTable& out = res.series;
  out.kind = "theory";
  out.config_hash = cfg.hash();
  out.seed = cfg.seed;
  out.runs = 0;
  out.stages = cfg.stationary_intervals();
  out.steady_window = cfg.steady_window;
  out.names = series_names(cfg);
  out.columns.assign(out.names.size(), std::vector<double>(static_cast<size_t>(cfg.horizon)));

  Vec max_dj = Vec::Constant(n, -std::numeric_limits<double>::infinity());
  Vec wstar = data.stacked_opt();
  for (long t = 0; t < cfg.horizon; ++t) {
    const theory::TheoryPoint pt = theory::advance(m1, m2, gx, data, cfg.combiner, st);
    const auto ut = static_cast<size_t>(t);
    const double vals[] = {pt.msd1, pt.msd2, pt.msd_cross, pt.msd, pt.emse1, pt.emse2, pt.emse_cross, pt.emse};
    for (size_t i = 0; i < 8; ++i) out.columns[i][ut] = vals[i];
    for (int k = 0; k < n; ++k) {
      out.columns[8 + static_cast<size_t>(k)][ut] = pt.gbar(k);
      out.columns[8 + static_cast<size_t>(n + k)][ut] = pt.g2bar(k);
    }
    max_dj = max_dj.cwiseMax(pt.dj_sum);
    if (t + 1 < cfg.horizon) {
      theory::DataStats next = cfg.data_stats(t + 1);
      const Vec wnext = next.stacked_opt();
      if (wnext != wstar) {
        shift_moments(st, wstar - wnext);
        data = std::move(next);
        wstar = wnext;
        m1.rbar = theory::drift(m1, data);
        m2.rbar = theory::drift(m2, data);
      }
    }
  }

  for (int s = 0; s < static_cast<int>(cfg.targets.stages.size()); ++s) {
    theory::DataStats ds = cfg.data_stats(cfg.targets.stationary_start(s));
    ds.w_opt = cfg.targets.stages[static_cast<size_t>(s)].w;
    theory::ComponentModel s1 = m1, s2 = m2;
    s1.rbar = theory::drift(s1, ds);
    s2.rbar = theory::drift(s2, ds);
    auto rep = theory::steady_state(s1, s2, gx, ds, cfg.combiner);
    res.universality.push_back(theory::universality_report(rep.j1, rep.j2, rep.j12));
    res.steady.push_back(std::move(rep));
  }
  res.stability.push_back(theory::stability_bounds(m1, m2, cfg.combiner, max_dj));
  return res;
}

std::vector<std::pair<long, long>> steady_windows(const SeriesTable& t, std::optional<long> window,
                                                  double frac) {
  std::vector<std::pair<long, long>> stages = t.stages;
  if (stages.empty()) stages.emplace_back(0, t.length());
  if (!window) window = t.steady_window;
  std::vector<std::pair<long, long>> out;
  for (const auto& [a, b] : stages) {
    const long len = b - a;
    long w = window ? *window : std::lround(frac * static_cast<double>(len));
    w = std::clamp(w, 1L, len);
    out.emplace_back(b - w, b);
  }
  return out;
}

double window_mean(const std::vector<double>& col, std::pair<long, long> win) {
  if (win.first < 0 || win.second > static_cast<long>(col.size()) || win.first >= win.second)
    throw ConfigError("window outside the series");
  double acc = 0.0;
  for (long i = win.first; i < win.second; ++i) acc += col[static_cast<size_t>(i)];
  return acc / static_cast<double>(win.second - win.first);
}

ComparisonReport compare(const SeriesTable& sim, const SeriesTable& th, const CompareOptions& opt) {
  if (sim.length() != th.length())
    throw ConfigError("horizons differ: " + std::to_string(sim.length()) + " vs " + std::to_string(th.length()));
  const auto windows = steady_windows(sim.stages.empty() ? th : sim, opt.window, opt.window_frac);
  ComparisonReport rep;
  for (size_t i = 0; i < sim.names.size(); ++i) {
    const int j = th.index_of(sim.names[i]);
    if (j < 0) continue;
    const auto& a = sim.columns[i];
    const auto& b = th.columns[static_cast<size_t>(j)];
    SeriesComparison c;
    c.name = sim.names[i];
    c.db = is_db_series(c.name);
    auto dev = [&](double x, double y) { return c.db ? std::abs(to_db(x) - to_db(y)) : std::abs(x - y); };
    for (size_t t = 0; t < a.size(); ++t) {
      const double d = dev(a[t], b[t]);
      if (std::isfinite(d)) c.max_dev = std::max(c.max_dev, d);
    }
    bool finite = true;
    for (const auto& w : windows) {
      const double d = dev(window_mean(a, w), window_mean(b, w));
      if (!std::isfinite(d)) finite = false;
      else c.steady_dev = std::max(c.steady_dev, d);
    }
    c.pass = finite && c.steady_dev <= (c.db ? opt.tol_msd_db : opt.tol_gamma);
    rep.pass = rep.pass && c.pass;
    rep.series.push_back(std::move(c));
  }
  if (rep.series.empty()) throw ConfigError("the two tables share no series");
  return rep;
}

namespace {

double exported(const std::string& name, double v) { return is_db_series(name) ? to_db(v) : v; }
double imported(const std::string& name, double v) { return is_db_series(name) ? std::pow(10.0, v / 10.0) : v; }

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  return out;
}

}  // namespace

void write_csv(const SeriesTable& t, const std::filesystem::path& path) {
  std::ofstream out = open_out(path);
  out << "n";
  for (const auto& name : t.names) out << ',' << name;
  out << '\n';
  for (long i = 0; i < t.length(); ++i) {
    out << i;
    for (size_t s = 0; s < t.names.size(); ++s)
      out << ',' << fmt(exported(t.names[s], t.columns[s][static_cast<size_t>(i)]));
    out << '\n';
  }
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

void write_json(const SeriesTable& t, const std::filesystem::path& path) {
  nlohmann::ordered_json j;
  j["kind"] = t.kind;
  j["config_hash"] = t.config_hash;
  j["seed"] = t.seed;
  j["runs"] = t.runs;
  j["stages"] = t.stages;
  j["steady_window"] = t.steady_window ? nlohmann::ordered_json(*t.steady_window) : nlohmann::ordered_json();
  j["columns"] = t.names;
  nlohmann::ordered_json units, series;
  for (size_t s = 0; s < t.names.size(); ++s) {
    units[t.names[s]] = is_db_series(t.names[s]) ? "dB" : "linear";
    auto arr = nlohmann::ordered_json::array();
    for (double v : t.columns[s]) {
      const double e = exported(t.names[s], v);
      arr.push_back(std::isfinite(e) ? nlohmann::ordered_json(e) : nlohmann::ordered_json());
    }
    series[t.names[s]] = std::move(arr);
  }
  j["units"] = std::move(units);
  j["series"] = std::move(series);
  std::ofstream out = open_out(path);
  out << j.dump() << '\n';
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

void export_table(const SeriesTable& t, const std::filesystem::path& path) {
  if (path.extension() == ".json")
    write_json(t, path);
  else
    write_csv(t, path);
}

SeriesTable read_table(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  SeriesTable t;
  if (path.extension() == ".json") {
    json j;
    try {
      j = json::parse(in);
      t.kind = j.value("kind", std::string());
      t.config_hash = j.value("config_hash", std::string());
      t.seed = j.value("seed", std::uint64_t{0});
      t.runs = j.value("runs", 0);
      t.stages = j.value("stages", std::vector<std::pair<long, long>>{});
      if (j.contains("steady_window") && !j["steady_window"].is_null()) t.steady_window = j["steady_window"].get<long>();
      t.names = j.at("columns").get<std::vector<std::string>>();
      for (const auto& name : t.names) {
        std::vector<double> col;
        for (const auto& v : j.at("series").at(name))
          col.push_back(v.is_null() ? std::nan("") : imported(name, v.get<double>()));
        t.columns.push_back(std::move(col));
      }
    } catch (const json::exception& e) {
      throw ParseError("malformed result file '" + path.string() + "': " + e.what());
    }
    return t;
  }
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty result file '" + path.string() + "'");
  {
    std::stringstream hs(line);
    std::string cell;
    std::getline(hs, cell, ',');
    if (cell != "n") throw ParseError("CSV header must start with 'n'");
    while (std::getline(hs, cell, ',')) t.names.push_back(cell);
  }
  t.columns.assign(t.names.size(), {});
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream rs(line);
    std::string cell;
    std::getline(rs, cell, ',');
    for (size_t s = 0; s < t.names.size(); ++s) {
      if (!std::getline(rs, cell, ',')) throw ParseError("short CSV row in '" + path.string() + "'");
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str()) throw ParseError("bad number '" + cell + "' in '" + path.string() + "'");
      t.columns[s].push_back(imported(t.names[s], v));
    }
  }
  return t;
}

}  // namespace affdiff
