#pragma once

#include "affdiff/combine.hpp"
#include "affdiff/diffusion.hpp"
#include "affdiff/graph.hpp"
#include "affdiff/signal.hpp"
#include "affdiff/theory.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace affdiff {

/// Full description of one experiment.
struct ExperimentConfig {
  std::string name;
  std::shared_ptr<const Topology> topology;
  int filter_len = 1;
  std::vector<AgentSignalParams> agents;
  TargetSchedule targets;
  std::vector<StrategyConfig> components;
  CombinerConfig combiner;
  long horizon = 1;
  int runs = 1;
  std::uint64_t seed = 0;
  /// Index of the first run (runs [run_offset, run_offset + runs) are simulated).
  long run_offset = 0;
  /// Every run reuses the streams of run 0 (degenerate test mode).
  bool replicate_runs = false;
  /// Steady window length in steps; empty means the final 10% of each stationary stage.
  std::optional<long> steady_window;
  /// Series-name prefixes kept on export; empty keeps everything.
  std::vector<std::string> outputs;
  /// Canonical JSON text of the source configuration.
  std::string canonical;

  int n_agents() const { return topology ? topology->size() : 0; }
  /// Throws ConfigError on any dimension or range problem.
  void validate() const;
  /// 16 hex digits identifying the canonical configuration.
  std::string hash() const;
  /// Stationary intervals [start, end) of every stage within the horizon.
  std::vector<std::pair<long, long>> stationary_intervals() const;
  theory::DataStats data_stats(long n) const;
};

/// Throws ParseError on malformed text and ConfigError on invalid content.
/// Relative file references resolve against `base_dir`.
ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

/// Named per-time-step series with the metadata needed for export and comparison.
/// Values are linear; MSD and EMSE series are converted to dB only on export.
struct SeriesTable {
  std::string kind;  ///< "simulation" or "theory"
  std::string config_hash;
  std::uint64_t seed = 0;
  int runs = 0;
  std::vector<std::pair<long, long>> stages;
  std::optional<long> steady_window;
  std::vector<std::string> names;
  std::vector<std::vector<double>> columns;

  long length() const { return columns.empty() ? 0 : static_cast<long>(columns.front().size()); }
  /// -1 when absent.
  int index_of(const std::string& name) const;
  const std::vector<double>& column(const std::string& name) const;
  /// Keeps only the series whose names start with one of `prefixes`.
  SeriesTable filtered(const std::vector<std::string>& prefixes) const;
};

/// True for series exported in dB (names starting with "msd" or "emse").
bool is_db_series(const std::string& name);

/// Worker count from AFFDIFF_WORKERS, else the hardware concurrency.
int default_workers();

/// Monte Carlo average over cfg.runs independent runs. The result does not depend on `workers`.
SeriesTable run_monte_carlo(const ExperimentConfig& cfg, int workers = 0);

struct TheoryResult {
  SeriesTable series;
  std::vector<theory::SteadyReport> steady;  ///< one per stage
  std::vector<theory::StabilityReport> stability;
  std::vector<theory::UniversalityReport> universality;
};

/// Deterministic predictor over the whole horizon. Throws DomainError for
/// adaptive combination matrices or the multi-component scheme.
TheoryResult run_theory(const ExperimentConfig& cfg);

struct CompareOptions {
  double tol_msd_db = 1.0;
  double tol_gamma = 0.05;
  std::optional<long> window;  ///< steps at the end of each stationary stage
  double window_frac = 0.1;
};

struct SeriesComparison {
  std::string name;
  bool db = false;
  double max_dev = 0.0;     ///< over every time step
  double steady_dev = 0.0;  ///< worst stage, comparing window averages
  bool pass = false;
};

struct ComparisonReport {
  std::vector<SeriesComparison> series;
  bool pass = true;
};

/// Compares the series present in both tables. Throws ConfigError on a horizon mismatch.
ComparisonReport compare(const SeriesTable& sim, const SeriesTable& theory, const CompareOptions& opt = {});

/// Final-window intervals used for steady readouts.
std::vector<std::pair<long, long>> steady_windows(const SeriesTable& t, std::optional<long> window,
                                                  double frac = 0.1);
/// Average of a series over [win.first, win.second).
double window_mean(const std::vector<double>& col, std::pair<long, long> win);

void write_csv(const SeriesTable& t, const std::filesystem::path& path);
void write_json(const SeriesTable& t, const std::filesystem::path& path);
/// Chooses the format from the extension (.json, anything else is CSV).
void export_table(const SeriesTable& t, const std::filesystem::path& path);
SeriesTable read_table(const std::filesystem::path& path);

}  // namespace affdiff
