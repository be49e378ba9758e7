#pragma once

#include "affdiff/types.hpp"

#include <cstdint>
#include <random>
#include <vector>

namespace affdiff {

enum class RegressorKind { white, ar1 };

/// Data statistics of one agent.
struct AgentSignalParams {
  double sigma_x2 = 1.0;  ///< regressor power
  double sigma_z2 = 0.0;  ///< measurement noise variance
  RegressorKind regressor = RegressorKind::white;
  int filter_len = 1;

  void validate() const;
  /// Regressor covariance R_x: sigma_x2 * I for white input, sigma_x2 * [[1, .5], [.5, 1]]
  /// for the two-tap AR(1) shift structure.
  Mat covariance() const;
};

/// Piecewise-stationary optimum trajectory. Stage s holds from its start until
/// the next stage's start; the first `transition_len` steps of every stage
/// after the first interpolate linearly from the previous stage's value.
struct TargetSchedule {
  struct Stage {
    long start = 0;
    std::vector<Vec> w;  ///< one optimum per agent
  };
  std::vector<Stage> stages;
  long transition_len = 500;

  void validate(int n_agents, int filter_len) const;
  /// Index of the stage active at n.
  int stage_at(long n) const;
  /// First index of stage s after its transition (where the target is stationary).
  long stationary_start(int s) const;
  /// One past the last index of stage s (or `horizon` for the final stage).
  long stage_end(int s, long horizon) const;
};

/// Per-agent optimum vectors at time n. Throws ConfigError if n precedes the
/// first stage.
std::vector<Vec> target_at(const TargetSchedule& s, long n);

/// Per-agent random source: one independently seeded engine, plus the AR(1) memory.
class AgentStream {
 public:
  AgentStream(std::uint64_t seed, std::uint64_t run, std::uint64_t agent);

  double gaussian() { return normal_(engine_); }

  /// Regressor draw. White: i.i.d. N(0, sigma_x2) entries. AR(1): advances
  /// x_n = 0.5 x_{n-1} + sqrt(0.75 sigma_x2) u and returns [x_n, x_{n-1}].
  Vec draw_regressor(const AgentSignalParams& p);

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  bool ar_started_ = false;
  double ar_prev_ = 0.0;
};

struct Sample {
  Vec x;
  double d = 0.0;
  double z = 0.0;
  Vec w_opt;
};

/// d = x^T w* + z with z ~ N(0, sigma_z2).
Sample emit_sample(const AgentSignalParams& p, const Vec& w_opt, Vec x, AgentStream& stream);

/// One time step's data for every agent.
using SampleBatch = std::vector<Sample>;

/// 10 log10(w*^T R_x w* / sigma_z2). Throws DomainError for zero noise.
double snr_db(const AgentSignalParams& p, const Vec& w_opt);

}  // namespace affdiff
