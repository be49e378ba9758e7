#pragma once

#include "affdiff/graph.hpp"
#include "affdiff/signal.hpp"
#include "affdiff/types.hpp"

#include <memory>
#include <vector>

namespace affdiff {

enum class A2Mode { fixed, adaptive_projection, adaptive_relative_variance };

/// One component diffusion LMS strategy:
///   phi_k   = sum_l a1_lk w_l
///   psi_k   = phi_k + mu_k sum_l c_lk x_l (d_l - x_l^T phi_k)
///   w_k     = sum_l a2_lk psi_l
/// ATC is a1 = I; CTA is a2 = I.
struct StrategyConfig {
  Mat a1;  ///< left-stochastic
  Mat a2;  ///< left-stochastic; the initial matrix for adaptive modes
  Mat c;   ///< right-stochastic
  A2Mode a2_mode = A2Mode::fixed;
  Vec mu;   ///< per-agent step sizes
  Vec tau;  ///< per-agent forgetting factors (relative-variance mode only)

  /// Throws ConfigError if a matrix fails its stochasticity check or a
  /// step size / forgetting factor is out of range.
  void validate(const Topology& t) const;
};

/// ATC configuration with C = I, a static A2 and a uniform step size.
StrategyConfig make_atc(const Topology& t, const Mat& a2, double mu);

struct StrategyState {
  std::vector<Vec> w;
  std::vector<Vec> psi;
  std::vector<Vec> phi;
  Mat zeta2;   ///< (l, k) entry tracks neighbor l's deviation as seen by k
  Mat a2_eff;  ///< combination matrix used in the last combine step

  /// w = psi = phi = 0, zeta2 = 1 on the support, a2_eff = cfg.a2.
  static StrategyState initial(const Topology& t, const StrategyConfig& cfg, int filter_len);
};

/// Floor applied to squared distances before inversion in the adaptive rules.
inline constexpr double kDistanceFloor = 1e-12;

/// a2_lk proportional to ||psi_k + mu_k q_k - psi_l||^-2 over l in N_k, where
/// q_k = (d_k - x_k^T psi_k) x_k.
Mat adapt_matrix_projection(const Topology& t, const std::vector<Vec>& psi, const SampleBatch& batch,
                            const Vec& mu);

/// zeta2_lk <- (1 - tau_k) zeta2_lk + tau_k ||psi_l - w_prev_k||^2, then a2_lk
/// proportional to 1 / zeta2_lk over l in N_k.
Mat adapt_matrix_relative_variance(const Topology& t, const std::vector<Vec>& psi,
                                   const std::vector<Vec>& w_prev, const Vec& tau, Mat& zeta2);

/// Advances `st` by one time step using `batch` (one sample per agent).
void diffusion_step(const Topology& t, const StrategyConfig& cfg, StrategyState& st,
                    const SampleBatch& batch);

struct AgentOutputs {
  double y = 0.0;        ///< x^T w
  double e = 0.0;        ///< d - y
  double e_apriori = 0.0;  ///< x^T (w* - w)
};

std::vector<AgentOutputs> errors_and_outputs(const std::vector<Vec>& w, const SampleBatch& batch);

/// Interface for any component strategy run by the combination layer.
class ComponentStrategy {
 public:
  virtual ~ComponentStrategy() = default;
  virtual void step(const SampleBatch& batch) = 0;
  virtual const std::vector<Vec>& estimates() const = 0;
  /// Fresh instance in its initial state.
  virtual std::unique_ptr<ComponentStrategy> fresh() const = 0;
};

class DiffusionLms final : public ComponentStrategy {
 public:
  DiffusionLms(std::shared_ptr<const Topology> topology, StrategyConfig cfg, int filter_len);

  void step(const SampleBatch& batch) override { diffusion_step(*topo_, cfg_, state_, batch); }
  const std::vector<Vec>& estimates() const override { return state_.w; }
  std::unique_ptr<ComponentStrategy> fresh() const override;

  const StrategyConfig& config() const { return cfg_; }
  const StrategyState& state() const { return state_; }

 private:
  std::shared_ptr<const Topology> topo_;
  StrategyConfig cfg_;
  int filter_len_;
  StrategyState state_;
};

}  // namespace affdiff
