#pragma once

#include "affdiff/types.hpp"

#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace affdiff {

enum class CombinerScheme { power_normalized, sign_regressor, multi_sign };
CombinerScheme parse_scheme(std::string_view name);
std::string_view to_string(CombinerScheme s);

struct CombinerConfig {
  CombinerScheme scheme = CombinerScheme::power_normalized;
  Vec nu;                 ///< per-agent coefficient step size (nu_gamma or nu_alpha)
  double epsilon = 0.05;  ///< power-normalized regularizer
  double eta = 0.95;      ///< power smoothing factor
  double delta = 0.01;    ///< multi-strategy mapping offset
  int m = 2;              ///< number of component strategies
  double gamma0 = 0.5;    ///< initial coefficient (two-component schemes)

  void validate(int n_agents) const;
};

/// Per-agent combiner state.
///
/// Two-component schemes use `gamma` (weight of strategy 1) and `power`.
/// The multi scheme keeps the auxiliary parameters `alpha` (N x M) and the
/// derived coefficients `gammas` (N x M, rows sum to one).
struct CombinerState {
  Vec gamma;
  Vec power;
  Mat alpha;
  Mat gammas;
  /// Agents whose mapping denominator was clamped at delta at least once.
  std::vector<int> clamped_agents;

  static CombinerState initial(const CombinerConfig& cfg, int n_agents);
  /// Coefficient of component i at agent k (any scheme).
  double coefficient(int k, int i) const;
};

/// sgn with sgn(0) = 0.
inline double sign0(double v) { return (v > 0.0) - (v < 0.0); }

/// gamma^(i) = (alpha^(i) + delta) / (sum_j alpha^(j) + M delta). A
/// nonpositive denominator is clamped at delta; `clamped` reports it.
Vec multi_mapping(const Eigen::Ref<const Vec>& alpha, double delta, bool* clamped = nullptr);

/// Affine combination sum_i coeff_i w^(i) at one agent.
Vec combine_estimate(std::span<const double> coeffs, std::span<const Vec* const> estimates);

/// Combined estimates for every agent.
std::vector<Vec> combine_weights(const CombinerState& st,
                                 const std::vector<const std::vector<Vec>*>& components);

/// Inputs of one agent's two-component coefficient update.
struct PairUpdateInput {
  double e = 0.0;   ///< combined output error e_k
  double dy = 0.0;  ///< x^T (w^(1) - w^(2))
};

/// p <- eta p + (1 - eta) dy^2, then gamma <- gamma + nu / (eps + p) e dy.
void pn_update(const CombinerConfig& cfg, CombinerState& st, int k, const PairUpdateInput& in);
/// gamma <- gamma + nu e sgn(dy).
void sr_update(const CombinerConfig& cfg, CombinerState& st, int k, const PairUpdateInput& in);
/// alpha^(i) <- alpha^(i) + nu e sgn((e - e^(i)) / (sum alpha + M delta)), then remap.
void multi_update(const CombinerConfig& cfg, CombinerState& st, int k, double e,
                  std::span<const double> component_errors);

/// gamma* = (J2 - J12) / (J1 + J2 - 2 J12). Empty when the denominator is at
/// most `tol` (statistically indistinguishable components).
std::optional<double> optimal_gamma(double j1, double j2, double j12, double tol = 1e-15);

}  // namespace affdiff
