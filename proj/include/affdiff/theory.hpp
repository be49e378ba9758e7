#pragma once

#include "affdiff/combine.hpp"
#include "affdiff/diffusion.hpp"
#include "affdiff/graph.hpp"
#include "affdiff/types.hpp"

#include <optional>
#include <string>
#include <vector>

namespace affdiff::theory {

/// Second-order data statistics seen by the predictor.
struct DataStats {
  std::vector<Mat> rx;   ///< regressor covariance per agent (L x L)
  Vec sigma_z2;          ///< noise variance per agent
  std::vector<Vec> w_opt;  ///< stationary optimum per agent

  int n_agents() const { return static_cast<int>(rx.size()); }
  int filter_len() const { return rx.empty() ? 0 : static_cast<int>(rx.front().rows()); }
  /// Stacked optimum col{w_1, ..., w_N}.
  Vec stacked_opt() const;
};

/// Deterministic first/second-order model of one component strategy, written
/// for the error v = w - w* so that v_{n+1} = B_n v_n + g_n - r_n.
struct ComponentModel {
  int n = 0;
  int len = 0;
  Mat a1x;    ///< A1 kron I_L
  Mat a2x;    ///< A2 kron I_L
  Mat u;      ///< diag(mu) kron I_L
  Mat hbar;   ///< blockdiag(R_k), R_k = sum_l c_lk R_x,l
  Mat bbar;   ///< a2x^T (I - u hbar) a1x^T
  Vec rbar;   ///< mean drift
  Mat g;      ///< E{g g^T}
  Mat c;      ///< C (kept for cross moments)
  std::vector<Mat> rk;  ///< per-agent R_k
};

/// Throws DomainError for adaptive combination matrices.
ComponentModel build_component_model(const Topology& t, const StrategyConfig& cfg, const DataStats& data);

/// Mean drift rbar = r_u - r_w for the optimum stored in `data`.
Vec drift(const ComponentModel& m, const DataStats& data);

/// E{g^(1) g^(2)T} for two components driven by the same data.
Mat cross_noise_moment(const ComponentModel& m1, const ComponentModel& m2, const DataStats& data);

/// m_{n+1} = bbar m_n - rbar.
Vec mean_step(const ComponentModel& model, const Vec& m);

/// Om_{n+1} = bbar Om bbar^T + G + rbar rbar^T - bbar m rbar^T - rbar m^T bbar^T, symmetrized.
Mat covariance_step(const ComponentModel& model, const Vec& m, const Mat& om);

/// Cross second moment E{v1 v2^T} recursion.
Mat cross_covariance_step(const ComponentModel& m1, const ComponentModel& m2, const Mat& gx,
                          const Vec& mean1, const Vec& mean2, const Mat& omx);

/// Per-agent trace(R_x,k Om_kk).
Vec emse_from_cov(const Mat& om, const std::vector<Mat>& rx);

/// (1/N) sum_k trace(Om_kk).
double network_msd(const Mat& om, int n_agents);

/// Frozen per-agent moments that drive the coefficient recursions.
struct GammaDrive {
  double dj1 = 0.0;  ///< J1 - J12
  double dj2 = 0.0;  ///< J2 - J12
  double j2 = 0.0;
  double sigma_z2 = 0.0;
  double sum() const { return dj1 + dj2; }
};

/// Floor on dJ1 + dJ2 in divisions and square roots.
inline constexpr double kDeltaJFloor = 1e-12;

struct PnGammaStep {
  double gbar = 0.0;  ///< E{gamma_{n+1}}
  double pbar = 0.0;  ///< deterministic power at n
  double nubar = 0.0; ///< nu / (eps + pbar)
};

/// pbar_n = eta pbar_{n-1} + (1 - eta)(dJ1 + dJ2); gbar_{n+1} = gbar (1 - nubar S) + nubar dJ2.
PnGammaStep gamma_mean_step_pn(double nu, double eps, double eta, double gbar, double pbar_prev,
                               const GammaDrive& d);
/// Second moment, using E{nu_n^2} ~ nubar^2. `nubar` from gamma_mean_step_pn.
double gamma_ms_step_pn(double nubar, double gbar, double g2bar, const GammaDrive& d);

/// Returns nullopt when dJ1 + dJ2 is below the floor (gamma frozen).
std::optional<double> gamma_mean_step_sr(double nu, double gbar, const GammaDrive& d);
std::optional<double> gamma_ms_step_sr(double nu, double gbar, double g2bar, const GammaDrive& d);

/// Steady E{gamma}: dJ2 / (dJ1 + dJ2) (both schemes); 0.5 when degenerate.
double steady_gamma_mean(const GammaDrive& d);
/// Steady E{gamma^2} for the power-normalized scheme with nubar = nu / (eps + dJ1 + dJ2).
double steady_gamma_ms_pn(double nu, double eps, const GammaDrive& d);
double steady_gamma_ms_sr(double nu, const GammaDrive& d);

/// Mean-square deviation of the combination with weighting (1/N) I.
double combined_msd(const Mat& om1, const Mat& om2, const Mat& omx, const Vec& gbar, const Vec& g2bar,
                    int len);

/// Per-agent combined EMSE g2 J1 + (1 - 2g + g2) J2 + 2(g - g2) J12.
Vec combined_emse(const Vec& j1, const Vec& j2, const Vec& j12, const Vec& gbar, const Vec& g2bar);

/// Full transient state of the predictor at one time index.
struct MomentState {
  Vec m1, m2;
  Mat om1, om2, omx;
  Vec gbar, g2bar;
  Vec pbar;  ///< power-normalized power at the previous index
  std::vector<char> frozen;  ///< sign-regressor agents whose coefficient stalled
};

MomentState initial_moments(const ComponentModel& m1, const ComponentModel& m2, const Vec& w0,
                            const DataStats& data, double gamma0);

/// Per-time-step quantities emitted by the predictor.
struct TheoryPoint {
  double msd1 = 0, msd2 = 0, msd_cross = 0, msd = 0;
  double emse1 = 0, emse2 = 0, emse_cross = 0, emse = 0;
  Vec gbar, g2bar;
  Vec dj_sum;  ///< per-agent dJ1 + dJ2
};

/// Evaluates the point at the current state, then advances the state one step
/// in the order: means, covariances, EMSEs, gamma mean and second moment.
TheoryPoint advance(const ComponentModel& m1, const ComponentModel& m2, const Mat& gx,
                    const DataStats& data, const CombinerConfig& comb, MomentState& st);

struct SteadyReport {
  Vec m1, m2;         ///< steady mean errors
  Mat om1, om2, omx;  ///< steady second moments
  Vec j1, j2, j12;    ///< steady per-agent EMSEs
  Vec gbar, g2bar;    ///< steady coefficient moments
  Vec bias;           ///< E{v_inf} of the combination
  double msd1 = 0, msd2 = 0, msd_cross = 0, msd = 0;
  double emse = 0;  ///< network combined EMSE from the steady coefficient moments
};

/// Discrete Lyapunov solution X = A X B^T + Q.
Mat solve_stein(const Mat& a, const Mat& b, const Mat& q);

/// Throws DomainError naming the component when its mean recursion is unstable.
SteadyReport steady_state(const ComponentModel& m1, const ComponentModel& m2, const Mat& gx,
                          const DataStats& data, const CombinerConfig& comb);

struct StabilityReport {
  Mat mu_bound;    ///< N x 2: 2 / lambda_max(R_k^(i))
  Mat mu_ok;       ///< N x 2 of 0/1
  double rho1 = 0, rho2 = 0;  ///< spectral radii of bbar
  // power-normalized
  double nu_mean_bound_pn = 0;  ///< 1 - eta
  double nu_ms_bound_pn = 0;    ///< (1 - eta) / 3
  // sign-regressor, per agent (empty without dJ trajectories)
  Vec nu_mean_bound_sr;  ///< sqrt(pi / (2 max_n S))
  Vec nu_ms_bound_sr;    ///< sqrt(2 / (pi max_n S))
  std::vector<char> nu_mean_ok, nu_ms_ok;
};

/// `max_dj_sum` holds max_n (dJ1 + dJ2) per agent for the sign-regressor bounds.
StabilityReport stability_bounds(const ComponentModel& m1, const ComponentModel& m2,
                                 const CombinerConfig& comb, const Vec& max_dj_sum = Vec());

struct UniversalityReport {
  enum class Case { both_nonneg = 1, first_below_cross = 2, second_below_cross = 3, indistinguishable = 0 };
  Vec combined;  ///< per-agent J12 + dJ1 dJ2 / (dJ1 + dJ2)
  std::vector<Case> cases;
  double net1 = 0, net2 = 0, net = 0;
  bool universal = false;
  double margin = 0;  ///< min(net1, net2) - net
  bool indistinguishable = false;
};

/// Throws DomainError if some agent violates Cauchy-Schwarz.
UniversalityReport universality_report(const Vec& j1, const Vec& j2, const Vec& j12);

double spectral_radius(const Mat& m);

}  // namespace affdiff::theory
