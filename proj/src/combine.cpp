#include "affdiff/combine.hpp"

#include <algorithm>
#include <string>

namespace affdiff {

CombinerScheme parse_scheme(std::string_view name) {
  if (name == "power_normalized") return CombinerScheme::power_normalized;
  if (name == "sign_regressor") return CombinerScheme::sign_regressor;
  if (name == "multi_sign") return CombinerScheme::multi_sign;
  throw ConfigError("unknown combiner scheme '" + std::string(name) + "'");
}

std::string_view to_string(CombinerScheme s) {
  switch (s) {
    case CombinerScheme::power_normalized: return "power_normalized";
    case CombinerScheme::sign_regressor: return "sign_regressor";
    case CombinerScheme::multi_sign: return "multi_sign";
  }
  return "?";
}

void CombinerConfig::validate(int n_agents) const {
  if (nu.size() != n_agents) throw ConfigError("combiner step-size vector length must equal N");
  if ((nu.array() < 0.0).any()) throw ConfigError("combiner step sizes must be nonnegative");
  if (scheme == CombinerScheme::power_normalized) {
    if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
    if (!(eta > 0.0 && eta < 1.0)) throw ConfigError("eta must lie in (0, 1)");
  }
  if (scheme == CombinerScheme::multi_sign) {
    if (!(delta > 0.0)) throw ConfigError("delta must be positive");
    if (m < 2) throw ConfigError("multi-strategy combination needs at least two components");
  } else if (m != 2) {
    throw ConfigError("power-normalized and sign-regressor schemes combine exactly two components");
  }
}

CombinerState CombinerState::initial(const CombinerConfig& cfg, int n_agents) {
  CombinerState st;
  st.gamma = Vec::Constant(n_agents, cfg.gamma0);
  st.power = Vec::Zero(n_agents);
  if (cfg.scheme == CombinerScheme::multi_sign) {
    st.alpha = Mat::Constant(n_agents, cfg.m, 1.0 / cfg.m);
    st.gammas = Mat::Constant(n_agents, cfg.m, 1.0 / cfg.m);
  }
  return st;
}

double CombinerState::coefficient(int k, int i) const {
  if (gammas.size() > 0) return gammas(k, i);
  return i == 0 ? gamma(k) : 1.0 - gamma(k);
}

Vec multi_mapping(const Eigen::Ref<const Vec>& alpha, double delta, bool* clamped) {
  const double m = static_cast<double>(alpha.size());
  double denom = alpha.sum() + m * delta;
  const bool clamp = !(denom > 0.0);
  if (clamp) denom = delta;
  if (clamped) *clamped = clamp;
  Vec g = (alpha.array() + delta) / denom;
  // A clamped denominator breaks the sum-to-one property; spread the excess evenly.
  if (clamp) g.array() += (1.0 - g.sum()) / m;
  return g;
}

Vec combine_estimate(std::span<const double> coeffs, std::span<const Vec* const> estimates) {
  if (coeffs.size() != estimates.size() || estimates.empty())
    throw ConfigError("coefficient and estimate counts differ");
  Vec w = Vec::Zero(estimates.front()->size());
  for (size_t i = 0; i < estimates.size(); ++i) {
    if (estimates[i]->size() != w.size()) throw ConfigError("component estimates differ in length");
    w += coeffs[i] * *estimates[i];
  }
  return w;
}

std::vector<Vec> combine_weights(const CombinerState& st,
                                 const std::vector<const std::vector<Vec>*>& components) {
  if (components.empty()) throw ConfigError("no component estimates");
  const size_t n = components.front()->size();
  std::vector<Vec> out(n);
  std::vector<double> coeffs(components.size());
  std::vector<const Vec*> ptrs(components.size());
  for (size_t k = 0; k < n; ++k) {
    for (size_t i = 0; i < components.size(); ++i) {
      if (components[i]->size() != n) throw ConfigError("components differ in agent count");
      coeffs[i] = st.coefficient(static_cast<int>(k), static_cast<int>(i));
      ptrs[i] = &(*components[i])[k];
    }
    out[k] = combine_estimate(coeffs, ptrs);
  }
  return out;
}

void pn_update(const CombinerConfig& cfg, CombinerState& st, int k, const PairUpdateInput& in) {
  st.power(k) = cfg.eta * st.power(k) + (1.0 - cfg.eta) * in.dy * in.dy;
  st.gamma(k) += cfg.nu(k) / (cfg.epsilon + st.power(k)) * in.e * in.dy;
}

void sr_update(const CombinerConfig& cfg, CombinerState& st, int k, const PairUpdateInput& in) {
  st.gamma(k) += cfg.nu(k) * in.e * sign0(in.dy);
}

void multi_update(const CombinerConfig& cfg, CombinerState& st, int k, double e,
                  std::span<const double> component_errors) {
  const int m = static_cast<int>(st.alpha.cols());
  if (static_cast<int>(component_errors.size()) != m)
    throw ConfigError("component error count differs from M");
  double denom = st.alpha.row(k).sum() + m * cfg.delta;
  bool clamped = false;
  if (!(denom > 0.0)) {
    denom = cfg.delta;
    clamped = true;
  }
  for (int i = 0; i < m; ++i)
    st.alpha(k, i) += cfg.nu(k) * e * sign0((e - component_errors[static_cast<size_t>(i)]) / denom);
  bool clamped_after = false;
  st.gammas.row(k) = multi_mapping(st.alpha.row(k).transpose(), cfg.delta, &clamped_after).transpose();
  if ((clamped || clamped_after) &&
      std::find(st.clamped_agents.begin(), st.clamped_agents.end(), k) == st.clamped_agents.end())
    st.clamped_agents.push_back(k);
}

std::optional<double> optimal_gamma(double j1, double j2, double j12, double tol) {
  const double denom = j1 + j2 - 2.0 * j12;
  if (!(denom > tol)) return std::nullopt;
  return (j2 - j12) / denom;
}

}  // namespace affdiff
