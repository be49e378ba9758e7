#include "affdiff/diffusion.hpp"

#include <algorithm>
#include <string>

namespace affdiff {

void StrategyConfig::validate(const Topology& t) const {
  const int n = t.size();
  auto check = [&](const Mat& m, StochasticRole role, const char* name) {
    auto r = validate_stochastic(m, t, role);
    if (!r.dimensions_ok)
      throw ConfigError(std::string("matrix ") + name + " must be " + std::to_string(n) + "x" +
                        std::to_string(n));
    if (!r.valid())
      throw ConfigError(std::string("matrix ") + name + " is not a valid " +
                        (role == StochasticRole::left ? "left" : "right") +
                        "-stochastic matrix on this topology (max sum deviation " +
                        std::to_string(r.max_sum_deviation) + ")");
  };
  check(a1, StochasticRole::left, "A1");
  check(a2, StochasticRole::left, "A2");
  check(c, StochasticRole::right, "C");
  if (mu.size() != n) throw ConfigError("step-size vector length must equal N");
  if ((mu.array() < 0.0).any()) throw ConfigError("step sizes must be nonnegative");
  if (a2_mode == A2Mode::adaptive_relative_variance) {
    if (tau.size() != n) throw ConfigError("forgetting-factor vector length must equal N");
    if ((tau.array() <= 0.0).any() || (tau.array() >= 1.0).any())
      throw ConfigError("forgetting factors must lie in (0, 1)");
  }
}

StrategyConfig make_atc(const Topology& t, const Mat& a2, double mu) {
  StrategyConfig cfg;
  cfg.a1 = Mat::Identity(t.size(), t.size());
  cfg.c = Mat::Identity(t.size(), t.size());
  cfg.a2 = a2;
  cfg.mu = Vec::Constant(t.size(), mu);
  return cfg;
}

StrategyState StrategyState::initial(const Topology& t, const StrategyConfig& cfg, int filter_len) {
  const int n = t.size();
  StrategyState st;
  st.w.assign(static_cast<size_t>(n), Vec::Zero(filter_len));
  st.psi = st.w;
  st.phi = st.w;
  st.zeta2 = Mat::Zero(n, n);
  for (int k = 0; k < n; ++k)
    for (int l : t.neighbors(k)) st.zeta2(l, k) = 1.0;
  st.a2_eff = cfg.a2;
  return st;
}

namespace {

Mat normalize_inverse_columns(const Topology& t, const Mat& dist2) {
  const int n = t.size();
  Mat a = Mat::Zero(n, n);
  for (int k = 0; k < n; ++k) {
    double total = 0.0;
    for (int l : t.neighbors(k)) {
      a(l, k) = 1.0 / std::max(dist2(l, k), kDistanceFloor);
      total += a(l, k);
    }
    for (int l : t.neighbors(k)) a(l, k) /= total;
  }
  return a;
}

}  // namespace

Mat adapt_matrix_projection(const Topology& t, const std::vector<Vec>& psi, const SampleBatch& batch,
                            const Vec& mu) {
  const int n = t.size();
  Mat dist2 = Mat::Zero(n, n);
  for (int k = 0; k < n; ++k) {
    const auto& s = batch[static_cast<size_t>(k)];
    const Vec& pk = psi[static_cast<size_t>(k)];
    const Vec target = pk + mu(k) * (s.d - s.x.dot(pk)) * s.x;
    for (int l : t.neighbors(k)) dist2(l, k) = (target - psi[static_cast<size_t>(l)]).squaredNorm();
  }
  return normalize_inverse_columns(t, dist2);
}

Mat adapt_matrix_relative_variance(const Topology& t, const std::vector<Vec>& psi,
                                   const std::vector<Vec>& w_prev, const Vec& tau, Mat& zeta2) {
  const int n = t.size();
  for (int k = 0; k < n; ++k)
    for (int l : t.neighbors(k))
      zeta2(l, k) = (1.0 - tau(k)) * zeta2(l, k) +
                    tau(k) * (psi[static_cast<size_t>(l)] - w_prev[static_cast<size_t>(k)]).squaredNorm();
  return normalize_inverse_columns(t, zeta2);
}

void diffusion_step(const Topology& t, const StrategyConfig& cfg, StrategyState& st,
                    const SampleBatch& batch) {
  const int n = t.size();
  if (static_cast<int>(batch.size()) != n || static_cast<int>(st.w.size()) != n)
    throw ConfigError("batch or state does not cover every agent");
  const Eigen::Index len = st.w.front().size();
  for (const auto& s : batch)
    if (s.x.size() != len) throw ConfigError("regressor length differs from the estimate length");

  for (int k = 0; k < n; ++k) {
    Vec& phi = st.phi[static_cast<size_t>(k)];
    phi.setZero();
    for (int l : t.neighbors(k))
      if (cfg.a1(l, k) != 0.0) phi += cfg.a1(l, k) * st.w[static_cast<size_t>(l)];
  }
  for (int k = 0; k < n; ++k) {
    const Vec& phi = st.phi[static_cast<size_t>(k)];
    Vec grad = Vec::Zero(len);
    for (int l : t.neighbors(k)) {
      const double c = cfg.c(l, k);
      if (c == 0.0) continue;
      const auto& s = batch[static_cast<size_t>(l)];
      grad += c * (s.d - s.x.dot(phi)) * s.x;
    }
    st.psi[static_cast<size_t>(k)] = phi + cfg.mu(k) * grad;
  }
  switch (cfg.a2_mode) {
    case A2Mode::fixed:
      st.a2_eff = cfg.a2;
      break;
    case A2Mode::adaptive_projection:
      st.a2_eff = adapt_matrix_projection(t, st.psi, batch, cfg.mu);
      break;
    case A2Mode::adaptive_relative_variance:
      st.a2_eff = adapt_matrix_relative_variance(t, st.psi, st.w, cfg.tau, st.zeta2);
      break;
  }
  for (int k = 0; k < n; ++k) {
    Vec& w = st.w[static_cast<size_t>(k)];
    w.setZero();
    for (int l : t.neighbors(k))
      if (st.a2_eff(l, k) != 0.0) w += st.a2_eff(l, k) * st.psi[static_cast<size_t>(l)];
  }
}

std::vector<AgentOutputs> errors_and_outputs(const std::vector<Vec>& w, const SampleBatch& batch) {
  if (w.size() != batch.size()) throw ConfigError("estimates and batch differ in agent count");
  std::vector<AgentOutputs> out(w.size());
  for (size_t k = 0; k < w.size(); ++k) {
    const auto& s = batch[k];
    if (s.x.size() != w[k].size()) throw ConfigError("regressor length differs from estimate length");
    out[k].y = s.x.dot(w[k]);
    out[k].e = s.d - out[k].y;
    out[k].e_apriori = s.x.dot(s.w_opt - w[k]);
  }
  return out;
}

DiffusionLms::DiffusionLms(std::shared_ptr<const Topology> topology, StrategyConfig cfg, int filter_len)
    : topo_(std::move(topology)), cfg_(std::move(cfg)), filter_len_(filter_len) {
  cfg_.validate(*topo_);
  state_ = StrategyState::initial(*topo_, cfg_, filter_len_);
}

std::unique_ptr<ComponentStrategy> DiffusionLms::fresh() const {
  return std::make_unique<DiffusionLms>(topo_, cfg_, filter_len_);
}

}  // namespace affdiff
