#include "affdiff/signal.hpp"

#include <cmath>
#include <string>

namespace affdiff {

void AgentSignalParams::validate() const {
  if (!(sigma_x2 > 0.0)) throw ConfigError("regressor power must be positive");
  if (!(sigma_z2 >= 0.0)) throw ConfigError("noise variance must be nonnegative");
  if (filter_len < 1) throw ConfigError("filter length must be at least 1");
  if (regressor == RegressorKind::ar1 && filter_len != 2)
    throw ConfigError("AR(1) regressors use the two-tap shift structure (L = 2)");
}

Mat AgentSignalParams::covariance() const {
  Mat r = sigma_x2 * Mat::Identity(filter_len, filter_len);
  if (regressor == RegressorKind::ar1) r(0, 1) = r(1, 0) = 0.5 * sigma_x2;
  return r;
}

void TargetSchedule::validate(int n_agents, int filter_len) const {
  if (stages.empty()) throw ConfigError("target schedule has no stages");
  if (transition_len < 0) throw ConfigError("transition length must be nonnegative");
  for (size_t s = 0; s < stages.size(); ++s) {
    if (s > 0 && stages[s].start <= stages[s - 1].start)
      throw ConfigError("stage start times must be strictly increasing");
    if (static_cast<int>(stages[s].w.size()) != n_agents)
      throw ConfigError("stage " + std::to_string(s) + " has " +
                        std::to_string(stages[s].w.size()) + " target vectors, expected " +
                        std::to_string(n_agents));
    for (const auto& w : stages[s].w)
      if (w.size() != filter_len) throw ConfigError("target vector length differs from L");
  }
}

int TargetSchedule::stage_at(long n) const {
  if (stages.empty() || n < stages.front().start)
    throw ConfigError("time index " + std::to_string(n) + " precedes the first stage");
  int s = 0;
  while (s + 1 < static_cast<int>(stages.size()) && stages[static_cast<size_t>(s + 1)].start <= n) ++s;
  return s;
}

long TargetSchedule::stationary_start(int s) const {
  const auto& st = stages[static_cast<size_t>(s)];
  return s == 0 ? st.start : st.start + transition_len;
}

long TargetSchedule::stage_end(int s, long horizon) const {
  return s + 1 < static_cast<int>(stages.size()) ? stages[static_cast<size_t>(s + 1)].start : horizon;
}

std::vector<Vec> target_at(const TargetSchedule& s, long n) {
  const int idx = s.stage_at(n);
  const auto& cur = s.stages[static_cast<size_t>(idx)];
  const long into = n - cur.start;
  if (idx == 0 || into >= s.transition_len) return cur.w;
  const auto& prev = s.stages[static_cast<size_t>(idx - 1)];
  const double frac = static_cast<double>(into) / static_cast<double>(s.transition_len);
  std::vector<Vec> out(cur.w.size());
  for (size_t k = 0; k < out.size(); ++k) out[k] = prev.w[k] + (cur.w[k] - prev.w[k]) * frac;
  return out;
}

AgentStream::AgentStream(std::uint64_t seed, std::uint64_t run, std::uint64_t agent) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(run), static_cast<std::uint32_t>(run >> 32),
                    static_cast<std::uint32_t>(agent), static_cast<std::uint32_t>(agent >> 32)};
  engine_.seed(seq);
}

Vec AgentStream::draw_regressor(const AgentSignalParams& p) {
  if (p.regressor == RegressorKind::white) {
    Vec x(p.filter_len);
    const double sd = std::sqrt(p.sigma_x2);
    for (int i = 0; i < p.filter_len; ++i) x(i) = sd * gaussian();
    return x;
  }
  if (p.filter_len != 2) throw ConfigError("AR(1) regressors use the two-tap shift structure (L = 2)");
  if (!ar_started_) {
    // Start in the stationary distribution.
    ar_prev_ = std::sqrt(p.sigma_x2) * gaussian();
    ar_started_ = true;
  }
  const double cur = 0.5 * ar_prev_ + std::sqrt(0.75 * p.sigma_x2) * gaussian();
  Vec x(2);
  x << cur, ar_prev_;
  ar_prev_ = cur;
  return x;
}

Sample emit_sample(const AgentSignalParams& p, const Vec& w_opt, Vec x, AgentStream& stream) {
  if (x.size() != w_opt.size()) throw ConfigError("regressor and target lengths differ");
  Sample s;
  s.z = p.sigma_z2 > 0.0 ? std::sqrt(p.sigma_z2) * stream.gaussian() : 0.0;
  s.d = x.dot(w_opt) + s.z;
  s.x = std::move(x);
  s.w_opt = w_opt;
  return s;
}

double snr_db(const AgentSignalParams& p, const Vec& w_opt) {
  if (!(p.sigma_z2 > 0.0)) throw DomainError("SNR undefined for zero noise variance");
  return 10.0 * std::log10(w_opt.dot(p.covariance() * w_opt) / p.sigma_z2);
}

}  // namespace affdiff
