#include "affdiff/theory.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace affdiff::theory {

namespace {

Mat kron(const Mat& a, const Mat& b) {
  Mat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

Mat symmetrize(const Mat& m) { return 0.5 * (m + m.transpose()); }

double floored(double s) { return std::max(s, kDeltaJFloor); }

void check_pair(const ComponentModel& m1, const ComponentModel& m2) {
  if (m1.n != m2.n || m1.len != m2.len) throw ConfigError("component models differ in N or L");
}

double block_trace(const Mat& m, int k, int len) { return m.block(k * len, k * len, len, len).trace(); }

}  // namespace

Vec DataStats::stacked_opt() const {
  const int n = n_agents();
  const int len = filter_len();
  Vec out(n * len);
  for (int k = 0; k < n; ++k) out.segment(k * len, len) = w_opt[static_cast<size_t>(k)];
  return out;
}

ComponentModel build_component_model(const Topology& t, const StrategyConfig& cfg, const DataStats& data) {
  if (cfg.a2_mode != A2Mode::fixed)
    throw DomainError("the theoretical model only covers static combination matrices");
  cfg.validate(t);
  const int n = t.size();
  if (data.n_agents() != n || static_cast<int>(data.w_opt.size()) != n || data.sigma_z2.size() != n)
    throw ConfigError("data statistics do not cover every agent");
  const int len = data.filter_len();
  for (int k = 0; k < n; ++k)
    if (data.rx[static_cast<size_t>(k)].rows() != len || data.w_opt[static_cast<size_t>(k)].size() != len)
      throw ConfigError("inconsistent filter length in data statistics");

  ComponentModel m;
  m.n = n;
  m.len = len;
  m.c = cfg.c;
  const Mat il = Mat::Identity(len, len);
  const int nl = n * len;
  m.a1x = kron(cfg.a1, il);
  m.a2x = kron(cfg.a2, il);
  m.u = Mat::Zero(nl, nl);
  m.hbar = Mat::Zero(nl, nl);
  m.rk.resize(static_cast<size_t>(n));
  for (int k = 0; k < n; ++k) {
    m.u.block(k * len, k * len, len, len) = cfg.mu(k) * il;
    Mat r = Mat::Zero(len, len);
    for (int l = 0; l < n; ++l) {
      const double c = cfg.c(l, k);
      if (c == 0.0) continue;
      const Mat& rl = data.rx[static_cast<size_t>(l)];
      r += c * rl;
    }
    m.rk[static_cast<size_t>(k)] = r;
    m.hbar.block(k * len, k * len, len, len) = r;
  }
  m.bbar = m.a2x.transpose() * (Mat::Identity(nl, nl) - m.u * m.hbar) * m.a1x.transpose();
  m.rbar = drift(m, data);

  ComponentModel self = m;
  m.g = cross_noise_moment(self, self, data);
  m.g = symmetrize(m.g);
  return m;
}

Vec drift(const ComponentModel& m, const DataStats& data) {
  const int n = m.n, len = m.len, nl = n * len;
  Vec hu = Vec::Zero(nl);
  for (int k = 0; k < n; ++k)
    for (int l = 0; l < n; ++l) {
      const double c = m.c(l, k);
      if (c != 0.0 && l != k)
        hu.segment(k * len, len) += c * data.rx[static_cast<size_t>(l)] *
                                    (data.w_opt[static_cast<size_t>(k)] - data.w_opt[static_cast<size_t>(l)]);
    }
  const Mat eye = Mat::Identity(nl, nl);
  const Mat a2t = m.a2x.transpose();
  const Vec wstar = data.stacked_opt();
  const Vec ru = a2t * (m.u * hu);
  const Vec rw = a2t * ((eye - m.u * m.hbar) * ((m.a1x.transpose() - eye) * wstar)) + (a2t - eye) * wstar;
  return ru - rw;
}

Mat cross_noise_moment(const ComponentModel& m1, const ComponentModel& m2, const DataStats& data) {
  check_pair(m1, m2);
  const int n = m1.n;
  const int len = m1.len;
  Mat p = Mat::Zero(n * len, n * len);
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j) {
      auto blk = p.block(k * len, j * len, len, len);
      for (int l = 0; l < n; ++l) {
        const double w = m1.c(l, k) * m2.c(l, j);
        if (w != 0.0) blk += w * data.sigma_z2(l) * data.rx[static_cast<size_t>(l)];
      }
    }
  return m1.a2x.transpose() * m1.u * p * m2.u * m2.a2x;
}

Vec mean_step(const ComponentModel& model, const Vec& m) { return model.bbar * m - model.rbar; }

Mat covariance_step(const ComponentModel& model, const Vec& m, const Mat& om) {
  const Vec bm = model.bbar * m;
  Mat next = model.bbar * om * model.bbar.transpose() + model.g + model.rbar * model.rbar.transpose() -
             bm * model.rbar.transpose() - model.rbar * bm.transpose();
  return symmetrize(next);
}

Mat cross_covariance_step(const ComponentModel& m1, const ComponentModel& m2, const Mat& gx,
                          const Vec& mean1, const Vec& mean2, const Mat& omx) {
  check_pair(m1, m2);
  if (omx.rows() != m1.bbar.rows() || omx.cols() != m2.bbar.rows())
    throw ConfigError("cross moment has the wrong dimensions");
  return m1.bbar * omx * m2.bbar.transpose() + gx + m1.rbar * m2.rbar.transpose() -
         (m1.bbar * mean1) * m2.rbar.transpose() - m1.rbar * (m2.bbar * mean2).transpose();
}

Vec emse_from_cov(const Mat& om, const std::vector<Mat>& rx) {
  const int n = static_cast<int>(rx.size());
  if (n == 0) return Vec();
  const int len = static_cast<int>(rx.front().rows());
  if (om.rows() != n * len || om.cols() != n * len) throw ConfigError("moment size differs from N*L");
  Vec j(n);
  for (int k = 0; k < n; ++k)
    j(k) = (rx[static_cast<size_t>(k)] * om.block(k * len, k * len, len, len)).trace();
  return j;
}

double network_msd(const Mat& om, int n_agents) { return om.trace() / n_agents; }

PnGammaStep gamma_mean_step_pn(double nu, double eps, double eta, double gbar, double pbar_prev,
                               const GammaDrive& d) {
  const double s = floored(d.sum());
  PnGammaStep out;
  out.pbar = eta * pbar_prev + (1.0 - eta) * s;
  out.nubar = nu / (eps + out.pbar);
  out.gbar = gbar * (1.0 - out.nubar * s) + out.nubar * d.dj2;
  return out;
}

double gamma_ms_step_pn(double nubar, double gbar, double g2bar, const GammaDrive& d) {
  const double s = floored(d.sum());
  const double v2 = nubar * nubar;
  return g2bar * (1.0 + 3.0 * v2 * s * s - 2.0 * nubar * s) + v2 * d.j2 * s + 2.0 * v2 * d.dj2 * d.dj2 +
         d.sigma_z2 * v2 * s + 2.0 * gbar * (nubar * d.dj2 - 3.0 * v2 * s * d.dj2);
}

std::optional<double> gamma_mean_step_sr(double nu, double gbar, const GammaDrive& d) {
  const double s = d.sum();
  if (!(s > kDeltaJFloor)) return std::nullopt;
  const double k = std::sqrt(2.0 / std::numbers::pi);
  return gbar * (1.0 - nu * k * std::sqrt(s)) + nu * k * d.dj2 / std::sqrt(s);
}

std::optional<double> gamma_ms_step_sr(double nu, double gbar, double g2bar, const GammaDrive& d) {
  const double s = d.sum();
  if (!(s > kDeltaJFloor)) return std::nullopt;
  const double k = std::sqrt(2.0 / std::numbers::pi);
  return g2bar * (1.0 + nu * nu * s - 2.0 * nu * k * std::sqrt(s)) + nu * nu * (d.j2 + d.sigma_z2) +
         2.0 * gbar * (nu * k * d.dj2 / std::sqrt(s) - nu * nu * d.dj2);
}

double steady_gamma_mean(const GammaDrive& d) {
  const double s = d.sum();
  if (!(s > kDeltaJFloor)) return 0.5;
  return d.dj2 / s;
}

double steady_gamma_ms_pn(double nu, double eps, const GammaDrive& d) {
  const double s = floored(d.sum());
  const double g = steady_gamma_mean(d);
  const double vb = nu / (eps + s);
  return (vb * (d.j2 + d.sigma_z2) * s + 2.0 * vb * d.dj2 * d.dj2 + 2.0 * g * (d.dj2 - 3.0 * vb * s * d.dj2)) /
         (2.0 * s - 3.0 * vb * s * s);
}

double steady_gamma_ms_sr(double nu, const GammaDrive& d) {
  const double s = floored(d.sum());
  const double g = steady_gamma_mean(d);
  const double pi = std::numbers::pi;
  return (nu * (d.j2 + d.sigma_z2) + 2.0 * g * (d.dj2 * std::sqrt(2.0 / (pi * s)) - nu * d.dj2)) /
         (std::sqrt(8.0 * s / pi) - nu * s);
}

double combined_msd(const Mat& om1, const Mat& om2, const Mat& omx, const Vec& gbar, const Vec& g2bar,
                    int len) {
  const int n = static_cast<int>(gbar.size());
  double acc = 0.0;
  for (int k = 0; k < n; ++k) {
    const double g = gbar(k), g2 = g2bar(k);
    acc += g2 * block_trace(om1, k, len) + (1.0 - 2.0 * g + g2) * block_trace(om2, k, len) +
           2.0 * (g - g2) * block_trace(omx, k, len);
  }
  return acc / n;
}

Vec combined_emse(const Vec& j1, const Vec& j2, const Vec& j12, const Vec& gbar, const Vec& g2bar) {
  return (g2bar.array() * j1.array() + (1.0 - 2.0 * gbar.array() + g2bar.array()) * j2.array() +
          2.0 * (gbar.array() - g2bar.array()) * j12.array())
      .matrix();
}

MomentState initial_moments(const ComponentModel& m1, const ComponentModel& m2, const Vec& w0,
                            const DataStats& data, double gamma0) {
  check_pair(m1, m2);
  const Vec v0 = w0 - data.stacked_opt();
  MomentState st;
  st.m1 = v0;
  st.m2 = v0;
  st.om1 = v0 * v0.transpose();
  st.om2 = st.om1;
  st.omx = st.om1;
  st.gbar = Vec::Constant(m1.n, gamma0);
  st.g2bar = Vec::Constant(m1.n, gamma0 * gamma0);
  st.pbar = Vec::Zero(m1.n);
  st.frozen.assign(static_cast<size_t>(m1.n), 0);
  return st;
}

TheoryPoint advance(const ComponentModel& m1, const ComponentModel& m2, const Mat& gx,
                    const DataStats& data, const CombinerConfig& comb, MomentState& st) {
  if (comb.scheme == CombinerScheme::multi_sign)
    throw DomainError("the theoretical model covers the two-component schemes only");
  const int n = m1.n;
  const int len = m1.len;
  const Vec j1 = emse_from_cov(st.om1, data.rx);
  const Vec j2 = emse_from_cov(st.om2, data.rx);
  const Vec j12 = emse_from_cov(st.omx, data.rx);

  TheoryPoint pt;
  pt.msd1 = network_msd(st.om1, n);
  pt.msd2 = network_msd(st.om2, n);
  pt.msd_cross = network_msd(st.omx, n);
  pt.msd = combined_msd(st.om1, st.om2, st.omx, st.gbar, st.g2bar, len);
  pt.emse1 = j1.sum();
  pt.emse2 = j2.sum();
  pt.emse_cross = j12.sum();
  pt.emse = combined_emse(j1, j2, j12, st.gbar, st.g2bar).sum();
  pt.gbar = st.gbar;
  pt.g2bar = st.g2bar;
  pt.dj_sum = j1 + j2 - 2.0 * j12;

  const Mat om1 = covariance_step(m1, st.m1, st.om1);
  const Mat om2 = covariance_step(m2, st.m2, st.om2);
  const Mat omx = cross_covariance_step(m1, m2, gx, st.m1, st.m2, st.omx);
  st.m1 = mean_step(m1, st.m1);
  st.m2 = mean_step(m2, st.m2);
  st.om1 = om1;
  st.om2 = om2;
  st.omx = omx;

  for (int k = 0; k < n; ++k) {
    GammaDrive d{j1(k) - j12(k), j2(k) - j12(k), j2(k), data.sigma_z2(k)};
    const double nu = comb.nu(k);
    if (comb.scheme == CombinerScheme::power_normalized) {
      const auto s = gamma_mean_step_pn(nu, comb.epsilon, comb.eta, st.gbar(k), st.pbar(k), d);
      st.g2bar(k) = gamma_ms_step_pn(s.nubar, st.gbar(k), st.g2bar(k), d);
      st.gbar(k) = s.gbar;
      st.pbar(k) = s.pbar;
    } else {
      const auto g = gamma_mean_step_sr(nu, st.gbar(k), d);
      const auto g2 = gamma_ms_step_sr(nu, st.gbar(k), st.g2bar(k), d);
      if (!g || !g2) {
        st.frozen[static_cast<size_t>(k)] = 1;
        continue;
      }
      st.gbar(k) = *g;
      st.g2bar(k) = *g2;
    }
  }
  return pt;
}

double spectral_radius(const Mat& m) {
  Eigen::EigenSolver<Mat> es(m, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

Mat solve_stein(const Mat& a, const Mat& b, const Mat& q) {
  const Eigen::Index r = a.rows(), c = b.rows();
  if (q.rows() != r || q.cols() != c) throw ConfigError("Stein equation operands have mismatched sizes");
  if (r * c <= 1600) {
    const Mat sys = Mat::Identity(r * c, r * c) - kron(b, a);
    const Vec rhs = Eigen::Map<const Vec>(q.data(), r * c);
    const Vec x = sys.partialPivLu().solve(rhs);
    return Eigen::Map<const Mat>(x.data(), r, c);
  }
  // Doubling iteration X_{k+1} = X_k + A_k X_k B_k^T with A_{k+1} = A_k^2.
  Mat x = q, ak = a, bk = b;
  for (int it = 0; it < 80; ++it) {
    const Mat inc = ak * x * bk.transpose();
    x += inc;
    if (inc.norm() <= 1e-15 * x.norm()) break;
    ak = (ak * ak).eval();
    bk = (bk * bk).eval();
  }
  return x;
}

SteadyReport steady_state(const ComponentModel& m1, const ComponentModel& m2, const Mat& gx,
                          const DataStats& data, const CombinerConfig& comb) {
  check_pair(m1, m2);
  if (comb.scheme == CombinerScheme::multi_sign)
    throw DomainError("the theoretical model covers the two-component schemes only");
  const double rho1 = spectral_radius(m1.bbar);
  if (!(rho1 < 1.0))
    throw DomainError("component 1 is unstable in the mean (spectral radius " + std::to_string(rho1) + ")");
  const double rho2 = spectral_radius(m2.bbar);
  if (!(rho2 < 1.0))
    throw DomainError("component 2 is unstable in the mean (spectral radius " + std::to_string(rho2) + ")");

  const int n = m1.n, len = m1.len, nl = n * len;
  const Mat eye = Mat::Identity(nl, nl);
  SteadyReport rep;
  rep.m1 = -(eye - m1.bbar).partialPivLu().solve(m1.rbar);
  rep.m2 = -(eye - m2.bbar).partialPivLu().solve(m2.rbar);

  auto drive = [](const ComponentModel& m, const Vec& mean) {
    const Vec bm = m.bbar * mean;
    return Mat(m.g + m.rbar * m.rbar.transpose() - bm * m.rbar.transpose() - m.rbar * bm.transpose());
  };
  rep.om1 = symmetrize(solve_stein(m1.bbar, m1.bbar, drive(m1, rep.m1)));
  rep.om2 = symmetrize(solve_stein(m2.bbar, m2.bbar, drive(m2, rep.m2)));
  const Mat qx = gx + m1.rbar * m2.rbar.transpose() - (m1.bbar * rep.m1) * m2.rbar.transpose() -
                 m1.rbar * (m2.bbar * rep.m2).transpose();
  rep.omx = solve_stein(m1.bbar, m2.bbar, qx);

  rep.j1 = emse_from_cov(rep.om1, data.rx);
  rep.j2 = emse_from_cov(rep.om2, data.rx);
  rep.j12 = emse_from_cov(rep.omx, data.rx);
  rep.gbar.resize(n);
  rep.g2bar.resize(n);
  rep.bias.resize(nl);
  for (int k = 0; k < n; ++k) {
    GammaDrive d{rep.j1(k) - rep.j12(k), rep.j2(k) - rep.j12(k), rep.j2(k), data.sigma_z2(k)};
    rep.gbar(k) = steady_gamma_mean(d);
    rep.g2bar(k) = comb.scheme == CombinerScheme::power_normalized
                       ? steady_gamma_ms_pn(comb.nu(k), comb.epsilon, d)
                       : steady_gamma_ms_sr(comb.nu(k), d);
    rep.bias.segment(k * len, len) =
        rep.gbar(k) * rep.m1.segment(k * len, len) + (1.0 - rep.gbar(k)) * rep.m2.segment(k * len, len);
  }
  rep.msd1 = network_msd(rep.om1, n);
  rep.msd2 = network_msd(rep.om2, n);
  rep.msd_cross = network_msd(rep.omx, n);
  rep.msd = combined_msd(rep.om1, rep.om2, rep.omx, rep.gbar, rep.g2bar, len);
  rep.emse = combined_emse(rep.j1, rep.j2, rep.j12, rep.gbar, rep.g2bar).sum();
  return rep;
}

StabilityReport stability_bounds(const ComponentModel& m1, const ComponentModel& m2,
                                 const CombinerConfig& comb, const Vec& max_dj_sum) {
  check_pair(m1, m2);
  const int n = m1.n, len = m1.len;
  StabilityReport rep;
  rep.mu_bound.resize(n, 2);
  rep.mu_ok.resize(n, 2);
  const ComponentModel* models[2] = {&m1, &m2};
  for (int i = 0; i < 2; ++i)
    for (int k = 0; k < n; ++k) {
      Eigen::SelfAdjointEigenSolver<Mat> es(models[i]->rk[static_cast<size_t>(k)], Eigen::EigenvaluesOnly);
      const double bound = 2.0 / es.eigenvalues().maxCoeff();
      rep.mu_bound(k, i) = bound;
      rep.mu_ok(k, i) = models[i]->u(k * len, k * len) < bound ? 1.0 : 0.0;
    }
  rep.rho1 = spectral_radius(m1.bbar);
  rep.rho2 = spectral_radius(m2.bbar);
  rep.nu_mean_bound_pn = 1.0 - comb.eta;
  rep.nu_ms_bound_pn = (1.0 - comb.eta) / 3.0;
  if (max_dj_sum.size() == n) {
    const double pi = std::numbers::pi;
    rep.nu_mean_bound_sr.resize(n);
    rep.nu_ms_bound_sr.resize(n);
    rep.nu_mean_ok.resize(static_cast<size_t>(n));
    rep.nu_ms_ok.resize(static_cast<size_t>(n));
    for (int k = 0; k < n; ++k) {
      const double s = floored(max_dj_sum(k));
      rep.nu_mean_bound_sr(k) = std::sqrt(pi / (2.0 * s));
      rep.nu_ms_bound_sr(k) = std::sqrt(2.0 / (pi * s));
    }
  }
  if (comb.nu.size() == n) {
    rep.nu_mean_ok.resize(static_cast<size_t>(n));
    rep.nu_ms_ok.resize(static_cast<size_t>(n));
    for (int k = 0; k < n; ++k) {
      const double nu = comb.nu(k);
      if (comb.scheme == CombinerScheme::power_normalized) {
        rep.nu_mean_ok[static_cast<size_t>(k)] = nu < rep.nu_mean_bound_pn;
        rep.nu_ms_ok[static_cast<size_t>(k)] = nu < rep.nu_ms_bound_pn;
      } else if (rep.nu_mean_bound_sr.size() == n) {
        rep.nu_mean_ok[static_cast<size_t>(k)] = nu < rep.nu_mean_bound_sr(k);
        rep.nu_ms_ok[static_cast<size_t>(k)] = nu < rep.nu_ms_bound_sr(k);
      }
    }
  }
  return rep;
}

UniversalityReport universality_report(const Vec& j1, const Vec& j2, const Vec& j12) {
  const int n = static_cast<int>(j1.size());
  if (j2.size() != n || j12.size() != n) throw ConfigError("EMSE vectors differ in length");
  UniversalityReport rep;
  rep.combined.resize(n);
  rep.cases.resize(static_cast<size_t>(n));
  int degenerate = 0;
  for (int k = 0; k < n; ++k) {
    const double bound = std::sqrt(std::max(j1(k), 0.0) * std::max(j2(k), 0.0));
    if (std::abs(j12(k)) > bound * (1.0 + 1e-9) + 1e-15)
      throw DomainError("agent " + std::to_string(k + 1) + " violates the Cauchy-Schwarz bound on the cross EMSE");
    const double d1 = j1(k) - j12(k), d2 = j2(k) - j12(k);
    const double s = d1 + d2;
    using C = UniversalityReport::Case;
    if (!(s > kDeltaJFloor)) {
      rep.cases[static_cast<size_t>(k)] = C::indistinguishable;
      rep.combined(k) = j12(k);
      ++degenerate;
      continue;
    }
    rep.combined(k) = j12(k) + d1 * d2 / s;
    rep.cases[static_cast<size_t>(k)] = d1 < 0.0 ? C::first_below_cross : d2 < 0.0 ? C::second_below_cross
                                                                                    : C::both_nonneg;
  }
  rep.indistinguishable = degenerate == n;
  rep.net1 = j1.sum();
  rep.net2 = j2.sum();
  rep.net = rep.combined.sum();
  const double best = std::min(rep.net1, rep.net2);
  rep.margin = best - rep.net;
  rep.universal = rep.net <= best * (1.0 + 1e-12) + 1e-15;
  return rep;
}

}  // namespace affdiff::theory
