#include "affdiff/diffusion.hpp"

#include "doctest.h"

#include <cmath>
#include <random>

using namespace affdiff;

namespace {

Sample sample(const Vec& x, const Vec& w_opt, double z = 0.0) {
  Sample s;
  s.x = x;
  s.w_opt = w_opt;
  s.z = z;
  s.d = x.dot(w_opt) + z;
  return s;
}

Vec v1(double a) { return Vec::Constant(1, a); }

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

SampleBatch random_batch(std::mt19937_64& rng, int n, int len, double sz) {
  std::normal_distribution<double> g;
  SampleBatch b;
  Vec w = Vec::Ones(len);
  for (int k = 0; k < n; ++k) {
    Vec x(len);
    for (int i = 0; i < len; ++i) x(i) = g(rng);
    b.push_back(sample(x, w, std::sqrt(sz) * g(rng)));
  }
  return b;
}

}  // namespace

TEST_CASE("single agent reduces to LMS") {
  const Topology t(1, {});
  StrategyConfig cfg = make_atc(t, Mat::Identity(1, 1), 0.5);
  StrategyState st = StrategyState::initial(t, cfg, 1);
  const SampleBatch b{sample(v1(1.0), v1(1.0))};
  diffusion_step(t, cfg, st, b);
  CHECK(st.w[0](0) == 0.5);
  diffusion_step(t, cfg, st, b);
  CHECK(st.w[0](0) == 0.75);
}

TEST_CASE("single agent LMS update on random data") {
  const Topology t(1, {});
  StrategyConfig cfg = make_atc(t, Mat::Identity(1, 1), 0.05);
  StrategyState st = StrategyState::initial(t, cfg, 3);
  std::mt19937_64 rng(3);
  for (int i = 0; i < 50; ++i) {
    const SampleBatch b = random_batch(rng, 1, 3, 0.1);
    const Vec w = st.w[0];
    const Vec expect = w + 0.05 * b[0].x * (b[0].d - b[0].x.dot(w));
    diffusion_step(t, cfg, st, b);
    CHECK((st.w[0] - expect).norm() <= 1e-14);
  }
}

TEST_CASE("zero step size leaves the state unchanged") {
  const Topology t(3, {{0, 1}, {1, 2}});
  StrategyConfig cfg = make_atc(t, Mat::Identity(3, 3), 0.0);
  CHECK_NOTHROW(cfg.validate(t));
  StrategyState st = StrategyState::initial(t, cfg, 2);
  st.w[1] = v2(1.0, -2.0);
  const auto before = st.w;
  std::mt19937_64 rng(1);
  diffusion_step(t, cfg, st, random_batch(rng, 3, 2, 0.1));
  for (int k = 0; k < 3; ++k) CHECK(st.w[static_cast<size_t>(k)] == before[static_cast<size_t>(k)]);
}

TEST_CASE("general step matches the three-stage formula") {
  const Topology t(3, {{0, 1}, {1, 2}});
  StrategyConfig cfg;
  cfg.a1 = static_rule(t, StaticRule::metropolis);
  cfg.a2 = static_rule(t, StaticRule::averaging);
  cfg.c = static_rule(t, StaticRule::metropolis).transpose();
  cfg.mu = Vec::LinSpaced(3, 0.01, 0.03);
  cfg.validate(t);
  StrategyState st = StrategyState::initial(t, cfg, 2);
  st.w = {v2(0.1, 0.2), v2(-0.3, 0.4), v2(0.5, -0.6)};
  std::mt19937_64 rng(7);
  const SampleBatch b = random_batch(rng, 3, 2, 0.1);
  std::vector<Vec> phi(3), psi(3), w(3);
  for (int k = 0; k < 3; ++k) {
    phi[k] = Vec::Zero(2);
    for (int l = 0; l < 3; ++l) phi[k] += cfg.a1(l, k) * st.w[l];
  }
  for (int k = 0; k < 3; ++k) {
    psi[k] = phi[k];
    for (int l = 0; l < 3; ++l) psi[k] += cfg.mu(k) * cfg.c(l, k) * b[l].x * (b[l].d - b[l].x.dot(phi[k]));
  }
  for (int k = 0; k < 3; ++k) {
    w[k] = Vec::Zero(2);
    for (int l = 0; l < 3; ++l) w[k] += cfg.a2(l, k) * psi[l];
  }
  diffusion_step(t, cfg, st, b);
  for (int k = 0; k < 3; ++k) CHECK((st.w[k] - w[k]).norm() <= 1e-14);
  CHECK(st.a2_eff == cfg.a2);
}

TEST_CASE("projection weights") {
  SUBCASE("equidistant neighbors give uniform weights") {
    const Topology t(3, {{0, 1}, {0, 2}});
    // target psi_0 + mu q_0 = (1, 0) - (1, 0) = origin, every psi at unit distance
    const std::vector<Vec> psi{v2(1.0, 0.0), v2(-1.0, 0.0), v2(0.0, 1.0)};
    const SampleBatch b{sample(v2(1.0, 0.0), v2(0.0, 0.0)), sample(v2(0.0, 0.0), v2(0.0, 0.0)),
                        sample(v2(0.0, 0.0), v2(0.0, 0.0))};
    const Mat a = adapt_matrix_projection(t, psi, b, Vec::Constant(3, 1.0));
    for (int l = 0; l < 3; ++l) CHECK(a(l, 0) == doctest::Approx(1.0 / 3));
  }
  SUBCASE("distances 1, 1 and 2 give weights 4/9, 4/9, 1/9") {
    const Topology t(3, {{0, 1}, {0, 2}});
    // target psi_0 + mu q_0 = 1 (x = 1, d = 2, psi_0 = 0, mu = 0.5)
    const std::vector<Vec> psi{v1(0.0), v1(2.0), v1(3.0)};
    SampleBatch b{sample(v1(1.0), v1(2.0)), sample(v1(0.0), v1(0.0)), sample(v1(0.0), v1(0.0))};
    const Mat a = adapt_matrix_projection(t, psi, b, Vec::Constant(3, 0.5));
    CHECK(a(0, 0) == doctest::Approx(4.0 / 9));
    CHECK(a(1, 0) == doctest::Approx(4.0 / 9));
    CHECK(a(2, 0) == doctest::Approx(1.0 / 9));
  }
  SUBCASE("columns sum to one with correct support") {
    const Topology t = build_preset("net1");
    std::mt19937_64 rng(11);
    std::normal_distribution<double> g;
    std::vector<Vec> psi;
    for (int k = 0; k < 10; ++k) psi.push_back(v2(g(rng), g(rng)));
    const Mat a = adapt_matrix_projection(t, psi, random_batch(rng, 10, 2, 0.1), Vec::Constant(10, 0.01));
    const auto rep = validate_stochastic(a, t);
    CHECK(rep.valid());
    CHECK(rep.max_sum_deviation <= 1e-12);
  }
}

TEST_CASE("coincident estimates hit the distance floor instead of dividing by zero") {
  const Topology t(2, {{0, 1}});
  const std::vector<Vec> psi{v1(1.0), v1(1.0)};
  SampleBatch b{sample(v1(0.0), v1(0.0)), sample(v1(0.0), v1(0.0))};
  const Mat a = adapt_matrix_projection(t, psi, b, Vec::Constant(2, 0.1));
  CHECK(a.allFinite());
  CHECK(a(0, 0) == doctest::Approx(0.5));
}

TEST_CASE("relative-variance weights") {
  const Topology t(2, {{0, 1}});
  SUBCASE("equal zeta gives uniform weights") {
    Mat z = Mat::Ones(2, 2);
    const std::vector<Vec> psi{v1(1.0), v1(-1.0)}, wp{v1(0.0), v1(0.0)};
    const Mat a = adapt_matrix_relative_variance(t, psi, wp, Vec::Constant(2, 0.3), z);
    CHECK(a(0, 0) == doctest::Approx(0.5));
    CHECK(a(1, 1) == doctest::Approx(0.5));
  }
  SUBCASE("tau = 1 keeps only the instantaneous distance; (1, 4) gives (0.8, 0.2)") {
    Mat z = Mat::Constant(2, 2, 7.0);
    const std::vector<Vec> psi{v1(1.0), v1(2.0)}, wp{v1(0.0), v1(0.0)};
    const Mat a = adapt_matrix_relative_variance(t, psi, wp, Vec::Constant(2, 1.0), z);
    CHECK(z(0, 0) == 1.0);
    CHECK(z(1, 0) == 4.0);
    CHECK(a(0, 0) == doctest::Approx(0.8));
    CHECK(a(1, 0) == doctest::Approx(0.2));
  }
}

TEST_CASE("errors and outputs") {
  const std::vector<Vec> w{v2(0.0, 0.0)};
  const SampleBatch b{sample(v2(1.0, 1.0), v2(1.0, 0.0), 0.5)};
  auto o = errors_and_outputs(w, b);
  CHECK(o[0].y == 0.0);
  CHECK(o[0].e_apriori == 1.0);
  CHECK(o[0].e == 1.5);
  o = errors_and_outputs({v2(1.0, 0.0)}, b);
  CHECK(o[0].e_apriori == 0.0);
  CHECK(o[0].e == 0.5);
  const SampleBatch nz{sample(v2(0.3, -1.0), v2(1.0, 2.0))};
  o = errors_and_outputs({v2(0.2, 0.1)}, nz);
  CHECK(o[0].e == doctest::Approx(o[0].e_apriori).epsilon(1e-15));
}

TEST_CASE("static matrices stay untouched and adaptive ones stay valid") {
  auto t = std::make_shared<const Topology>(build_preset("net1"));
  std::mt19937_64 rng(21);
  for (A2Mode mode : {A2Mode::fixed, A2Mode::adaptive_projection, A2Mode::adaptive_relative_variance}) {
    StrategyConfig cfg = make_atc(*t, static_rule(*t, StaticRule::averaging), 0.05);
    cfg.a2_mode = mode;
    cfg.tau = Vec::Constant(10, 0.2);
    DiffusionLms s(t, cfg, 2);
    for (int i = 0; i < 50; ++i) {
      s.step(random_batch(rng, 10, 2, 0.05));
      const Mat& a = s.state().a2_eff;
      CHECK(validate_stochastic(a, *t).valid());
      if (mode == A2Mode::fixed) CHECK(a == cfg.a2);
    }
    CHECK(s.config().a2 == static_rule(*t, StaticRule::averaging));
  }
}

TEST_CASE("identical instances give identical trajectories; fresh restarts") {
  auto t = std::make_shared<const Topology>(build_preset("net1"));
  const StrategyConfig cfg = make_atc(*t, static_rule(*t, StaticRule::metropolis), 0.03);
  DiffusionLms a(t, cfg, 2), b(t, cfg, 2);
  std::mt19937_64 rng(4);
  for (int i = 0; i < 100; ++i) {
    const SampleBatch batch = random_batch(rng, 10, 2, 0.1);
    a.step(batch);
    b.step(batch);
  }
  for (int k = 0; k < 10; ++k) CHECK(a.estimates()[k] == b.estimates()[k]);
  const auto f = a.fresh();
  for (int k = 0; k < 10; ++k) CHECK(f->estimates()[k].isZero());
}

TEST_CASE("noiseless single-agent LMS converges") {
  const Topology t(1, {});
  StrategyConfig cfg = make_atc(t, Mat::Identity(1, 1), 0.1);
  StrategyState st = StrategyState::initial(t, cfg, 4);
  std::mt19937_64 rng(8);
  const Vec w_opt = Vec::LinSpaced(4, -1.0, 1.0);
  std::normal_distribution<double> g;
  double prev = w_opt.squaredNorm();
  for (int block = 0; block < 10; ++block) {
    for (int i = 0; i < 1000; ++i) {
      Vec x(4);
      for (int j = 0; j < 4; ++j) x(j) = g(rng);
      diffusion_step(t, cfg, st, {sample(x, w_opt)});
    }
    const double cur = (st.w[0] - w_opt).squaredNorm();
    CHECK(cur <= prev);
    prev = cur;
  }
  CHECK(prev < 1e-20);
}

TEST_CASE("config validation") {
  const Topology t(3, {{0, 1}, {1, 2}});
  StrategyConfig cfg = make_atc(t, static_rule(t, StaticRule::averaging), 0.01);
  CHECK_NOTHROW(cfg.validate(t));
  StrategyConfig bad = cfg;
  bad.a2(0, 0) += 0.1;
  CHECK_THROWS_AS(bad.validate(t), ConfigError);
  bad = cfg;
  bad.mu(1) = -0.1;
  CHECK_THROWS_AS(bad.validate(t), ConfigError);
  bad = cfg;
  bad.a2_mode = A2Mode::adaptive_relative_variance;
  bad.tau = Vec::Constant(3, 1.5);
  CHECK_THROWS_AS(bad.validate(t), ConfigError);
  bad = cfg;
  bad.c = Mat::Identity(2, 2);
  CHECK_THROWS_AS(bad.validate(t), ConfigError);
}
