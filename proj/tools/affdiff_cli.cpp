#include "affdiff/harness.hpp"

#include "CLI11.hpp"

#include <cmath>
#include <cstdio>
#include <iostream>

using namespace affdiff;

namespace {

void print_theory_summary(const TheoryResult& r) {
  for (size_t s = 0; s < r.steady.size(); ++s) {
    const auto& st = r.steady[s];
    const auto& u = r.universality[s];
    std::printf("stage %zu: steady MSD %.4f dB (components %.4f / %.4f dB)\n", s + 1, 10 * std::log10(st.msd),
                10 * std::log10(st.msd1), 10 * std::log10(st.msd2));
    std::printf("stage %zu: steady EMSE %.4f dB (optimal coefficient %.4f dB, components %.4f / %.4f dB), "
                "universality %s (margin %.3g)\n",
                s + 1, 10 * std::log10(st.emse), 10 * std::log10(u.net), 10 * std::log10(u.net1),
                10 * std::log10(u.net2), u.indistinguishable ? "indistinguishable" : u.universal ? "holds" : "fails",
                u.margin);
  }
  for (const auto& b : r.stability) {
    std::printf("spectral radii %.6f / %.6f; power-normalized nu bounds %.6g (mean) %.6g (mean-square)\n", b.rho1,
                b.rho2, b.nu_mean_bound_pn, b.nu_ms_bound_pn);
    if (b.nu_mean_bound_sr.size() > 0)
      std::printf("sign-regressor nu bounds (min over agents) %.6g (mean) %.6g (mean-square)\n",
                  b.nu_mean_bound_sr.minCoeff(), b.nu_ms_bound_sr.minCoeff());
  }
}

int validate_cmd(const std::string& path) {
  const ExperimentConfig cfg = load_config(path);
  const GraphStats gs = stats(*cfg.topology);
  std::printf("%s: N=%d L=%d density=%.4f lambda2=%.6f diameter=%d\n", cfg.name.c_str(), gs.size, cfg.filter_len,
              gs.density, gs.lambda2, gs.diameter);
  for (size_t i = 0; i < cfg.components.size(); ++i) {
    const auto& c = cfg.components[i];
    const auto a1 = validate_stochastic(c.a1, *cfg.topology);
    const auto a2 = validate_stochastic(c.a2, *cfg.topology);
    const auto cc = validate_stochastic(c.c, *cfg.topology, StochasticRole::right);
    std::printf("component %zu: A1 dev %.2e, A2 dev %.2e, C dev %.2e, A2 doubly stochastic %s\n", i + 1,
                a1.max_sum_deviation, a2.max_sum_deviation, cc.max_sum_deviation,
                a2.doubly_stochastic ? "yes" : "no");
  }
  std::printf("valid\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Affine combinations of diffusion LMS strategies"};
  app.require_subcommand(1);

  std::string config, output, sim_path, theory_path;
  int workers = 0;
  CompareOptions copt;
  long window = 0;

  auto* sim = app.add_subcommand("simulate", "Monte Carlo simulation");
  sim->add_option("config", config, "experiment configuration")->required();
  sim->add_option("-o,--output", output, "output file (.csv or .json)")->required();
  sim->add_option("-w,--workers", workers, "worker threads (default: AFFDIFF_WORKERS or all cores)");

  auto* th = app.add_subcommand("theory", "theoretical prediction");
  th->add_option("config", config, "experiment configuration")->required();
  th->add_option("-o,--output", output, "output file (.csv or .json)")->required();

  auto* cmp = app.add_subcommand("compare", "compare simulation and theory series");
  cmp->add_option("sim", sim_path, "simulation result")->required();
  cmp->add_option("theory", theory_path, "theory result")->required();
  cmp->add_option("--tol-msd-db", copt.tol_msd_db, "tolerance for MSD/EMSE series in dB");
  cmp->add_option("--tol-gamma", copt.tol_gamma, "tolerance for coefficient series");
  cmp->add_option("--window", window, "steady window in steps (default: final 10% of each stage)");

  auto* val = app.add_subcommand("validate", "check a configuration");
  val->add_option("config", config, "experiment configuration")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*sim) {
      const ExperimentConfig cfg = load_config(config);
      export_table(run_monte_carlo(cfg, workers).filtered(cfg.outputs), output);
      return 0;
    }
    if (*th) {
      const ExperimentConfig cfg = load_config(config);
      const TheoryResult r = run_theory(cfg);
      export_table(r.series.filtered(cfg.outputs), output);
      print_theory_summary(r);
      return 0;
    }
    if (*cmp) {
      if (window > 0) copt.window = window;
      const auto rep = compare(read_table(sim_path), read_table(theory_path), copt);
      std::printf("%-16s %12s %12s  %s\n", "series", "max_dev", "steady_dev", "result");
      for (const auto& s : rep.series)
        std::printf("%-16s %12.5g %12.5g  %s%s\n", s.name.c_str(), s.max_dev, s.steady_dev, s.pass ? "pass" : "FAIL",
                    s.db ? " (dB)" : "");
      std::printf("%s\n", rep.pass ? "PASS" : "FAIL");
      return rep.pass ? 0 : 1;
    }
    return validate_cmd(config);
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return 2;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
