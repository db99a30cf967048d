#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "ddelm/runner.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitNoConvergence = 2;
constexpr int kExitConfigError = 3;

ddelm::RunConfig build_config(const std::string& config_path,
                              const std::vector<std::string>& overrides) {
  ddelm::RunConfig cfg;
  if (!config_path.empty()) cfg = ddelm::load_config(config_path);
  for (const auto& kv : overrides) ddelm::apply_override(cfg, kv);
  return cfg;
}

void print_outcome(const ddelm::RunOutcome& out) {
  std::printf("%s\n%s\n", ddelm::csv_header().c_str(), ddelm::csv_row(out).c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Domain-decomposition random-feature PDE solver"};
  app.require_subcommand(1);
  app.fallthrough();  // parent-level --config/--set may follow the subcommand

  std::string config_path;
  std::vector<std::string> overrides;
  app.add_option("--config", config_path, "flat key=value config file")
      ->check(CLI::ExistingFile);
  app.add_option("--set", overrides, "config override key=value (repeatable)");

  auto* solve = app.add_subcommand("solve", "run one experiment");
  std::string preset;
  auto* ablation = app.add_subcommand("ablation", "run a preset sweep (table1, table2)");
  ablation->add_option("preset", preset, "preset name")->required();
  auto* oracle = app.add_subcommand("oracle-check",
                                    "compare the iterative driver against the dense reference");
  auto* grf = app.add_subcommand("grf-stats", "random-field variance statistics");
  double alpha = 32.0;
  int n_seeds = 500;
  grf->add_option("--alpha", alpha, "roughness parameter");
  grf->add_option("--seeds", n_seeds, "number of seeds");

  CLI11_PARSE(app, argc, argv);

  try {
    if (solve->parsed()) {
      const ddelm::RunOutcome out = ddelm::run(build_config(config_path, overrides));
      print_outcome(out);
      return out.report.converged ? kExitOk : kExitNoConvergence;
    }
    if (ablation->parsed()) {
      const auto outs = ddelm::run_ablation(build_config(config_path, overrides), preset);
      std::printf("%s\n", ddelm::csv_header().c_str());
      bool all_converged = true;
      for (const auto& out : outs) {
        std::printf("%s\n", ddelm::csv_row(out).c_str());
        all_converged = all_converged && out.report.converged;
      }
      return all_converged ? kExitOk : kExitNoConvergence;
    }
    if (oracle->parsed()) {
      const ddelm::OracleCheckReport r =
          ddelm::oracle_check(build_config(config_path, overrides));
      std::printf("mu_diff=%.3e field_diff=%.3e op_diff=%.3e (row=%d col=%d) -> %s\n",
                  r.mu_diff, r.field_diff, r.op_diff, r.op_row, r.op_col,
                  r.pass ? "pass" : "FAIL");
      return r.pass ? kExitOk : kExitNoConvergence;
    }
    if (grf->parsed()) {
      const ddelm::GrfStatsReport r = ddelm::grf_stats(alpha, n_seeds);
      std::printf("alpha=%g seeds=%d variance=%.6e expected=%.6e rel_deviation=%.4f\n",
                  r.alpha, r.n_seeds, r.variance, r.expected, r.rel_deviation);
      return kExitOk;
    }
  } catch (const ddelm::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfigError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitNoConvergence;
  }
  return kExitConfigError;
}
