#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ddelm/metrics.hpp"
#include "ddelm/solvers.hpp"

namespace ddelm {

/// One experiment. Unset l / flux_variant / trace_basis fall back to the
/// problem resp. method defaults when the run starts.
struct RunConfig {
  std::string problem = "poisson_sinpi";
  double alpha = 32.0;
  std::uint64_t seed = 1;          // feature layer seed (per-subdomain offset added)
  std::uint64_t forcing_seed = 2;  // GRF forcing
  std::uint64_t rho_seed = 3;      // GRF coefficient field
  int s = 2;
  int n_grid = 10;                 // collocation points per direction per subdomain
  int M = 64;                      // neurons per subdomain
  double l = 0;                    // weight scale; 0 = problem default
  std::string method = "ddelm";    // ddelm | ddelm-cs | ddelm-nn
  double theta = 0.999;
  std::string flux_variant;        // pointwise | mean_edge; empty = method default
  std::string trace_basis;         // nodal | change_of_variables; empty = method default
  double cg_rel_tol = 1e-9;
  int cg_max_iter = 0;             // <= 0: 20x unknowns
  int eval_grid_n = 257;
  int workers = 1;
  std::string json_out;            // empty: no JSON report
  std::string csv_out;             // empty: no CSV row
  int debug_flip_flux_row = -1;    // validation hook, see SolverOptions
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

RunConfig load_config(const std::string& path);
/// Applies one "key=value" override in the config-file syntax.
void apply_override(RunConfig& cfg, const std::string& kv);
/// Fills the empty/zero fields from problem and method defaults.
void resolve_defaults(RunConfig& cfg);

struct RunOutcome {
  RunConfig config;  // with defaults resolved
  SolveReport report;
  ErrorReport errors;
  double total_seconds = 0;
  double assembly_seconds = 0, factorization_seconds = 0;
};

RunOutcome run(const RunConfig& cfg);
/// Presets: "table1" (component combinations x {cs, nn}), "table2" (theta sweep).
std::vector<RunOutcome> run_ablation(const RunConfig& base, const std::string& preset);

std::string csv_header();
std::string csv_row(const RunOutcome& out);
std::string json_report(const RunOutcome& out);
void persist(const RunOutcome& out);  // honors json_out / csv_out

struct OracleCheckReport {
  double mu_diff = 0;     // relative interface-variable difference
  double field_diff = 0;  // relative L2 field difference on the evaluation grid
  double op_diff = 0;     // max-abs entry difference of the reduced operator
  int op_row = -1, op_col = -1;  // location of the operator max-abs difference
  bool pass = false;
};

OracleCheckReport oracle_check(const RunConfig& cfg);

struct GrfStatsReport {
  double alpha = 0;
  int n_seeds = 0;
  double variance = 0;       // pooled pointwise sample variance
  double expected = 0;       // alpha^4 / 2
  double rel_deviation = 0;  // |variance - expected| / expected
};

GrfStatsReport grf_stats(double alpha, int n_seeds);

}  // namespace ddelm
