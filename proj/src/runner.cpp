#include "ddelm/runner.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

#include "json.hpp"

namespace ddelm {

namespace {

using nlohmann::json;

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  std::istringstream is(value);
  T v{};
  std::string rest;
  if (!(is >> v) || (is >> rest))
    throw ConfigError("invalid value for '" + key + "': " + value);
  return v;
}

void set_key(RunConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "problem") cfg.problem = value;
  else if (key == "alpha") cfg.alpha = parse_number<double>(key, value);
  else if (key == "seed") cfg.seed = parse_number<std::uint64_t>(key, value);
  else if (key == "forcing_seed") cfg.forcing_seed = parse_number<std::uint64_t>(key, value);
  else if (key == "rho_seed") cfg.rho_seed = parse_number<std::uint64_t>(key, value);
  else if (key == "s") cfg.s = parse_number<int>(key, value);
  else if (key == "n_grid") cfg.n_grid = parse_number<int>(key, value);
  else if (key == "M") cfg.M = parse_number<int>(key, value);
  else if (key == "l") cfg.l = parse_number<double>(key, value);
  else if (key == "method") cfg.method = value;
  else if (key == "theta") cfg.theta = parse_number<double>(key, value);
  else if (key == "flux_variant") cfg.flux_variant = value;
  else if (key == "trace_basis") cfg.trace_basis = value;
  else if (key == "cg_rel_tol") cfg.cg_rel_tol = parse_number<double>(key, value);
  else if (key == "cg_max_iter") cfg.cg_max_iter = parse_number<int>(key, value);
  else if (key == "eval_grid_n") cfg.eval_grid_n = parse_number<int>(key, value);
  else if (key == "workers") cfg.workers = parse_number<int>(key, value);
  else if (key == "json_out") cfg.json_out = value;
  else if (key == "csv_out") cfg.csv_out = value;
  else if (key == "debug_flip_flux_row") cfg.debug_flip_flux_row = parse_number<int>(key, value);
  else throw ConfigError("unknown config key '" + key + "'");
}

SolverOptions solver_options(const RunConfig& cfg) {
  SolverOptions so;
  so.flux_variant =
      cfg.flux_variant == "mean_edge" ? FluxVariant::MeanEdge : FluxVariant::Pointwise;
  so.change_of_variables = cfg.trace_basis == "change_of_variables";
  so.workers = cfg.workers;
  so.debug_flip_flux_row = cfg.debug_flip_flux_row;
  return so;
}

SolveReport dispatch(Workspace& ws, const RunConfig& cfg, const CgOptions& cgo) {
  if (cfg.method == "ddelm") return ddelm_solve(ws, cgo);
  if (cfg.method == "ddelm-cs") return ddelm_cs_solve(ws, cgo);
  return ddelm_nn_solve(ws, cfg.theta, cgo);
}

}  // namespace

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  RunConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key=value");
    set_key(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

void apply_override(RunConfig& cfg, const std::string& kv) {
  const auto eq = kv.find('=');
  if (eq == std::string::npos) throw ConfigError("override must be key=value: " + kv);
  set_key(cfg, trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
}

void resolve_defaults(RunConfig& cfg) {
  if (cfg.method != "ddelm" && cfg.method != "ddelm-cs" && cfg.method != "ddelm-nn")
    throw ConfigError("unknown method '" + cfg.method + "'");
  if (cfg.theta < 0 || cfg.theta > 1) throw ConfigError("theta must lie in [0, 1]");
  if (cfg.s < 1 || cfg.n_grid < 3 || cfg.M < 1) throw ConfigError("invalid s / n_grid / M");
  if (!cfg.flux_variant.empty() && cfg.flux_variant != "pointwise" &&
      cfg.flux_variant != "mean_edge")
    throw ConfigError("flux_variant must be pointwise or mean_edge");
  if (!cfg.trace_basis.empty() && cfg.trace_basis != "nodal" &&
      cfg.trace_basis != "change_of_variables")
    throw ConfigError("trace_basis must be nodal or change_of_variables");
  const bool coarse = cfg.method != "ddelm";
  if (cfg.flux_variant.empty()) cfg.flux_variant = coarse ? "mean_edge" : "pointwise";
  if (cfg.trace_basis.empty()) cfg.trace_basis = coarse ? "change_of_variables" : "nodal";
  if (cfg.l <= 0) {
    try {
      cfg.l = make_problem(cfg.problem).default_l;
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
}

RunOutcome run(const RunConfig& cfg_in) {
  RunOutcome out;
  out.config = cfg_in;
  resolve_defaults(out.config);
  const RunConfig& c = out.config;

  const auto t0 = std::chrono::steady_clock::now();
  ProblemSpec prob;
  try {
    prob = make_problem(c.problem, {c.alpha, c.forcing_seed, c.rho_seed});
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  Workspace ws(prob, c.s, c.n_grid, c.M, c.l, c.seed, solver_options(c));
  out.report = dispatch(ws, c, CgOptions{c.cg_rel_tol, c.cg_max_iter});
  out.assembly_seconds = ws.assembly_seconds;
  out.factorization_seconds = ws.factorization_seconds;

  ElmField field{ws.part, ws.layers, out.report.coeffs};
  ErrorReport err = prob.has_exact()
                        ? relative_errors(field, prob.exact, prob.exact_grad, c.eval_grid_n)
                        : relative_errors(field, fd_reference(prob, c.eval_grid_n));
  out.errors = err;
  out.report.rel_l2 = err.l2;
  out.report.rel_h1 = err.h1;
  out.total_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  persist(out);
  return out;
}

std::vector<RunOutcome> run_ablation(const RunConfig& base, const std::string& preset) {
  std::vector<RunOutcome> outs;
  if (preset == "table1") {
    const std::pair<const char*, const char*> combos[] = {
        {"nodal", "pointwise"},
        {"change_of_variables", "pointwise"},
        {"nodal", "mean_edge"},
        {"change_of_variables", "mean_edge"}};
    for (const auto& [trace, flux] : combos)
      for (const char* method : {"ddelm-cs", "ddelm-nn"}) {
        RunConfig cfg = base;
        cfg.trace_basis = trace;
        cfg.flux_variant = flux;
        cfg.method = method;
        outs.push_back(run(cfg));
      }
  } else if (preset == "table2") {
    for (double theta : {0.0, 0.5, 0.9, 0.99, 0.999, 0.9999, 1.0}) {
      RunConfig cfg = base;
      cfg.method = "ddelm-nn";
      cfg.theta = theta;
      outs.push_back(run(cfg));
    }
  } else {
    throw ConfigError("unknown ablation preset '" + preset + "'");
  }
  return outs;
}

std::string csv_header() { return "method,s,M,theta,flux_variant,trace_basis,l2,h1,iters,seconds,seed"; }

std::string csv_row(const RunOutcome& out) {
  const RunConfig& c = out.config;
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%s,%d,%d,%g,%s,%s,%.6e,%.6e,%d,%.3f,%llu",
                c.method.c_str(), c.s, c.M, c.theta, c.flux_variant.c_str(),
                c.trace_basis.c_str(), out.report.rel_l2, out.report.rel_h1,
                out.report.iterations, out.total_seconds,
                static_cast<unsigned long long>(c.seed));
  return buf;
}

std::string json_report(const RunOutcome& out) {
  const RunConfig& c = out.config;
  json j;
  j["config"] = {{"problem", c.problem},
                 {"alpha", c.alpha},
                 {"seed", c.seed},
                 {"forcing_seed", c.forcing_seed},
                 {"rho_seed", c.rho_seed},
                 {"s", c.s},
                 {"n_grid", c.n_grid},
                 {"M", c.M},
                 {"l", c.l},
                 {"method", c.method},
                 {"theta", c.theta},
                 {"flux_variant", c.flux_variant},
                 {"trace_basis", c.trace_basis},
                 {"cg_rel_tol", c.cg_rel_tol},
                 {"cg_max_iter", c.cg_max_iter},
                 {"eval_grid_n", c.eval_grid_n},
                 {"workers", c.workers}};
  j["iterations"] = out.report.iterations;
  j["converged"] = out.report.converged;
  j["residual_history"] = out.report.residual_history;
  j["errors"] = {{"l2", out.errors.l2},
                 {"h1", out.errors.h1},
                 {"grid_n", out.errors.grid_n},
                 {"reference", out.errors.reference}};
  j["timings"] = {{"assembly", out.assembly_seconds},
                  {"factorization", out.factorization_seconds},
                  {"setup", out.report.setup_seconds},
                  {"cg", out.report.cg_seconds},
                  {"reconstruction", out.report.reconstruct_seconds},
                  {"total", out.total_seconds}};
  return j.dump(2);
}

void persist(const RunOutcome& out) {
  if (!out.config.json_out.empty()) {
    std::ofstream f(out.config.json_out);
    if (!f) throw ConfigError("cannot write JSON report: " + out.config.json_out);
    f << json_report(out) << "\n";
  }
  if (!out.config.csv_out.empty()) {
    namespace fs = std::filesystem;
    const bool fresh =
        !fs::exists(out.config.csv_out) || fs::file_size(out.config.csv_out) == 0;
    std::ofstream f(out.config.csv_out, std::ios::app);
    if (!f) throw ConfigError("cannot write CSV: " + out.config.csv_out);
    if (fresh) f << csv_header() << "\n";
    f << csv_row(out) << "\n";
  }
}

OracleCheckReport oracle_check(const RunConfig& cfg_in) {
  RunConfig c = cfg_in;
  resolve_defaults(c);
  ProblemSpec prob = make_problem(c.problem, {c.alpha, c.forcing_seed, c.rho_seed});
  Workspace ws(prob, c.s, c.n_grid, c.M, c.l, c.seed, solver_options(c));

  SolveReport rep = dispatch(ws, c, CgOptions{1e-12, 0});
  const Method m = c.method == "ddelm" ? Method::Ddelm
                   : c.method == "ddelm-cs" ? Method::DdelmCs
                                            : Method::DdelmNn;
  DenseOracle oracle = dense_oracle_solve(ws, m, c.theta);

  OracleCheckReport r;
  const double mu_norm = oracle.mu_full.norm();
  r.mu_diff = mu_norm > 0 ? (rep.mu - oracle.mu_full).norm() / mu_norm
                          : (rep.mu - oracle.mu_full).norm();

  ElmField fd_field{ws.part, ws.layers, rep.coeffs};
  ElmField fo{ws.part, ws.layers, oracle.coeffs};
  r.field_diff = relative_errors(
                     fd_field,
                     [&fo](const Eigen::Vector2d& x) { return fo.value(x); },
                     [&fo](const Eigen::Vector2d& x) {
                       double u;
                       Eigen::Vector2d g;
                       fo.value_and_gradient(x, u, g);
                       return g;
                     },
                     65)
                     .l2;

  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> opfn;
  if (m == Method::Ddelm) {
    opfn = [&ws](const Eigen::VectorXd& v) { return ws.reduced_apply(v); };
  } else {
    ws.assemble_coarse();
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> weight =
        [](const Eigen::VectorXd& x) { return x; };
    if (m == Method::DdelmNn && c.theta > 0) {
      ws.build_neumann();
      const double theta = c.theta;
      weight = [&ws, theta](const Eigen::VectorXd& x) -> Eigen::VectorXd {
        Eigen::VectorXd w = theta * ws.apply_PT(ws.apply_P(x));
        if (theta < 1.0) w += (1.0 - theta) * x;
        return w;
      };
    }
    opfn = [&ws, weight](const Eigen::VectorXd& v) { return ws.cs_reduced_apply(v, weight); };
  }
  const int dim = static_cast<int>(oracle.reduced_op.cols());
  for (int j = 0; j < dim; ++j) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(dim);
    e(j) = 1.0;
    const Eigen::VectorXd diff = opfn(e) - oracle.reduced_op.col(j);
    int row;
    const double m_abs = diff.cwiseAbs().maxCoeff(&row);
    if (m_abs > r.op_diff) {
      r.op_diff = m_abs;
      r.op_row = row;
      r.op_col = j;
    }
  }
  r.pass = r.mu_diff < 1e-6 && r.field_diff < 1e-6 && r.op_diff < 1e-6;
  return r;
}

GrfStatsReport grf_stats(double alpha, int n_seeds) {
  if (n_seeds < 2) throw ConfigError("grf_stats: need at least 2 seeds");
  constexpr int kSide = 8;
  std::vector<Eigen::Vector2d> pts;
  for (int b = 0; b < kSide; ++b)
    for (int a = 0; a < kSide; ++a)
      pts.emplace_back((a + 0.5) / kSide, (b + 0.5) / kSide);

  Eigen::VectorXd sum = Eigen::VectorXd::Zero(pts.size());
  Eigen::VectorXd sumsq = Eigen::VectorXd::Zero(pts.size());
  for (int k = 0; k < n_seeds; ++k) {
    const GrfField g = sample_grf(alpha, static_cast<std::uint64_t>(k));
    for (size_t p = 0; p < pts.size(); ++p) {
      const double v = eval_grf(g, pts[p]);
      sum(p) += v;
      sumsq(p) += v * v;
    }
  }
  double pooled = 0;
  for (size_t p = 0; p < pts.size(); ++p) {
    const double mean = sum(p) / n_seeds;
    pooled += (sumsq(p) - n_seeds * mean * mean) / (n_seeds - 1);
  }
  GrfStatsReport r;
  r.alpha = alpha;
  r.n_seeds = n_seeds;
  r.variance = pooled / static_cast<double>(pts.size());
  r.expected = alpha * alpha * alpha * alpha / 2.0;
  r.rel_deviation = std::abs(r.variance - r.expected) / r.expected;
  return r;
}

}  // namespace ddelm
