#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/QR>

#include "ddelm/assembly.hpp"
#include "ddelm/geometry.hpp"
#include "ddelm/problems.hpp"

namespace ddelm {

/// Least-squares factorization of a tall local matrix K. QR with a thin Q is
/// the fast path; a rank-revealing complete orthogonal decomposition takes
/// over when the R diagonal signals rank deficiency.
class LsFactor {
 public:
  LsFactor() = default;
  LsFactor(const Eigen::MatrixXd& K, double rank_tol);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  bool rank_deficient() const { return deficient_; }

  Eigen::VectorXd apply_pinv(const Eigen::VectorXd& v) const;            // K^+ v
  Eigen::VectorXd apply_pinv_transpose(const Eigen::VectorXd& v) const;  // (K^+)^T v
  Eigen::VectorXd apply_matrix(const Eigen::VectorXd& x) const;          // K x
  Eigen::MatrixXd apply_pinv(const Eigen::MatrixXd& V) const;
  Eigen::MatrixXd apply_matrix(const Eigen::MatrixXd& X) const;
  /// K K^+ v through the orthogonal factor (Q Q^T v); exact projector
  /// regardless of the conditioning of K.
  Eigen::VectorXd apply_projection(const Eigen::VectorXd& v) const;
  Eigen::MatrixXd apply_projection(const Eigen::MatrixXd& V) const;

 private:
  int rows_ = 0, cols_ = 0;
  bool deficient_ = false;
  Eigen::MatrixXd Q_;  // rows x rank, orthonormal columns spanning range(K)
  Eigen::MatrixXd R_;  // cols x cols, upper triangular (full-rank path)
  Eigen::MatrixXd K_;     // kept only on the deficient path
  Eigen::MatrixXd pinv_;  // dense pseudoinverse, deficient path only
};

struct SolverOptions {
  FluxVariant flux_variant = FluxVariant::Pointwise;
  bool change_of_variables = false;
  double rank_tol = 1e-10;
  int workers = 1;
  // Negates one global row of the forward flux apply (not the adjoint) in
  // the iterative drivers, leaving the dense reference intact. Validation
  // hook: a corrupted sign must surface in the oracle comparison.
  int debug_flip_flux_row = -1;
};

struct CgResult {
  Eigen::VectorXd x;
  int iterations = 0;
  bool converged = false;
  bool negative_curvature = false;
  std::vector<double> residual_history;  // relative residual after each step
};

/// Conjugate gradients on an SPD operator. max_iter <= 0 means 20x the
/// number of unknowns.
CgResult cg(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& op,
            const Eigen::VectorXd& rhs, double rel_tol = 1e-9, int max_iter = 0);

using LocalVecs = std::vector<Eigen::VectorXd>;

/// Everything assembled once per (problem, decomposition, features, options)
/// combination: local blocks, factorizations, interface bookkeeping, and the
/// lazily built coarse and Neumann layers. Reused across solves.
struct Workspace {
  Workspace(const ProblemSpec& problem, int s, int n_grid, int M, double l,
            std::uint64_t seed, const SolverOptions& opts);

  ProblemSpec problem;
  SolverOptions opts;
  DomainPartition part;
  PointSets points;
  InterfaceIndex idx;
  FluxBlocks flux;
  std::vector<FeatureLayer> layers;
  std::vector<LocalBlocks> blocks;
  std::vector<LsFactor> fac;
  double assembly_seconds = 0, factorization_seconds = 0;

  int n_subs() const { return part.n_subdomains(); }
  int n_mu() const { return idx.n_mu(); }
  int n_delta() const { return idx.n_delta; }
  int n_pi() const { return idx.n_pi; }
  int n_pi_flux() const { return flux.n_flux - idx.n_delta; }

  // Per subdomain: (local trace row, global mu index) for Delta resp. Pi
  // components; Pi pairs store the index shifted by -n_delta.
  std::vector<std::vector<std::pair<int, int>>> delta_rows, pi_rows;

  LocalVecs zero_locals() const;  // one zero vector of rows() per subdomain
  LocalVecs apply_B(const Eigen::VectorXd& mu) const;
  LocalVecs apply_B_delta(const Eigen::VectorXd& v) const;
  Eigen::VectorXd apply_BT(const LocalVecs& x) const;
  Eigen::VectorXd apply_BT_delta(const LocalVecs& x) const;
  Eigen::VectorXd apply_A(const LocalVecs& c) const;        // all flux rows
  Eigen::VectorXd apply_A_delta(const LocalVecs& c) const;  // Delta rows only
  LocalVecs apply_AT(const Eigen::VectorXd& w) const;        // per-sub coefficient vectors
  LocalVecs apply_AT_delta(const Eigen::VectorXd& w) const;

  /// Row of the concatenated local flux blocks.
  Eigen::RowVectorXd flux_row(int i, int lrow) const;

  /// Schur operator of the one-level method on the full mu vector.
  Eigen::VectorXd reduced_apply(const Eigen::VectorXd& mu) const;

  // ---- coarse layer ----
  bool coarse_built = false;
  Eigen::MatrixXd Dpp;   // n_pi_flux x n_pi
  Eigen::MatrixXd Dpd;   // n_pi_flux x n_delta
  Eigen::VectorXd dpi;   // n_pi_flux
  Eigen::MatrixXd Spi;   // n_pi x n_pi coarse Schur matrix
  Eigen::LLT<Eigen::MatrixXd> Spi_llt;
  std::vector<Eigen::MatrixXd> Ypi;  // per sub: K^+ B_Pi columns, M x n_pi
  std::vector<Eigen::MatrixXd> Gpi;  // per sub: K K^+ B_Pi, rows x n_pi

  void assemble_coarse();

  struct KtildeApply {
    LocalVecs c;                // coefficient part
    Eigen::VectorXd mu_pi;      // n_pi
    LocalVecs proj_top;         // Ktilde Ktilde^+ [phi; psi], top blocks
    Eigen::VectorXd proj_bottom;
  };
  KtildeApply apply_ktilde_pinv(const LocalVecs& phi, const Eigen::VectorXd& psi,
                                bool want_projection) const;
  /// (Ktilde^+)^T applied to a vector supported on the coefficient block.
  std::pair<LocalVecs, Eigen::VectorXd> apply_ktilde_pinv_transpose(const LocalVecs& phi) const;

  /// Schur operator of the coarse-space method on mu_Delta; weight maps the
  /// flux residual before the adjoint (identity for the plain coarse method).
  Eigen::VectorXd cs_reduced_apply(
      const Eigen::VectorXd& v,
      const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& weight) const;

  // ---- Neumann layer ----
  bool neumann_built = false;
  std::vector<Eigen::MatrixXd> Kbar;       // per sub, kept for the dense reference
  std::vector<LsFactor> nfac;
  std::vector<Eigen::MatrixXd> Cdelta;     // nodal trace rows at local Delta points
  std::vector<std::vector<int>> ndelta_map;  // local Delta flux/trace row -> global Delta index
  std::vector<int> nflux_row0;             // offset of the flux rows inside Kbar
  double neumann_seconds = 0;

  void build_neumann();
  Eigen::VectorXd apply_P(const Eigen::VectorXd& v) const;   // Neumann-to-Dirichlet map
  Eigen::VectorXd apply_PT(const Eigen::VectorXd& u) const;
};

struct SolveReport {
  std::vector<Eigen::VectorXd> coeffs;  // per subdomain
  Eigen::VectorXd mu;                   // global ordering, Delta then Pi
  Eigen::VectorXd mu_delta, mu_pi;
  int iterations = 0;
  bool converged = true;
  std::vector<double> residual_history;
  double rel_l2 = -1, rel_h1 = -1;  // filled by the runner
  double setup_seconds = 0, cg_seconds = 0, reconstruct_seconds = 0;
};

struct CgOptions {
  double rel_tol = 1e-9;
  int max_iter = 0;  // <= 0: 20x unknowns
};

SolveReport ddelm_solve(Workspace& ws, const CgOptions& cg_opts = {});
SolveReport ddelm_cs_solve(Workspace& ws, const CgOptions& cg_opts = {});
/// theta = 0 falls back to the plain coarse method bit for bit.
SolveReport ddelm_nn_solve(Workspace& ws, double theta, const CgOptions& cg_opts = {});

enum class Method { Ddelm, DdelmCs, DdelmNn };

/// Dense brute-force reference built from explicit block matrices and
/// pseudoinverses. Guarded to small systems.
struct DenseOracle {
  Eigen::MatrixXd reduced_op;     // dense Schur operator
  Eigen::VectorXd reduced_rhs;
  Eigen::VectorXd mu_reduced;     // full mu (one-level) or mu_Delta
  Eigen::VectorXd mu_full;        // global ordering, Delta then Pi
  std::vector<Eigen::VectorXd> coeffs;
};

DenseOracle dense_oracle_solve(Workspace& ws, Method method, double theta = 0.999);

}  // namespace ddelm
