#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include <Eigen/SVD>

#include "ddelm/solvers.hpp"

using namespace ddelm;

namespace {

Eigen::MatrixXd random_matrix(int rows, int cols, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> n;
  Eigen::MatrixXd A(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) A(i, j) = n(gen);
  return A;
}

Eigen::MatrixXd svd_pinv(const Eigen::MatrixXd& A) {
  return A.completeOrthogonalDecomposition().pseudoInverse();
}

Workspace tiny_workspace(const SolverOptions& opts = {}) {
  return Workspace(make_problem("poisson_sinpi"), 2, 10, 64, 8.0, 1, opts);
}

}  // namespace

TEST_CASE("least-squares factor matches the dense pseudoinverse") {
  const Eigen::MatrixXd A = random_matrix(40, 12, 3);
  LsFactor fac(A, 1e-10);
  CHECK(!fac.rank_deficient());
  const Eigen::MatrixXd P = svd_pinv(A);

  std::mt19937_64 gen(4);
  std::normal_distribution<double> nd;
  for (int t = 0; t < 5; ++t) {
    Eigen::VectorXd v(40), u(12);
    for (int i = 0; i < 40; ++i) v(i) = nd(gen);
    for (int i = 0; i < 12; ++i) u(i) = nd(gen);
    CHECK((fac.apply_pinv(v) - P * v).norm() < 1e-12 * v.norm());
    CHECK((fac.apply_pinv_transpose(u) - P.transpose() * u).norm() < 1e-12 * u.norm());
    CHECK((fac.apply_matrix(u) - A * u).norm() < 1e-13 * (A * u).norm());
    // Adjoint identity <K+ v, u> = <v, (K+)^T u>.
    CHECK(fac.apply_pinv(v).dot(u) ==
          doctest::Approx(v.dot(fac.apply_pinv_transpose(u))).epsilon(1e-10));
  }
}

TEST_CASE("projection is symmetric, idempotent, and fixes the range") {
  const Eigen::MatrixXd A = random_matrix(30, 8, 7);
  LsFactor fac(A, 1e-10);
  std::mt19937_64 gen(8);
  std::normal_distribution<double> nd;
  for (int t = 0; t < 5; ++t) {
    Eigen::VectorXd v(30), w(30);
    for (int i = 0; i < 30; ++i) v(i) = nd(gen);
    for (int i = 0; i < 30; ++i) w(i) = nd(gen);
    const Eigen::VectorXd pv = fac.apply_projection(v);
    CHECK((fac.apply_projection(pv) - pv).norm() < 1e-12 * pv.norm());
    CHECK(pv.dot(w) == doctest::Approx(v.dot(fac.apply_projection(w))).epsilon(1e-12));
    // K K^+ v computed the long way agrees.
    CHECK((fac.apply_matrix(fac.apply_pinv(v)) - pv).norm() < 1e-10 * v.norm());
  }
  // Range vectors are fixed points.
  const Eigen::VectorXd r = A * Eigen::VectorXd::LinSpaced(8, -1, 1);
  CHECK((fac.apply_projection(r) - r).norm() < 1e-12 * r.norm());
}

TEST_CASE("rank-deficient matrices fall back to the pseudoinverse path") {
  Eigen::MatrixXd A = random_matrix(20, 6, 9);
  A.col(5) = A.col(0);  // exact deficiency
  LsFactor fac(A, 1e-10);
  CHECK(fac.rank_deficient());
  const Eigen::MatrixXd P = svd_pinv(A);
  const Eigen::VectorXd v = Eigen::VectorXd::LinSpaced(20, 0, 1);
  CHECK((fac.apply_pinv(v) - P * v).norm() < 1e-10 * v.norm());
  const Eigen::VectorXd pv = fac.apply_projection(v);
  CHECK((fac.apply_projection(pv) - pv).norm() < 1e-12 * pv.norm());
  CHECK((pv - A * (P * v)).norm() < 1e-10 * v.norm());
}

TEST_CASE("conjugate gradients on trivial spectra") {
  const int n = 50;
  auto identity = [](const Eigen::VectorXd& x) { return x; };
  Eigen::VectorXd rhs = Eigen::VectorXd::LinSpaced(n, 1, 2);
  CgResult r1 = cg(identity, rhs, 1e-12);
  CHECK(r1.converged);
  CHECK(r1.iterations == 1);
  CHECK((r1.x - rhs).norm() < 1e-12 * rhs.norm());

  // Operator with 3 distinct eigenvalues: CG terminates in at most 3 steps.
  Eigen::VectorXd d(n);
  for (int i = 0; i < n; ++i) d(i) = (i % 3 == 0) ? 1.0 : (i % 3 == 1 ? 4.0 : 9.0);
  auto diag = [&](const Eigen::VectorXd& x) { return (d.array() * x.array()).matrix(); };
  CgResult r2 = cg(diag, rhs, 1e-12);
  CHECK(r2.converged);
  CHECK(r2.iterations <= 3);
  CHECK((r2.x.array() - rhs.array() / d.array()).matrix().norm() < 1e-10);
  CHECK(r2.residual_history.size() == static_cast<size_t>(r2.iterations));
}

TEST_CASE("one-level reduced operator is symmetric positive semidefinite") {
  Workspace ws = tiny_workspace();
  const int n = ws.n_mu();
  std::mt19937_64 gen(11);
  std::normal_distribution<double> nd;
  for (int t = 0; t < 10; ++t) {
    Eigen::VectorXd u(n), v(n);
    for (int i = 0; i < n; ++i) u(i) = nd(gen);
    for (int i = 0; i < n; ++i) v(i) = nd(gen);
    const Eigen::VectorXd Au = ws.reduced_apply(u);
    const Eigen::VectorXd Av = ws.reduced_apply(v);
    const double scale = Au.norm() * v.norm() + u.norm() * Av.norm();
    CHECK(std::abs(Au.dot(v) - u.dot(Av)) < 1e-10 * scale);
    CHECK(u.dot(Au) > -1e-10 * u.squaredNorm());
  }
}

TEST_CASE("coarse operator agrees with the dense reference row by row") {
  Workspace ws = tiny_workspace();
  DenseOracle oracle = dense_oracle_solve(ws, Method::DdelmCs);
  ws.assemble_coarse();
  auto ident = [](const Eigen::VectorXd& x) { return x; };
  const int nd = ws.n_delta();
  std::mt19937_64 gen(13);
  std::normal_distribution<double> ndist;
  for (int t = 0; t < 4; ++t) {
    Eigen::VectorXd v(nd);
    for (int i = 0; i < nd; ++i) v(i) = ndist(gen);
    const Eigen::VectorXd lhs = ws.cs_reduced_apply(v, ident);
    const Eigen::VectorXd ref = oracle.reduced_op * v;
    CHECK((lhs - ref).norm() < 1e-8 * ref.norm());
  }
}

TEST_CASE("coarse-extended projector is idempotent") {
  Workspace ws = tiny_workspace();
  ws.assemble_coarse();
  std::mt19937_64 gen(17);
  std::normal_distribution<double> nd;
  LocalVecs phi = ws.zero_locals();
  for (auto& p : phi)
    for (int i = 0; i < p.size(); ++i) p(i) = nd(gen);
  Eigen::VectorXd psi(ws.n_pi_flux());
  for (int i = 0; i < psi.size(); ++i) psi(i) = nd(gen);

  Workspace::KtildeApply once = ws.apply_ktilde_pinv(phi, psi, true);
  Workspace::KtildeApply twice = ws.apply_ktilde_pinv(once.proj_top, once.proj_bottom, true);
  double num = 0, den = 0;
  for (int i = 0; i < ws.n_subs(); ++i) {
    num += (twice.proj_top[i] - once.proj_top[i]).squaredNorm();
    den += once.proj_top[i].squaredNorm();
  }
  num += (twice.proj_bottom - once.proj_bottom).squaredNorm();
  den += once.proj_bottom.squaredNorm();
  CHECK(std::sqrt(num / den) < 1e-10);
}

TEST_CASE("neumann map matches its dense columns and adjoint") {
  Workspace ws = tiny_workspace();
  ws.assemble_coarse();
  ws.build_neumann();
  const int nd = ws.n_delta();

  // Dense P by columns, then adjoint identity.
  Eigen::MatrixXd P(nd, nd);
  for (int j = 0; j < nd; ++j) P.col(j) = ws.apply_P(Eigen::VectorXd::Unit(nd, j));
  std::mt19937_64 gen(19);
  std::normal_distribution<double> ndist;
  for (int t = 0; t < 5; ++t) {
    Eigen::VectorXd u(nd), v(nd);
    for (int i = 0; i < nd; ++i) u(i) = ndist(gen);
    for (int i = 0; i < nd; ++i) v(i) = ndist(gen);
    CHECK((ws.apply_P(v) - P * v).norm() < 1e-10 * (P * v).norm());
    CHECK((ws.apply_PT(u) - P.transpose() * u).norm() < 1e-10 * (P.transpose() * u).norm());
  }
}

TEST_CASE("zero-weight acceleration reproduces the plain coarse solve bitwise") {
  Workspace ws = tiny_workspace();
  SolveReport cs = ddelm_cs_solve(ws);
  SolveReport nn = ddelm_nn_solve(ws, 0.0);
  CHECK(nn.iterations == cs.iterations);
  CHECK((nn.mu - cs.mu).cwiseAbs().maxCoeff() == 0.0);
  for (int i = 0; i < ws.n_subs(); ++i)
    CHECK((nn.coeffs[i] - cs.coeffs[i]).cwiseAbs().maxCoeff() == 0.0);

  CHECK_THROWS(ddelm_nn_solve(ws, -0.1));
  CHECK_THROWS(ddelm_nn_solve(ws, 1.5));
}

TEST_CASE("solutions satisfy interface continuity across subdomains") {
  Workspace ws = tiny_workspace();
  SolveReport rep = ddelm_solve(ws);
  CHECK(rep.converged);
  // The trace of each local expansion deviates from the interface value by
  // exactly the least-squares residual of that trace row; mismatched
  // numbering would blow this identity up to O(1).
  const LocalVecs bmu = ws.apply_B(rep.mu);
  for (int i : {0, 1}) {
    const LocalBlocks& b = ws.blocks[i];
    const Eigen::VectorXd residual = b.K * rep.coeffs[i] - (b.f - bmu[i]);
    for (int p = 0; p < b.n_gamma; ++p) {
      const GammaPoint& gp = ws.points.gamma_meta[i][p];
      if (gp.is_cross) continue;
      const int g = ws.idx.delta_index(gp.edge_id, 0, gp.t);
      std::vector<Eigen::Vector2d> pt{ws.points.interface[i][p]};
      const double v = (eval_derivative_matrix(ws.layers[i], pt, 0, 0) * rep.coeffs[i])(0);
      CHECK(std::abs(v - rep.mu(g) - residual(b.trace_row(0, p))) < 1e-10);
    }
  }
}
