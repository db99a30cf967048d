#include "ddelm/solvers.hpp"

#include <chrono>
#include <cmath>
#include <map>
#include <stdexcept>

#include <Eigen/Dense>

#include "ddelm/parallel.hpp"

namespace ddelm {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

// ---------------------------------------------------------------- LsFactor

LsFactor::LsFactor(const Eigen::MatrixXd& K, double rank_tol)
    : rows_(static_cast<int>(K.rows())), cols_(static_cast<int>(K.cols())) {
  if (rows_ < cols_) throw std::invalid_argument("LsFactor: matrix must be square or tall");
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(K);
  Eigen::MatrixXd R =
      qr.matrixQR().topRows(cols_).triangularView<Eigen::Upper>();
  const double dmax = R.diagonal().cwiseAbs().maxCoeff();
  const double dmin = R.diagonal().cwiseAbs().minCoeff();
  if (!(dmax > 0) || dmin < rank_tol * dmax) {
    deficient_ = true;
    K_ = K;
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod;
    cod.setThreshold(rank_tol);
    cod.compute(K);
    pinv_ = cod.pseudoInverse();
    Q_ = cod.householderQ() *
         Eigen::MatrixXd::Identity(rows_, static_cast<int>(cod.rank()));
    return;
  }
  R_ = std::move(R);
  Q_ = qr.householderQ() * Eigen::MatrixXd::Identity(rows_, cols_);
}

Eigen::VectorXd LsFactor::apply_pinv(const Eigen::VectorXd& v) const {
  if (deficient_) return pinv_ * v;
  return R_.triangularView<Eigen::Upper>().solve(Q_.transpose() * v);
}

Eigen::VectorXd LsFactor::apply_pinv_transpose(const Eigen::VectorXd& v) const {
  if (deficient_) return pinv_.transpose() * v;
  return Q_ * R_.transpose().triangularView<Eigen::Lower>().solve(v);
}

Eigen::VectorXd LsFactor::apply_matrix(const Eigen::VectorXd& x) const {
  if (deficient_) return K_ * x;
  return Q_ * (R_.triangularView<Eigen::Upper>() * x);
}

Eigen::MatrixXd LsFactor::apply_pinv(const Eigen::MatrixXd& V) const {
  if (deficient_) return pinv_ * V;
  return R_.triangularView<Eigen::Upper>().solve(Q_.transpose() * V);
}

Eigen::MatrixXd LsFactor::apply_matrix(const Eigen::MatrixXd& X) const {
  if (deficient_) return K_ * X;
  return Q_ * (R_.triangularView<Eigen::Upper>() * X);
}

Eigen::VectorXd LsFactor::apply_projection(const Eigen::VectorXd& v) const {
  return Q_ * (Q_.transpose() * v);
}

Eigen::MatrixXd LsFactor::apply_projection(const Eigen::MatrixXd& V) const {
  return Q_ * (Q_.transpose() * V);
}

// ---------------------------------------------------------------------- CG

CgResult cg(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& op,
            const Eigen::VectorXd& rhs, double rel_tol, int max_iter) {
  const int n = static_cast<int>(rhs.size());
  if (max_iter <= 0) max_iter = 20 * n;
  CgResult res;
  res.x = Eigen::VectorXd::Zero(n);
  const double bnorm = rhs.norm();
  if (bnorm == 0.0) {
    res.converged = true;
    return res;
  }
  Eigen::VectorXd r = rhs, p = rhs;
  double rr = r.squaredNorm();
  for (int it = 1; it <= max_iter; ++it) {
    Eigen::VectorXd Ap = op(p);
    const double pAp = p.dot(Ap);
    if (pAp <= 0.0) {
      // Operator is not positive definite along p; stop rather than diverge.
      res.negative_curvature = pAp < 0.0;
      res.iterations = it - 1;
      return res;
    }
    const double alpha = rr / pAp;
    res.x += alpha * p;
    r -= alpha * Ap;
    const double rr_new = r.squaredNorm();
    const double rel = std::sqrt(rr_new) / bnorm;
    res.residual_history.push_back(rel);
    res.iterations = it;
    if (rel <= rel_tol) {
      res.converged = true;
      return res;
    }
    p = r + (rr_new / rr) * p;
    rr = rr_new;
  }
  return res;
}

// --------------------------------------------------------------- Workspace

Workspace::Workspace(const ProblemSpec& problem_in, int s, int n_grid, int M, double l,
                     std::uint64_t seed, const SolverOptions& opts_in)
    : problem(problem_in), opts(opts_in), part(partition_domain(s, n_grid)) {
  const auto t0 = std::chrono::steady_clock::now();
  points = classify_points(part);
  idx = build_interface_index(part, points, problem.components);
  flux = build_flux(part, points, idx, opts.flux_variant);

  const int N = n_subs();
  layers.resize(N);
  blocks.resize(N);
  for (int i = 0; i < N; ++i) {
    const Box& box = part.boxes[i];
    layers[i] = init_layer(M, box, l, box.diam() / 2.0, seed + static_cast<std::uint64_t>(i));
  }
  parallel_for(N, opts.workers, [&](int i) {
    blocks[i] = assemble_local(problem, layers[i], points, i);
    if (opts.change_of_variables) {
      Transition t = build_subdomain_transition(points.local_edges[i], blocks[i].n_gamma,
                                                part.n_grid);
      apply_change_of_variables(blocks[i], t);
    }
  });
  assembly_seconds = seconds_since(t0);

  const auto t1 = std::chrono::steady_clock::now();
  fac.resize(N);
  parallel_for(N, opts.workers, [&](int i) { fac[i] = LsFactor(blocks[i].K, opts.rank_tol); });
  factorization_seconds = seconds_since(t1);

  delta_rows.resize(N);
  pi_rows.resize(N);
  for (int i = 0; i < N; ++i) {
    const int ng = blocks[i].n_gamma;
    for (int c = 0; c < idx.cc; ++c)
      for (int p = 0; p < ng; ++p) {
        const int g = idx.local_to_global[i][c * ng + p];
        const int lr = blocks[i].trace_row(c, p);
        if (idx.is_pi[g])
          pi_rows[i].push_back({lr, g - idx.n_delta});
        else
          delta_rows[i].push_back({lr, g});
      }
  }
}

LocalVecs Workspace::zero_locals() const {
  LocalVecs v(n_subs());
  for (int i = 0; i < n_subs(); ++i) v[i] = Eigen::VectorXd::Zero(blocks[i].rows());
  return v;
}

LocalVecs Workspace::apply_B(const Eigen::VectorXd& mu) const {
  LocalVecs out = zero_locals();
  for (int i = 0; i < n_subs(); ++i) {
    for (auto [lr, g] : delta_rows[i]) out[i](lr) = -mu(g);
    for (auto [lr, gp] : pi_rows[i]) out[i](lr) = -mu(idx.n_delta + gp);
  }
  return out;
}

LocalVecs Workspace::apply_B_delta(const Eigen::VectorXd& v) const {
  LocalVecs out = zero_locals();
  for (int i = 0; i < n_subs(); ++i)
    for (auto [lr, g] : delta_rows[i]) out[i](lr) = -v(g);
  return out;
}

Eigen::VectorXd Workspace::apply_BT(const LocalVecs& x) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n_mu());
  for (int i = 0; i < n_subs(); ++i) {
    for (auto [lr, g] : delta_rows[i]) out(g) -= x[i](lr);
    for (auto [lr, gp] : pi_rows[i]) out(idx.n_delta + gp) -= x[i](lr);
  }
  return out;
}

Eigen::VectorXd Workspace::apply_BT_delta(const LocalVecs& x) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(idx.n_delta);
  for (int i = 0; i < n_subs(); ++i)
    for (auto [lr, g] : delta_rows[i]) out(g) -= x[i](lr);
  return out;
}

Eigen::VectorXd Workspace::apply_A(const LocalVecs& c) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(flux.n_flux);
  for (int i = 0; i < n_subs(); ++i) {
    // Flux values of every local edge row for this coefficient vector.
    int total = 0;
    for (const auto& F : blocks[i].F_edges) total += static_cast<int>(F.rows());
    Eigen::VectorXd vals(total);
    int off = 0;
    for (const auto& F : blocks[i].F_edges) {
      vals.segment(off, F.rows()) = F * c[i];
      off += static_cast<int>(F.rows());
    }
    for (const auto& e : flux.scatter[i]) out(e.grow) += e.weight * vals(e.lrow);
  }
  if (opts.debug_flip_flux_row >= 0 && opts.debug_flip_flux_row < flux.n_flux)
    out(opts.debug_flip_flux_row) = -out(opts.debug_flip_flux_row);
  return out;
}

Eigen::VectorXd Workspace::apply_A_delta(const LocalVecs& c) const {
  return apply_A(c).head(idx.n_delta);
}

LocalVecs Workspace::apply_AT(const Eigen::VectorXd& w) const {
  LocalVecs out(n_subs());
  for (int i = 0; i < n_subs(); ++i) {
    int total = 0;
    for (const auto& F : blocks[i].F_edges) total += static_cast<int>(F.rows());
    Eigen::VectorXd a = Eigen::VectorXd::Zero(total);
    for (const auto& e : flux.scatter[i]) a(e.lrow) += e.weight * w(e.grow);
    out[i] = Eigen::VectorXd::Zero(layers[i].M);
    int off = 0;
    for (const auto& F : blocks[i].F_edges) {
      out[i].noalias() += F.transpose() * a.segment(off, F.rows());
      off += static_cast<int>(F.rows());
    }
  }
  return out;
}

LocalVecs Workspace::apply_AT_delta(const Eigen::VectorXd& w) const {
  Eigen::VectorXd full = Eigen::VectorXd::Zero(flux.n_flux);
  full.head(idx.n_delta) = w;
  return apply_AT(full);
}

Eigen::RowVectorXd Workspace::flux_row(int i, int lrow) const {
  int off = 0;
  for (const auto& F : blocks[i].F_edges) {
    if (lrow < off + F.rows()) return F.row(lrow - off);
    off += static_cast<int>(F.rows());
  }
  throw std::out_of_range("flux_row: row out of range");
}

Eigen::VectorXd Workspace::reduced_apply(const Eigen::VectorXd& mu) const {
  LocalVecs bmu = apply_B(mu);
  LocalVecs y(n_subs());
  LocalVecs resid(n_subs());
  for (int i = 0; i < n_subs(); ++i) {
    y[i] = fac[i].apply_pinv(bmu[i]);
    resid[i] = bmu[i] - fac[i].apply_projection(bmu[i]);
  }
  const Eigen::VectorXd dmu = -apply_A(y);
  LocalVecs at = apply_AT(dmu);
  for (int i = 0; i < n_subs(); ++i) resid[i] -= fac[i].apply_pinv_transpose(at[i]);
  return apply_BT(resid);
}

// ------------------------------------------------------------ coarse layer

void Workspace::assemble_coarse() {
  if (coarse_built) return;
  const int N = n_subs();
  const int np = n_pi();
  const int npf = n_pi_flux();

  Ypi.resize(N);
  Gpi.resize(N);
  parallel_for(N, opts.workers, [&](int i) {
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(blocks[i].rows(), np);
    for (auto [lr, gp] : pi_rows[i]) rhs(lr, gp) = -1.0;
    Ypi[i] = fac[i].apply_pinv(rhs);
    Gpi[i] = fac[i].apply_projection(rhs);
  });

  // Flux data of the one-level solve with zero interface values.
  LocalVecs yf(N);
  for (int i = 0; i < N; ++i) yf[i] = fac[i].apply_pinv(blocks[i].f);
  dpi = (-apply_A(yf)).tail(npf);

  // Cross-point rows of D, assembled row by row through adjoint solves.
  Dpp = Eigen::MatrixXd::Zero(npf, np);
  Dpd = Eigen::MatrixXd::Zero(npf, idx.n_delta);
  for (int i = 0; i < N; ++i) {
    std::map<int, std::vector<std::pair<int, double>>> rows;
    for (const auto& e : flux.scatter[i])
      if (e.grow >= idx.n_delta) rows[e.grow].push_back({e.lrow, e.weight});
    for (const auto& [grow, entries] : rows) {
      Eigen::VectorXd a = Eigen::VectorXd::Zero(layers[i].M);
      for (auto [lrow, w] : entries) a += w * flux_row(i, lrow).transpose();
      Eigen::VectorXd z = fac[i].apply_pinv_transpose(a);
      const int r = grow - idx.n_delta;
      for (auto [lr, gp] : pi_rows[i]) Dpp(r, gp) += z(lr);
      for (auto [lr, g] : delta_rows[i]) Dpd(r, g) += z(lr);
    }
  }

  Spi = Eigen::MatrixXd::Zero(np, np);
  for (int g = idx.n_delta; g < n_mu(); ++g)
    Spi(g - idx.n_delta, g - idx.n_delta) = idx.multiplicity[g];
  Spi.noalias() += Dpp.transpose() * Dpp;
  for (int i = 0; i < N; ++i)
    for (auto [lr, gp] : pi_rows[i]) Spi.row(gp) += Gpi[i].row(lr);
  Spi = 0.5 * (Spi + Spi.transpose()).eval();
  Spi_llt.compute(Spi);
  if (Spi_llt.info() != Eigen::Success)
    throw std::runtime_error("assemble_coarse: coarse Schur matrix is not positive definite");
  coarse_built = true;
}

Workspace::KtildeApply Workspace::apply_ktilde_pinv(const LocalVecs& phi,
                                                    const Eigen::VectorXd& psi,
                                                    bool want_projection) const {
  KtildeApply out;
  const int N = n_subs();
  LocalVecs y(N), Ky(N);
  Eigen::VectorXd t = Eigen::VectorXd::Zero(n_pi());
  for (int i = 0; i < N; ++i) {
    y[i] = fac[i].apply_pinv(phi[i]);
    Ky[i] = fac[i].apply_projection(phi[i]);
    for (auto [lr, gp] : pi_rows[i]) t(gp) -= phi[i](lr) - Ky[i](lr);
  }
  out.mu_pi = Spi_llt.solve(t + Dpp.transpose() * psi);
  out.c.resize(N);
  for (int i = 0; i < N; ++i) out.c[i] = y[i] - Ypi[i] * out.mu_pi;
  if (want_projection) {
    out.proj_top.resize(N);
    for (int i = 0; i < N; ++i) {
      out.proj_top[i] = Ky[i] - Gpi[i] * out.mu_pi;
      for (auto [lr, gp] : pi_rows[i]) out.proj_top[i](lr) -= out.mu_pi(gp);
    }
    out.proj_bottom = Dpp * out.mu_pi;
  }
  return out;
}

std::pair<LocalVecs, Eigen::VectorXd> Workspace::apply_ktilde_pinv_transpose(
    const LocalVecs& phi) const {
  const int N = n_subs();
  LocalVecs z(N);
  Eigen::VectorXd t = Eigen::VectorXd::Zero(n_pi());
  for (int i = 0; i < N; ++i) {
    z[i] = fac[i].apply_pinv_transpose(phi[i]);
    for (auto [lr, gp] : pi_rows[i]) t(gp) += z[i](lr);
  }
  const Eigen::VectorXd nu = Spi_llt.solve(t);
  LocalVecs top(N);
  for (int i = 0; i < N; ++i) {
    top[i] = z[i] - Gpi[i] * nu;
    for (auto [lr, gp] : pi_rows[i]) top[i](lr) -= nu(gp);
  }
  return {std::move(top), Dpp * nu};
}

Eigen::VectorXd Workspace::cs_reduced_apply(
    const Eigen::VectorXd& v,
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& weight) const {
  LocalVecs phi = apply_B_delta(v);
  const Eigen::VectorXd psi = Dpd * v;
  KtildeApply kt = apply_ktilde_pinv(phi, psi, true);

  for (int i = 0; i < n_subs(); ++i) phi[i] -= kt.proj_top[i];
  Eigen::VectorXd out = apply_BT_delta(phi) + Dpd.transpose() * (psi - kt.proj_bottom);

  Eigen::VectorXd w = weight(-apply_A_delta(kt.c));
  auto [top, bot] = apply_ktilde_pinv_transpose(apply_AT_delta(w));
  out -= apply_BT_delta(top) + Dpd.transpose() * bot;
  return out;
}

// ----------------------------------------------------------- Neumann layer

void Workspace::build_neumann() {
  if (neumann_built) return;
  assemble_coarse();
  const auto t0 = std::chrono::steady_clock::now();
  const int N = n_subs();
  Kbar.resize(N);
  nfac.resize(N);
  Cdelta.resize(N);
  ndelta_map.resize(N);
  nflux_row0.resize(N);

  parallel_for(N, opts.workers, [&](int i) {
    const LocalBlocks& b = blocks[i];
    const int cc = b.cc;
    std::vector<int> corner_idx, delta_idx;
    for (int q = 0; q < b.n_gamma; ++q)
      (points.gamma_meta[i][q].is_cross ? corner_idx : delta_idx).push_back(q);
    // Edge-local position of every non-corner interface point.
    std::vector<std::pair<int, int>> where(b.n_gamma, {-1, -1});
    for (int e = 0; e < static_cast<int>(points.local_edges[i].size()); ++e) {
      const LocalEdge& le = points.local_edges[i][e];
      for (int pos = 0; pos < static_cast<int>(le.pts.size()); ++pos)
        if (!points.gamma_meta[i][le.pts[pos]].is_cross) where[le.pts[pos]] = {e, pos};
    }
    const int nc = static_cast<int>(corner_idx.size());
    const int nd = static_cast<int>(delta_idx.size());
    const int fixed = b.n_int + b.bc * b.n_bnd;

    Eigen::MatrixXd Kb(fixed + cc * nc + cc * nd, layers[i].M);
    Kb.topRows(fixed) = b.K.topRows(fixed);
    std::vector<Eigen::Vector2d> cpts, dpts;
    for (int q : corner_idx) cpts.push_back(points.interface[i][q]);
    for (int q : delta_idx) dpts.push_back(points.interface[i][q]);
    for (int c = 0; c < cc; ++c)
      if (nc > 0) Kb.middleRows(fixed + c * nc, nc) = problem.trace_rows(layers[i], cpts, c);
    const int row0f = fixed + cc * nc;
    for (int c = 0; c < cc; ++c)
      for (int k = 0; k < nd; ++k) {
        auto [e, pos] = where[delta_idx[k]];
        const int np_e = static_cast<int>(points.local_edges[i][e].pts.size());
        Kb.row(row0f + c * nd + k) = b.F_edges[e].row(c * np_e + pos);
      }
    nflux_row0[i] = row0f;
    nfac[i] = LsFactor(Kb, opts.rank_tol);
    Kbar[i] = std::move(Kb);

    Cdelta[i].resize(cc * nd, layers[i].M);
    for (int c = 0; c < cc; ++c)
      Cdelta[i].middleRows(c * nd, nd) = problem.trace_rows(layers[i], dpts, c);
    ndelta_map[i].resize(cc * nd);
    for (int c = 0; c < cc; ++c)
      for (int k = 0; k < nd; ++k) {
        const GammaPoint& gp = points.gamma_meta[i][delta_idx[k]];
        ndelta_map[i][c * nd + k] = idx.delta_index(gp.edge_id, c, gp.t);
      }
  });
  neumann_seconds = seconds_since(t0);
  neumann_built = true;
}

Eigen::VectorXd Workspace::apply_P(const Eigen::VectorXd& v) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(idx.n_delta);
  for (int i = 0; i < n_subs(); ++i) {
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(Kbar[i].rows());
    for (int r = 0; r < static_cast<int>(ndelta_map[i].size()); ++r)
      rhs(nflux_row0[i] + r) = -v(ndelta_map[i][r]);
    const Eigen::VectorXd tr = Cdelta[i] * nfac[i].apply_pinv(rhs);
    for (int r = 0; r < static_cast<int>(ndelta_map[i].size()); ++r)
      out(ndelta_map[i][r]) += tr(r);
  }
  return out;
}

Eigen::VectorXd Workspace::apply_PT(const Eigen::VectorXd& u) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(idx.n_delta);
  for (int i = 0; i < n_subs(); ++i) {
    Eigen::VectorXd tl(ndelta_map[i].size());
    for (int r = 0; r < static_cast<int>(ndelta_map[i].size()); ++r)
      tl(r) = u(ndelta_map[i][r]);
    const Eigen::VectorXd z = nfac[i].apply_pinv_transpose(Cdelta[i].transpose() * tl);
    for (int r = 0; r < static_cast<int>(ndelta_map[i].size()); ++r)
      out(ndelta_map[i][r]) -= z(nflux_row0[i] + r);
  }
  return out;
}

// ---------------------------------------------------------------- drivers

namespace {

SolveReport solve_local_only(Workspace& ws) {
  SolveReport rep;
  rep.coeffs.resize(ws.n_subs());
  for (int i = 0; i < ws.n_subs(); ++i) rep.coeffs[i] = ws.fac[i].apply_pinv(ws.blocks[i].f);
  rep.mu.resize(0);
  rep.mu_delta.resize(0);
  rep.mu_pi.resize(0);
  rep.converged = true;
  return rep;
}

}  // namespace

SolveReport ddelm_solve(Workspace& ws, const CgOptions& cg_opts) {
  if (ws.n_mu() == 0) return solve_local_only(ws);
  SolveReport rep;
  const auto t0 = std::chrono::steady_clock::now();

  const int N = ws.n_subs();
  LocalVecs yf(N), resid(N);
  for (int i = 0; i < N; ++i) {
    yf[i] = ws.fac[i].apply_pinv(ws.blocks[i].f);
    resid[i] = ws.blocks[i].f - ws.fac[i].apply_projection(ws.blocks[i].f);
  }
  const Eigen::VectorXd d = -ws.apply_A(yf);
  LocalVecs at = ws.apply_AT(d);
  for (int i = 0; i < N; ++i) resid[i] -= ws.fac[i].apply_pinv_transpose(at[i]);
  const Eigen::VectorXd rhs = ws.apply_BT(resid);
  rep.setup_seconds = seconds_since(t0);

  const auto t1 = std::chrono::steady_clock::now();
  CgResult res = cg([&](const Eigen::VectorXd& mu) { return ws.reduced_apply(mu); }, rhs,
                    cg_opts.rel_tol, cg_opts.max_iter);
  rep.cg_seconds = seconds_since(t1);
  rep.iterations = res.iterations;
  rep.converged = res.converged;
  rep.residual_history = std::move(res.residual_history);

  const auto t2 = std::chrono::steady_clock::now();
  rep.mu = std::move(res.x);
  rep.mu_delta = rep.mu.head(ws.n_delta());
  rep.mu_pi = rep.mu.tail(ws.n_pi());
  rep.coeffs.resize(N);
  for (int i = 0; i < N; ++i) {
    Eigen::VectorXd loc = ws.blocks[i].f;
    for (auto [lr, g] : ws.delta_rows[i]) loc(lr) += rep.mu(g);
    for (auto [lr, gp] : ws.pi_rows[i]) loc(lr) += rep.mu(ws.n_delta() + gp);
    rep.coeffs[i] = ws.fac[i].apply_pinv(loc);
  }
  rep.reconstruct_seconds = seconds_since(t2);
  return rep;
}

namespace {

SolveReport solve_with_coarse(
    Workspace& ws, const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& weight,
    const CgOptions& cg_opts, double setup_extra) {
  SolveReport rep;
  const auto t0 = std::chrono::steady_clock::now();
  const int N = ws.n_subs();

  LocalVecs f(N);
  for (int i = 0; i < N; ++i) f[i] = ws.blocks[i].f;
  Workspace::KtildeApply ktf = ws.apply_ktilde_pinv(f, ws.dpi, true);
  LocalVecs resid(N);
  for (int i = 0; i < N; ++i) resid[i] = f[i] - ktf.proj_top[i];
  Eigen::VectorXd rhs =
      ws.apply_BT_delta(resid) + ws.Dpd.transpose() * (ws.dpi - ktf.proj_bottom);
  const Eigen::VectorXd dt = weight(-ws.apply_A_delta(ktf.c));
  auto [top, bot] = ws.apply_ktilde_pinv_transpose(ws.apply_AT_delta(dt));
  rhs -= ws.apply_BT_delta(top) + ws.Dpd.transpose() * bot;
  rep.setup_seconds = setup_extra + seconds_since(t0);

  const auto t1 = std::chrono::steady_clock::now();
  CgResult res =
      cg([&](const Eigen::VectorXd& v) { return ws.cs_reduced_apply(v, weight); }, rhs,
         cg_opts.rel_tol, cg_opts.max_iter);
  rep.cg_seconds = seconds_since(t1);
  rep.iterations = res.iterations;
  rep.converged = res.converged;
  rep.residual_history = std::move(res.residual_history);

  const auto t2 = std::chrono::steady_clock::now();
  rep.mu_delta = std::move(res.x);
  LocalVecs phi(N);
  for (int i = 0; i < N; ++i) {
    phi[i] = ws.blocks[i].f;
    for (auto [lr, g] : ws.delta_rows[i]) phi[i](lr) += rep.mu_delta(g);
  }
  Workspace::KtildeApply kt =
      ws.apply_ktilde_pinv(phi, ws.dpi - ws.Dpd * rep.mu_delta, false);
  rep.coeffs = std::move(kt.c);
  rep.mu_pi = std::move(kt.mu_pi);
  rep.mu.resize(ws.n_mu());
  rep.mu << rep.mu_delta, rep.mu_pi;
  rep.reconstruct_seconds = seconds_since(t2);
  return rep;
}

}  // namespace

SolveReport ddelm_cs_solve(Workspace& ws, const CgOptions& cg_opts) {
  if (ws.n_mu() == 0) return solve_local_only(ws);
  const auto t0 = std::chrono::steady_clock::now();
  ws.assemble_coarse();
  const double extra = seconds_since(t0);
  return solve_with_coarse(ws, [](const Eigen::VectorXd& x) { return x; }, cg_opts, extra);
}

SolveReport ddelm_nn_solve(Workspace& ws, double theta, const CgOptions& cg_opts) {
  if (theta < 0.0 || theta > 1.0)
    throw std::invalid_argument("ddelm_nn_solve: theta must lie in [0, 1]");
  if (theta == 0.0) return ddelm_cs_solve(ws, cg_opts);
  if (ws.n_mu() == 0) return solve_local_only(ws);
  const auto t0 = std::chrono::steady_clock::now();
  ws.assemble_coarse();
  ws.build_neumann();
  const double extra = seconds_since(t0);
  auto weight = [&ws, theta](const Eigen::VectorXd& x) -> Eigen::VectorXd {
    Eigen::VectorXd w = theta * ws.apply_PT(ws.apply_P(x));
    if (theta < 1.0) w += (1.0 - theta) * x;
    return w;
  };
  return solve_with_coarse(ws, weight, cg_opts, extra);
}

// ---------------------------------------------------------- dense reference

DenseOracle dense_oracle_solve(Workspace& ws, Method method, double theta) {
  const int N = ws.n_subs();
  int sumM = 0, sumrows = 0;
  std::vector<int> colofs(N), rowofs(N);
  for (int i = 0; i < N; ++i) {
    colofs[i] = sumM;
    rowofs[i] = sumrows;
    sumM += ws.layers[i].M;
    sumrows += ws.blocks[i].rows();
  }
  if (sumM + ws.n_mu() > 3000)
    throw std::invalid_argument("dense_oracle_solve: system too large for the dense path");

  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(sumrows, sumM);
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(sumrows, ws.n_mu());
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(ws.flux.n_flux, sumM);
  Eigen::VectorXd f(sumrows);
  for (int i = 0; i < N; ++i) {
    K.block(rowofs[i], colofs[i], ws.blocks[i].rows(), ws.layers[i].M) = ws.blocks[i].K;
    f.segment(rowofs[i], ws.blocks[i].rows()) = ws.blocks[i].f;
    for (auto [lr, g] : ws.delta_rows[i]) B(rowofs[i] + lr, g) = -1.0;
    for (auto [lr, gp] : ws.pi_rows[i]) B(rowofs[i] + lr, ws.n_delta() + gp) = -1.0;
    for (const auto& e : ws.flux.scatter[i])
      A.row(e.grow).segment(colofs[i], ws.layers[i].M) += e.weight * ws.flux_row(i, e.lrow);
  }
  const Eigen::MatrixXd Kplus = K.completeOrthogonalDecomposition().pseudoInverse();
  const Eigen::MatrixXd KKp = K * Kplus;

  DenseOracle out;
  if (method == Method::Ddelm) {
    const Eigen::MatrixXd D = -A * (Kplus * B);
    out.reduced_op = B.transpose() * B + D.transpose() * D - B.transpose() * (KKp * B);
    out.reduced_rhs =
        B.transpose() * (f - KKp * f) + D.transpose() * (-A * (Kplus * f));
    out.mu_reduced = out.reduced_op.completeOrthogonalDecomposition().solve(out.reduced_rhs);
    out.mu_full = out.mu_reduced;
    const Eigen::VectorXd c = Kplus * (f - B * out.mu_reduced);
    out.coeffs.resize(N);
    for (int i = 0; i < N; ++i) out.coeffs[i] = c.segment(colofs[i], ws.layers[i].M);
    return out;
  }

  const int nd = ws.n_delta(), np = ws.n_pi(), npf = ws.n_pi_flux();
  const Eigen::MatrixXd BPi = B.rightCols(np), BD = B.leftCols(nd);
  const Eigen::MatrixXd APi = A.bottomRows(npf), AD = A.topRows(nd);
  const Eigen::MatrixXd DppD = -APi * (Kplus * BPi);
  const Eigen::MatrixXd DpdD = -APi * (Kplus * BD);
  const Eigen::VectorXd dpiD = -APi * (Kplus * f);

  Eigen::MatrixXd Kt = Eigen::MatrixXd::Zero(sumrows + npf, sumM + np);
  Kt.topLeftCorner(sumrows, sumM) = K;
  Kt.topRightCorner(sumrows, np) = BPi;
  Kt.bottomRightCorner(npf, np) = DppD;
  Eigen::MatrixXd Bt(sumrows + npf, nd);
  Bt << BD, DpdD;
  Eigen::MatrixXd At = Eigen::MatrixXd::Zero(nd, sumM + np);
  At.leftCols(sumM) = AD;
  Eigen::VectorXd ft(sumrows + npf);
  ft << f, dpiD;

  const Eigen::MatrixXd Ktp = Kt.completeOrthogonalDecomposition().pseudoInverse();
  const Eigen::MatrixXd KKtp = Kt * Ktp;
  const Eigen::MatrixXd Dt = -At * (Ktp * Bt);
  const Eigen::VectorXd dt = -At * (Ktp * ft);

  Eigen::MatrixXd W = Eigen::MatrixXd::Identity(nd, nd);
  if (method == Method::DdelmNn && theta > 0.0) {
    ws.build_neumann();
    int sumrowsb = 0;
    std::vector<int> rowofsb(N);
    for (int i = 0; i < N; ++i) {
      rowofsb[i] = sumrowsb;
      sumrowsb += static_cast<int>(ws.Kbar[i].rows());
    }
    Eigen::MatrixXd Kb = Eigen::MatrixXd::Zero(sumrowsb, sumM);
    Eigen::MatrixXd Bb = Eigen::MatrixXd::Zero(sumrowsb, nd);
    Eigen::MatrixXd Ab = Eigen::MatrixXd::Zero(nd, sumM);
    for (int i = 0; i < N; ++i) {
      Kb.block(rowofsb[i], colofs[i], ws.Kbar[i].rows(), ws.layers[i].M) = ws.Kbar[i];
      for (int r = 0; r < static_cast<int>(ws.ndelta_map[i].size()); ++r) {
        Bb(rowofsb[i] + ws.nflux_row0[i] + r, ws.ndelta_map[i][r]) = -1.0;
        Ab.row(ws.ndelta_map[i][r]).segment(colofs[i], ws.layers[i].M) += ws.Cdelta[i].row(r);
      }
    }
    const Eigen::MatrixXd P =
        Ab * (Kb.completeOrthogonalDecomposition().pseudoInverse() * Bb);
    W = theta * P.transpose() * P + (1.0 - theta) * Eigen::MatrixXd::Identity(nd, nd);
  }

  out.reduced_op = Bt.transpose() * Bt + Dt.transpose() * (W * Dt) -
                   Bt.transpose() * (KKtp * Bt);
  out.reduced_rhs =
      Bt.transpose() * (ft - KKtp * ft) + Dt.transpose() * (W * dt);
  out.mu_reduced = out.reduced_op.completeOrthogonalDecomposition().solve(out.reduced_rhs);
  const Eigen::VectorXd cmu = Ktp * (ft - Bt * out.mu_reduced);
  out.coeffs.resize(N);
  for (int i = 0; i < N; ++i) out.coeffs[i] = cmu.segment(colofs[i], ws.layers[i].M);
  out.mu_full.resize(ws.n_mu());
  out.mu_full << out.mu_reduced, cmu.tail(np);
  return out;
}

}  // namespace ddelm
