#include "ddelm/assembly.hpp"

#include <stdexcept>

#include <Eigen/LU>

namespace ddelm {

LocalBlocks assemble_local(const ProblemSpec& problem, const FeatureLayer& layer,
                           const PointSets& ps, int i) {
  LocalBlocks b;
  b.n_int = static_cast<int>(ps.interior[i].size());
  b.n_bnd = static_cast<int>(ps.boundary[i].size());
  b.n_gamma = static_cast<int>(ps.interface[i].size());
  b.bc = problem.boundary_components;
  b.cc = problem.components;

  b.K.resize(b.rows(), layer.M);
  b.f = Eigen::VectorXd::Zero(b.rows());

  b.K.topRows(b.n_int) = problem.interior_rows(layer, ps.interior[i]);
  for (int k = 0; k < b.n_int; ++k) b.f(k) = problem.forcing(ps.interior[i][k]);

  int row = b.n_int;
  for (int c = 0; c < b.bc; ++c) {
    b.K.middleRows(row, b.n_bnd) = problem.boundary_rows(layer, ps.boundary[i], c);
    for (int k = 0; k < b.n_bnd; ++k) b.f(row + k) = problem.boundary_data[c](ps.boundary[i][k]);
    row += b.n_bnd;
  }
  for (int c = 0; c < b.cc; ++c) {
    b.K.middleRows(row, b.n_gamma) = problem.trace_rows(layer, ps.interface[i], c);
    row += b.n_gamma;  // f stays zero on trace rows
  }

  for (const LocalEdge& le : ps.local_edges[i]) {
    std::vector<Eigen::Vector2d> pts;
    pts.reserve(le.pts.size());
    for (int q : le.pts) pts.push_back(ps.interface[i][q]);
    Eigen::MatrixXd F(static_cast<int>(b.cc * pts.size()), layer.M);
    for (int c = 0; c < b.cc; ++c)
      F.middleRows(c * static_cast<int>(pts.size()), static_cast<int>(pts.size())) =
          problem.flux_rows(layer, pts, le.normal, c);
    b.F_edges.push_back(std::move(F));
  }
  return b;
}

Eigen::MatrixXd build_transition(int m) {
  if (m < 2) throw std::invalid_argument("build_transition: edge needs at least 2 points");
  Eigen::MatrixXd T = Eigen::MatrixXd::Identity(m, m);
  for (int j = 0; j < m; ++j) {
    const double frac = static_cast<double>(j) / (m - 1);
    T(j, 0) = 1.0 - frac;
    T(j, m - 1) = frac;
  }
  return T;
}

Transition build_subdomain_transition(const std::vector<LocalEdge>& edges, int n_gamma,
                                      int n_grid) {
  Transition t;
  t.T = Eigen::MatrixXd::Identity(n_gamma, n_gamma);
  for (const LocalEdge& le : edges) {
    const int np = static_cast<int>(le.pts.size());
    if (le.first_corner) {
      const int col = le.pts.front();
      for (int q = 1; q < np; ++q)
        t.T(le.pts[q], col) = 1.0 - static_cast<double>(le.geom_j[q]) / (n_grid - 1);
    }
    if (le.last_corner) {
      const int col = le.pts.back();
      for (int q = 0; q + 1 < np; ++q)
        t.T(le.pts[q], col) = static_cast<double>(le.geom_j[q]) / (n_grid - 1);
    }
  }
  t.Tinv = t.T.partialPivLu().inverse();
  return t;
}

void apply_change_of_variables(LocalBlocks& blocks, const Transition& t) {
  if (t.T.rows() != blocks.n_gamma)
    throw std::invalid_argument("apply_change_of_variables: transition size mismatch");
  for (int c = 0; c < blocks.cc; ++c) {
    auto rows = blocks.K.middleRows(blocks.trace_row(c, 0), blocks.n_gamma);
    rows = t.Tinv * rows;
  }
}

FluxBlocks build_flux(const DomainPartition& p, const PointSets& ps, const InterfaceIndex& idx,
                      FluxVariant variant) {
  FluxBlocks fb;
  fb.variant = variant;
  fb.n_delta = idx.n_delta;
  fb.n_flux = idx.n_delta + p.cross_count() * idx.cc * 2;
  const int N = p.n_subdomains();
  fb.scatter.resize(N);
  fb.edge_row0.resize(N);

  const int n = p.n_grid;
  for (int i = 0; i < N; ++i) {
    int off = 0;
    for (const LocalEdge& le : ps.local_edges[i]) {
      fb.edge_row0[i].push_back(off);
      const int np = static_cast<int>(le.pts.size());
      const int dir = le.vertical ? 0 : 1;
      for (int c = 0; c < idx.cc; ++c) {
        for (int q = 0; q < np; ++q) {
          const int j = le.geom_j[q];
          const int lrow = off + c * np + q;
          if (j > 0 && j < n - 1) {
            fb.scatter[i].push_back({idx.delta_index(le.edge_id, c, j), lrow, 1.0});
            continue;
          }
          // Cross-point endpoint: contributes to the (cross, comp, dir) row.
          const GammaPoint& gp = ps.gamma_meta[i][le.pts[q]];
          const int grow = idx.n_delta + (gp.cross_id * idx.cc + c) * 2 + dir;
          if (variant == FluxVariant::Pointwise) {
            fb.scatter[i].push_back({grow, lrow, 1.0});
          } else {
            // Mean flux over this edge, excluding the opposing corner.
            const int opposing_j = (j == 0) ? n - 1 : 0;
            const double w = 1.0 / (n - 1);
            for (int q2 = 0; q2 < np; ++q2)
              if (le.geom_j[q2] != opposing_j)
                fb.scatter[i].push_back({grow, off + c * np + q2, w});
          }
        }
      }
      off += idx.cc * np;
    }
  }
  return fb;
}

}  // namespace ddelm
