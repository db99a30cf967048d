#pragma once

#include <vector>

#include <Eigen/Core>

#include "ddelm/geometry.hpp"
#include "ddelm/problems.hpp"

namespace ddelm {

/// Local collocation blocks of one subdomain. Row layout of K:
/// interior rows, then boundary rows (component-major), then trace rows
/// (component-major, local gamma point order). The flux rows of each local
/// interface edge are kept separately (component-major within an edge).
struct LocalBlocks {
  Eigen::MatrixXd K;
  Eigen::VectorXd f;
  int n_int = 0, n_bnd = 0, n_gamma = 0;
  int bc = 1, cc = 1;

  int rows() const { return n_int + bc * n_bnd + cc * n_gamma; }
  int trace_row0() const { return n_int + bc * n_bnd; }
  int trace_row(int comp, int p) const { return trace_row0() + comp * n_gamma + p; }

  std::vector<Eigen::MatrixXd> F_edges;  // parallel to PointSets::local_edges[i]
};

LocalBlocks assemble_local(const ProblemSpec& problem, const FeatureLayer& layer,
                           const PointSets& ps, int i);

/// Edge transition matrix from the edge-linear endpoint basis to the nodal
/// basis, for an edge of m points whose both endpoints are cross-points.
Eigen::MatrixXd build_transition(int m);

/// Assembled per-subdomain change of variables on the trace unknowns:
/// cross-point columns become linear profiles along their adjacent edges.
struct Transition {
  Eigen::MatrixXd T;     // n_gamma x n_gamma
  Eigen::MatrixXd Tinv;
};

Transition build_subdomain_transition(const std::vector<LocalEdge>& edges, int n_gamma,
                                      int n_grid);

/// Left-multiplies each continuity component's trace-row block by T^{-1};
/// interior and boundary rows are untouched.
void apply_change_of_variables(LocalBlocks& blocks, const Transition& t);

enum class FluxVariant { Pointwise, MeanEdge };

struct FluxScatter {
  int grow;       // global flux row
  int lrow;       // row into the concatenated F_edges of the subdomain
  double weight;
};

/// Global flux conditions. Delta rows come first and mirror the mu-Delta
/// numbering; each interior cross-point then carries 2 rows per flux
/// component (x-direction and y-direction sums over the 4 adjacent
/// subdomains, signs from outward normals).
struct FluxBlocks {
  FluxVariant variant = FluxVariant::Pointwise;
  int n_flux = 0;
  int n_delta = 0;
  std::vector<std::vector<FluxScatter>> scatter;  // per subdomain
  std::vector<std::vector<int>> edge_row0;        // per subdomain: row offset of each local edge block
};

FluxBlocks build_flux(const DomainPartition& p, const PointSets& ps, const InterfaceIndex& idx,
                      FluxVariant variant);

}  // namespace ddelm
