#pragma once

#include <array>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace ddelm {

struct Box {
  double x0 = 0.0, y0 = 0.0, x1 = 1.0, y1 = 1.0;
  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
  double diam() const;
};

/// One interior interface edge of the s-by-s decomposition. Vertical edges sit
/// at x = k/s spanning y in [m/s, (m+1)/s]; horizontal edges at y = m/s
/// spanning x in [k/s, (k+1)/s].
struct Edge {
  int id = -1;
  bool vertical = false;
  int k = 0, m = 0;
  std::array<int, 2> subs{-1, -1};  // vertical: {left, right}; horizontal: {below, above}
};

struct DomainPartition {
  int s = 1;
  int n_grid = 3;
  std::vector<Box> boxes;  // subdomain i = iy*s + ix
  std::vector<Edge> edges;
  // Per subdomain, the edge id on each side [left, right, bottom, top], or -1
  // when that side lies on the outer boundary.
  std::vector<std::array<int, 4>> side_edge;
  std::vector<std::vector<std::pair<int, int>>> neighbors;  // (neighbor, edge id)

  int n_subdomains() const { return s * s; }
  int cross_count() const { return (s - 1) * (s - 1); }
  int cross_id(int k, int m) const { return (m - 1) * (s - 1) + (k - 1); }
  int subdomain_of(const Eigen::Vector2d& x) const;
};

DomainPartition partition_domain(int s, int n_grid);

/// Metadata for one local interface grid point. Every interface point is
/// either an interior cross-point of the decomposition or lies strictly
/// inside exactly one interface edge.
struct GammaPoint {
  Eigen::Vector2d xy = Eigen::Vector2d::Zero();
  bool is_cross = false;
  int cross_id = -1;  // valid iff is_cross
  int edge_id = -1;   // valid iff !is_cross
  int t = -1;         // arclength grid index 1..n_grid-2 along the edge
};

/// One interface edge seen from one subdomain: the unknown grid points on it
/// in arclength order, with the subdomain's outward normal.
struct LocalEdge {
  int edge_id = -1;
  bool vertical = false;
  Eigen::Vector2d normal = Eigen::Vector2d::Zero();
  std::vector<int> pts;     // local gamma indices, arclength order
  std::vector<int> geom_j;  // grid index 0..n_grid-1 along the edge, parallel to pts
  bool first_corner = false;  // endpoint at arclength 0 is an interior cross-point
  bool last_corner = false;
};

struct PointSets {
  std::vector<std::vector<Eigen::Vector2d>> interior;   // x_I per subdomain
  std::vector<std::vector<Eigen::Vector2d>> boundary;   // x_B
  std::vector<std::vector<Eigen::Vector2d>> interface;  // x_Gamma
  std::vector<std::vector<GammaPoint>> gamma_meta;      // parallel to interface
  std::vector<std::vector<LocalEdge>> local_edges;
};

PointSets classify_points(const DomainPartition& p);

/// Global interface numbering. Delta components come first, ordered by
/// (edge id, component, arclength); Pi (cross-point) components follow,
/// ordered by (cross id, component).
struct InterfaceIndex {
  int cc = 1;  // continuity components per geometric point
  int n_delta = 0;
  int n_pi = 0;
  int interior_per_edge = 0;  // n_grid - 2

  int n_mu() const { return n_delta + n_pi; }
  int delta_index(int edge_id, int comp, int t) const {
    return (edge_id * cc + comp) * interior_per_edge + (t - 1);
  }
  int pi_index(int cross_id, int comp) const { return n_delta + cross_id * cc + comp; }

  // [i][c * |x_Gamma^i| + p] -> global mu index of component c at local gamma point p
  std::vector<std::vector<int>> local_to_global;
  std::vector<int> multiplicity;  // adjacent-subdomain count per mu component
  std::vector<char> is_pi;        // per mu component
};

InterfaceIndex build_interface_index(const DomainPartition& p, const PointSets& ps,
                                     int components_per_point);

}  // namespace ddelm
