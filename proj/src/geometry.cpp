#include "ddelm/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace ddelm {

double Box::diam() const { return std::hypot(width(), height()); }

int DomainPartition::subdomain_of(const Eigen::Vector2d& x) const {
  auto clampi = [this](double v) {
    int i = static_cast<int>(std::floor(v * s));
    return std::clamp(i, 0, s - 1);
  };
  return clampi(x.y()) * s + clampi(x.x());
}

DomainPartition partition_domain(int s, int n_grid) {
  if (s < 1) throw std::invalid_argument("partition_domain: s must be >= 1");
  if (n_grid < 3) throw std::invalid_argument("partition_domain: n_grid must be >= 3");

  DomainPartition p;
  p.s = s;
  p.n_grid = n_grid;
  p.boxes.resize(s * s);
  p.side_edge.assign(s * s, {-1, -1, -1, -1});
  p.neighbors.resize(s * s);

  const double h = 1.0 / s;
  for (int iy = 0; iy < s; ++iy)
    for (int ix = 0; ix < s; ++ix)
      p.boxes[iy * s + ix] = Box{ix * h, iy * h, (ix + 1) * h, (iy + 1) * h};

  // Vertical edges first, then horizontal.
  for (int k = 1; k <= s - 1; ++k)
    for (int m = 0; m < s; ++m) {
      Edge e;
      e.id = (k - 1) * s + m;
      e.vertical = true;
      e.k = k;
      e.m = m;
      e.subs = {m * s + (k - 1), m * s + k};
      p.edges.push_back(e);
      p.side_edge[e.subs[0]][1] = e.id;  // right side of left subdomain
      p.side_edge[e.subs[1]][0] = e.id;  // left side of right subdomain
      p.neighbors[e.subs[0]].push_back({e.subs[1], e.id});
      p.neighbors[e.subs[1]].push_back({e.subs[0], e.id});
    }
  const int nv = s * (s - 1);
  for (int m = 1; m <= s - 1; ++m)
    for (int k = 0; k < s; ++k) {
      Edge e;
      e.id = nv + (m - 1) * s + k;
      e.vertical = false;
      e.k = k;
      e.m = m;
      e.subs = {(m - 1) * s + k, m * s + k};
      p.edges.push_back(e);
      p.side_edge[e.subs[0]][3] = e.id;  // top side of lower subdomain
      p.side_edge[e.subs[1]][2] = e.id;  // bottom side of upper subdomain
      p.neighbors[e.subs[0]].push_back({e.subs[1], e.id});
      p.neighbors[e.subs[1]].push_back({e.subs[0], e.id});
    }
  return p;
}

PointSets classify_points(const DomainPartition& p) {
  const int s = p.s, n = p.n_grid;
  const int S = s * (n - 1);  // global grid index range 0..S
  PointSets ps;
  const int N = p.n_subdomains();
  ps.interior.resize(N);
  ps.boundary.resize(N);
  ps.interface.resize(N);
  ps.gamma_meta.resize(N);
  ps.local_edges.resize(N);

  for (int iy = 0; iy < s; ++iy) {
    for (int ix = 0; ix < s; ++ix) {
      const int i = iy * s + ix;
      // Local grid (a, b) -> local gamma index, for local edge assembly.
      std::map<std::pair<int, int>, int> gamma_of;
      for (int b = 0; b < n; ++b) {
        for (int a = 0; a < n; ++a) {
          const int gx = ix * (n - 1) + a;
          const int gy = iy * (n - 1) + b;
          const Eigen::Vector2d xy(static_cast<double>(gx) / S, static_cast<double>(gy) / S);
          const bool on_outer = gx == 0 || gx == S || gy == 0 || gy == S;
          const bool on_local_bnd = a == 0 || a == n - 1 || b == 0 || b == n - 1;
          if (!on_local_bnd) {
            ps.interior[i].push_back(xy);
          } else if (on_outer) {
            ps.boundary[i].push_back(xy);
          } else {
            GammaPoint g;
            g.xy = xy;
            const bool x_on_line = a == 0 || a == n - 1;
            const bool y_on_line = b == 0 || b == n - 1;
            if (x_on_line && y_on_line) {
              g.is_cross = true;
              g.cross_id = p.cross_id(gx / (n - 1), gy / (n - 1));
            } else if (x_on_line) {
              const int k = (a == 0) ? ix : ix + 1;
              g.edge_id = (k - 1) * s + iy;
              g.t = b;
            } else {
              const int m = (b == 0) ? iy : iy + 1;
              g.edge_id = s * (s - 1) + (m - 1) * s + ix;
              g.t = a;
            }
            gamma_of[{a, b}] = static_cast<int>(ps.interface[i].size());
            ps.interface[i].push_back(xy);
            ps.gamma_meta[i].push_back(g);
          }
        }
      }

      // Interface edges of this subdomain, sides in order left/right/bottom/top.
      const std::array<Eigen::Vector2d, 4> normals = {
          Eigen::Vector2d(-1, 0), Eigen::Vector2d(1, 0), Eigen::Vector2d(0, -1),
          Eigen::Vector2d(0, 1)};
      for (int side = 0; side < 4; ++side) {
        const int eid = p.side_edge[i][side];
        if (eid < 0) continue;
        LocalEdge le;
        le.edge_id = eid;
        le.vertical = side < 2;
        le.normal = normals[side];
        for (int j = 0; j < n; ++j) {
          const int a = le.vertical ? (side == 0 ? 0 : n - 1) : j;
          const int b = le.vertical ? j : (side == 2 ? 0 : n - 1);
          auto it = gamma_of.find({a, b});
          if (it == gamma_of.end()) continue;  // endpoint on the outer boundary
          le.pts.push_back(it->second);
          le.geom_j.push_back(j);
          if (j == 0) le.first_corner = true;
          if (j == n - 1) le.last_corner = true;
        }
        ps.local_edges[i].push_back(le);
      }
    }
  }
  return ps;
}

InterfaceIndex build_interface_index(const DomainPartition& p, const PointSets& ps,
                                     int components_per_point) {
  if (components_per_point != 1 && components_per_point != 2)
    throw std::invalid_argument("build_interface_index: components_per_point must be 1 or 2");

  InterfaceIndex idx;
  idx.cc = components_per_point;
  idx.interior_per_edge = p.n_grid - 2;
  idx.n_delta = static_cast<int>(p.edges.size()) * idx.cc * idx.interior_per_edge;
  idx.n_pi = p.cross_count() * idx.cc;
  idx.multiplicity.assign(idx.n_mu(), 0);
  idx.is_pi.assign(idx.n_mu(), 0);
  for (int g = idx.n_delta; g < idx.n_mu(); ++g) idx.is_pi[g] = 1;

  const int N = p.n_subdomains();
  idx.local_to_global.resize(N);
  for (int i = 0; i < N; ++i) {
    const auto& meta = ps.gamma_meta[i];
    const int ng = static_cast<int>(meta.size());
    idx.local_to_global[i].resize(static_cast<size_t>(idx.cc) * ng);
    for (int c = 0; c < idx.cc; ++c) {
      for (int q = 0; q < ng; ++q) {
        const GammaPoint& g = meta[q];
        const int gi = g.is_cross ? idx.pi_index(g.cross_id, c)
                                  : idx.delta_index(g.edge_id, c, g.t);
        idx.local_to_global[i][c * ng + q] = gi;
        idx.multiplicity[gi] += 1;
      }
    }
  }
  return idx;
}

}  // namespace ddelm
