#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <set>

#include "ddelm/geometry.hpp"

using namespace ddelm;

TEST_CASE("partition rejects degenerate inputs") {
  CHECK_THROWS(partition_domain(0, 10));
  CHECK_THROWS(partition_domain(2, 2));
}

TEST_CASE("edge and cross-point counts") {
  // s=4: 2*4*3 = 24 interior edges, 3*3 = 9 cross-points.
  DomainPartition p = partition_domain(4, 80);
  CHECK(p.edges.size() == 24);
  CHECK(p.cross_count() == 9);

  // Enumerate cross-points geometrically: interface points shared by 4 boxes.
  PointSets ps = classify_points(p);
  std::set<int> crosses;
  for (int i = 0; i < p.n_subdomains(); ++i)
    for (const GammaPoint& g : ps.gamma_meta[i])
      if (g.is_cross) crosses.insert(g.cross_id);
  CHECK(static_cast<int>(crosses.size()) == 9);
}

TEST_CASE("2x2 point classification") {
  DomainPartition p = partition_domain(2, 4);
  PointSets ps = classify_points(p);
  for (int i = 0; i < 4; ++i) {
    CHECK(ps.interior[i].size() == 4);   // (n-2)^2
    CHECK(ps.boundary[i].size() == 7);   // two outer sides of the 4x4 local grid
    CHECK(ps.interface[i].size() == 5);  // two interface sides sharing the cross-point
  }
}

TEST_CASE("local interface size at fine resolution") {
  // Two edges of 160 points sharing one cross-point; the two endpoints on
  // the outer boundary carry boundary conditions, not interface unknowns.
  DomainPartition p = partition_domain(2, 160);
  PointSets ps = classify_points(p);
  for (int i = 0; i < 4; ++i) CHECK(ps.interface[i].size() == 2 * 160 - 1 - 2);
}

TEST_CASE("subdomain ownership is clamped floor") {
  DomainPartition p = partition_domain(3, 10);
  CHECK(p.subdomain_of({0.0, 0.0}) == 0);
  CHECK(p.subdomain_of({0.99, 0.99}) == 8);
  CHECK(p.subdomain_of({1.0, 1.0}) == 8);   // clamped
  CHECK(p.subdomain_of({0.5, 0.1}) == 1);
}

TEST_CASE("interface numbering: delta first, pi after, consistent multiplicity") {
  for (int cc : {1, 2}) {
    DomainPartition p = partition_domain(3, 8);
    PointSets ps = classify_points(p);
    InterfaceIndex idx = build_interface_index(p, ps, cc);
    CHECK(idx.n_delta == static_cast<int>(p.edges.size()) * cc * (p.n_grid - 2));
    CHECK(idx.n_pi == p.cross_count() * cc);

    // Round trip: scatter a vector to local copies, gather with transpose,
    // recover multiplicity * v.
    Eigen::VectorXd v = Eigen::VectorXd::LinSpaced(idx.n_mu(), 1.0, 2.0);
    Eigen::VectorXd gathered = Eigen::VectorXd::Zero(idx.n_mu());
    for (int i = 0; i < p.n_subdomains(); ++i)
      for (int g : idx.local_to_global[i]) gathered(g) += v(g);
    for (int g = 0; g < idx.n_mu(); ++g) {
      CHECK(gathered(g) == doctest::Approx(idx.multiplicity[g] * v(g)).epsilon(1e-14));
      // Edge-interior components touch 2 subdomains, cross-points 4.
      CHECK(idx.multiplicity[g] == (idx.is_pi[g] ? 4 : 2));
    }
  }
}

TEST_CASE("shared interface points are bit-identical across subdomains") {
  DomainPartition p = partition_domain(3, 7);
  PointSets ps = classify_points(p);
  InterfaceIndex idx = build_interface_index(p, ps, 1);
  std::vector<Eigen::Vector2d> coord(idx.n_mu(), Eigen::Vector2d(-1, -1));
  for (int i = 0; i < p.n_subdomains(); ++i) {
    const int ng = static_cast<int>(ps.interface[i].size());
    for (int q = 0; q < ng; ++q) {
      const int g = idx.local_to_global[i][q];
      if (coord[g].x() >= 0) {
        CHECK(coord[g].x() == ps.interface[i][q].x());
        CHECK(coord[g].y() == ps.interface[i][q].y());
      } else {
        coord[g] = ps.interface[i][q];
      }
    }
  }
}

TEST_CASE("local edges are arclength ordered with outward normals") {
  DomainPartition p = partition_domain(2, 6);
  PointSets ps = classify_points(p);
  for (int i = 0; i < 4; ++i) {
    CHECK(ps.local_edges[i].size() == 2);
    for (const LocalEdge& le : ps.local_edges[i]) {
      for (size_t q = 1; q < le.geom_j.size(); ++q)
        CHECK(le.geom_j[q] > le.geom_j[q - 1]);
      CHECK(le.normal.norm() == doctest::Approx(1.0));
      // Normal points away from the subdomain box center.
      const Box& b = p.boxes[i];
      const Eigen::Vector2d center(0.5 * (b.x0 + b.x1), 0.5 * (b.y0 + b.y1));
      const Eigen::Vector2d to_edge = ps.interface[i][le.pts[0]] - center;
      CHECK(le.normal.dot(to_edge) > 0);
    }
  }
}
