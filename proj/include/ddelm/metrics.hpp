#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "ddelm/features.hpp"
#include "ddelm/geometry.hpp"
#include "ddelm/problems.hpp"

namespace ddelm {

/// Piecewise network solution over the decomposition; evaluation routes each
/// point to its owning subdomain.
struct ElmField {
  DomainPartition part;
  std::vector<FeatureLayer> layers;
  std::vector<Eigen::VectorXd> coeffs;  // per subdomain, M each

  void value_and_gradient(const Eigen::Vector2d& x, double& u, Eigen::Vector2d& grad) const;
  double value(const Eigen::Vector2d& x) const;
};

struct ErrorReport {
  double l2 = 0;  // relative L2 error
  double h1 = 0;  // relative H1 error (L2 plus gradient seminorm)
  int grid_n = 0;
  std::string reference;  // "exact" or "finite-difference"
};

/// Uniform nodal field on [0,1]^2 including the boundary; (a, b) indexes
/// x = a*h, y = b*h with h = 1/(n-1). Matrices are n x n, row = a, col = b.
struct GriddedField {
  int n = 0;
  Eigen::MatrixXd u, gx, gy;
};

/// Composite trapezoidal relative errors on a grid_n x grid_n grid. Grids
/// below 64 points per side are rejected.
ErrorReport relative_errors(const ElmField& field, const ScalarFn& ref, const GradFn& ref_grad,
                            int grid_n);
ErrorReport relative_errors(const ElmField& field, const GriddedField& ref);

/// Second-order finite-difference reference solve for the Poisson variants
/// (5-point Laplacian; conservative midpoint-coefficient form for the
/// variable-coefficient problem). Gradients by 4th-order differences.
GriddedField fd_reference(const ProblemSpec& problem, int grid_n);

}  // namespace ddelm
