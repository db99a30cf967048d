#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "ddelm/geometry.hpp"

namespace ddelm {

/// Random tanh feature layer for one subdomain: phi_j(x) = tanh(w_j . x + b_j).
struct FeatureLayer {
  int M = 0;
  Eigen::Matrix2Xd w;   // 2 x M
  Eigen::VectorXd b;    // M
  double l = 0, r = 0;
  Box box;
  std::uint64_t seed = 0;
};

/// w_j ~ U([-l,l]^2), xi_j ~ U(box enlarged by r on every side), b_j = -w_j . xi_j.
FeatureLayer init_layer(int M, const Box& box, double l, double r, std::uint64_t seed);

/// l from the proportionality constant c: l = c * sqrt(M) / diam(box enlarged by r).
double scale_from_constant(double c, int M, const Box& box, double r);

/// Matrix of d^{dx+dy} phi_j / dx^dx dy^dy at the given points, |pts| x M.
/// Total order dx + dy must be at most 4.
Eigen::MatrixXd eval_derivative_matrix(const FeatureLayer& layer,
                                       const std::vector<Eigen::Vector2d>& pts, int dx, int dy);

}  // namespace ddelm
