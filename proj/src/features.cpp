#include "ddelm/features.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace ddelm {

FeatureLayer init_layer(int M, const Box& box, double l, double r, std::uint64_t seed) {
  if (M < 1) throw std::invalid_argument("init_layer: M must be positive");
  if (l <= 0) throw std::invalid_argument("init_layer: l must be positive");
  if (r <= 0) throw std::invalid_argument("init_layer: r must be positive");

  FeatureLayer layer;
  layer.M = M;
  layer.l = l;
  layer.r = r;
  layer.box = box;
  layer.seed = seed;
  layer.w.resize(2, M);
  layer.b.resize(M);

  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> uw(-l, l);
  std::uniform_real_distribution<double> ux(box.x0 - r, box.x1 + r);
  std::uniform_real_distribution<double> uy(box.y0 - r, box.y1 + r);
  for (int j = 0; j < M; ++j) {
    const double w0 = uw(gen), w1 = uw(gen);
    const double xi0 = ux(gen), xi1 = uy(gen);
    layer.w(0, j) = w0;
    layer.w(1, j) = w1;
    layer.b(j) = -(w0 * xi0 + w1 * xi1);
  }
  return layer;
}

double scale_from_constant(double c, int M, const Box& box, double r) {
  const Box enlarged{box.x0 - r, box.y0 - r, box.x1 + r, box.y1 + r};
  return c * std::sqrt(static_cast<double>(M)) / enlarged.diam();
}

Eigen::MatrixXd eval_derivative_matrix(const FeatureLayer& layer,
                                       const std::vector<Eigen::Vector2d>& pts, int dx, int dy) {
  if (dx < 0 || dy < 0 || dx + dy > 4)
    throw std::invalid_argument("eval_derivative_matrix: derivative order must be in [0, 4]");

  const int order = dx + dy;
  const int np = static_cast<int>(pts.size());
  Eigen::MatrixXd out(np, layer.M);
  for (int j = 0; j < layer.M; ++j) {
    const double w0 = layer.w(0, j), w1 = layer.w(1, j);
    double wfac = 1.0;
    for (int a = 0; a < dx; ++a) wfac *= w0;
    for (int a = 0; a < dy; ++a) wfac *= w1;
    for (int k = 0; k < np; ++k) {
      const double z = w0 * pts[k].x() + w1 * pts[k].y() + layer.b(j);
      const double s0 = std::tanh(z);
      double v = s0;
      if (order > 0) {
        const double s1 = 1.0 - s0 * s0;
        const double s2 = -2.0 * s0 * s1;
        const double s3 = -2.0 * s1 * s1 - 2.0 * s0 * s2;
        const double s4 = -6.0 * s1 * s2 - 2.0 * s0 * s3;
        switch (order) {
          case 1: v = s1; break;
          case 2: v = s2; break;
          case 3: v = s3; break;
          default: v = s4; break;
        }
        v *= wfac;
      }
      out(k, j) = v;
    }
  }
  return out;
}

}  // namespace ddelm
