#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "ddelm/features.hpp"

using namespace ddelm;

namespace {

const Box kBox{0.25, 0.5, 0.5, 0.75};

double eval_phi(const FeatureLayer& layer, int j, double x, double y) {
  return std::tanh(layer.w(0, j) * x + layer.w(1, j) * y + layer.b(j));
}

// Central finite difference of order (a,b) via repeated first differences.
double fd_derivative(const FeatureLayer& layer, int j, Eigen::Vector2d x, int a, int b,
                     double h) {
  if (a > 0)
    return (fd_derivative(layer, j, {x.x() + h, x.y()}, a - 1, b, h) -
            fd_derivative(layer, j, {x.x() - h, x.y()}, a - 1, b, h)) /
           (2 * h);
  if (b > 0)
    return (fd_derivative(layer, j, {x.x(), x.y() + h}, a, b - 1, h) -
            fd_derivative(layer, j, {x.x(), x.y() - h}, a, b - 1, h)) /
           (2 * h);
  return eval_phi(layer, j, x.x(), x.y());
}

}  // namespace

TEST_CASE("init rejects bad arguments and respects bounds") {
  CHECK_THROWS(init_layer(0, kBox, 1, 1, 7));
  CHECK_THROWS(init_layer(8, kBox, 0, 1, 7));
  CHECK_THROWS(init_layer(8, kBox, 1, 0, 7));

  const double l = 3.0, r = 0.2;
  FeatureLayer layer = init_layer(256, kBox, l, r, 7);
  CHECK(layer.w.cwiseAbs().maxCoeff() <= l);
  for (int j = 0; j < layer.M; ++j) {
    // b_j = -w_j . xi_j with xi_j inside the enlarged box.
    const double bx = std::max(std::abs(kBox.x0 - r), std::abs(kBox.x1 + r));
    const double by = std::max(std::abs(kBox.y0 - r), std::abs(kBox.y1 + r));
    CHECK(std::abs(layer.b(j)) <=
          std::abs(layer.w(0, j)) * bx + std::abs(layer.w(1, j)) * by + 1e-15);
  }
}

TEST_CASE("seeded determinism") {
  FeatureLayer a = init_layer(64, kBox, 4, 0.3, 42);
  FeatureLayer b = init_layer(64, kBox, 4, 0.3, 42);
  FeatureLayer c = init_layer(64, kBox, 4, 0.3, 43);
  CHECK((a.w - b.w).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.b - b.b).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.w - c.w).cwiseAbs().maxCoeff() > 0.0);

  std::vector<Eigen::Vector2d> pts{{0.3, 0.6}, {0.45, 0.55}};
  const Eigen::MatrixXd da = eval_derivative_matrix(a, pts, 2, 1);
  const Eigen::MatrixXd db = eval_derivative_matrix(b, pts, 2, 1);
  CHECK((da - db).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("derivative order guard and trivial values") {
  FeatureLayer layer = init_layer(4, kBox, 1, 0.1, 1);
  std::vector<Eigen::Vector2d> pts{{0.3, 0.6}};
  CHECK_THROWS(eval_derivative_matrix(layer, pts, 3, 2));

  // Hand-built neuron: w = (1, 0), b = 0 -> d/dx phi at origin is sech^2(0) = 1.
  layer.w.col(0) << 1, 0;
  layer.b(0) = 0;
  std::vector<Eigen::Vector2d> origin{{0.0, 0.0}};
  CHECK(eval_derivative_matrix(layer, origin, 0, 0)(0, 0) == doctest::Approx(0.0));
  CHECK(eval_derivative_matrix(layer, origin, 1, 0)(0, 0) == doctest::Approx(1.0));
  CHECK(eval_derivative_matrix(layer, origin, 0, 1)(0, 0) == doctest::Approx(0.0));
}

TEST_CASE("all derivative orders match finite differences") {
  FeatureLayer layer = init_layer(12, kBox, 2.5, 0.2, 11);
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> ux(kBox.x0, kBox.x1), uy(kBox.y0, kBox.y1);
  std::vector<Eigen::Vector2d> pts;
  for (int k = 0; k < 10; ++k) pts.push_back({ux(gen), uy(gen)});

  for (int a = 0; a <= 4; ++a)
    for (int b = 0; a + b <= 4; ++b) {
      const Eigen::MatrixXd D = eval_derivative_matrix(layer, pts, a, b);
      const double h = (a + b <= 2) ? 1e-4 : 2e-3;
      const double tol = (a + b <= 2) ? 1e-4 : 1e-2;
      for (int k = 0; k < static_cast<int>(pts.size()); ++k)
        for (int j = 0; j < layer.M; ++j) {
          const double fd = fd_derivative(layer, j, pts[k], a, b, h);
          const double scale = std::max(1.0, std::abs(fd));
          CHECK(std::abs(D(k, j) - fd) / scale < tol);
        }
    }
}

TEST_CASE("laplacian and bilaplacian row identities are exact sums") {
  FeatureLayer layer = init_layer(32, kBox, 5, 0.3, 3);
  std::vector<Eigen::Vector2d> pts{{0.3, 0.6}, {0.33, 0.71}, {0.49, 0.51}};
  const Eigen::MatrixXd lap =
      eval_derivative_matrix(layer, pts, 2, 0) + eval_derivative_matrix(layer, pts, 0, 2);
  const Eigen::MatrixXd bilap = eval_derivative_matrix(layer, pts, 4, 0) +
                                2.0 * eval_derivative_matrix(layer, pts, 2, 2) +
                                eval_derivative_matrix(layer, pts, 0, 4);
  // Same expressions recomputed must be bit-identical (pure functions).
  const Eigen::MatrixXd lap2 =
      eval_derivative_matrix(layer, pts, 2, 0) + eval_derivative_matrix(layer, pts, 0, 2);
  const Eigen::MatrixXd bilap2 = eval_derivative_matrix(layer, pts, 4, 0) +
                                 2.0 * eval_derivative_matrix(layer, pts, 2, 2) +
                                 eval_derivative_matrix(layer, pts, 0, 4);
  CHECK((lap - lap2).cwiseAbs().maxCoeff() == 0.0);
  CHECK((bilap - bilap2).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("scale formula is proportional to sqrt(M) over enlarged diameter") {
  const double r = 0.2;
  const double d = std::hypot(kBox.width() + 2 * r, kBox.height() + 2 * r);
  CHECK(scale_from_constant(1.0, 1024, kBox, r) == doctest::Approx(32.0 / d));
  CHECK(scale_from_constant(0.5, 256, kBox, r) == doctest::Approx(8.0 / d));
}
