#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "ddelm/features.hpp"

namespace ddelm {

enum class ProblemKind { Poisson, VarCoefPoisson, Biharmonic };

/// 256-term random sine expansion; larger alpha gives a rougher field.
struct GrfField {
  Eigen::VectorXd amp;     // 256
  Eigen::Matrix2Xd freq;   // 2 x 256
  Eigen::VectorXd phase;   // 256, in (0, 2*pi)
  double alpha = 0;
  std::uint64_t seed = 0;
};

GrfField sample_grf(double alpha, std::uint64_t seed);
double eval_grf(const GrfField& g, const Eigen::Vector2d& x);
Eigen::Vector2d grad_grf(const GrfField& g, const Eigen::Vector2d& x);

/// rho(x) = tanh(grf(x)) + 1.1, bounded in (0.1, 2.1).
double eval_rho(const GrfField& g, const Eigen::Vector2d& x);
Eigen::Vector2d grad_rho(const GrfField& g, const Eigen::Vector2d& x);

using ScalarFn = std::function<double(const Eigen::Vector2d&)>;
using GradFn = std::function<Eigen::Vector2d(const Eigen::Vector2d&)>;

struct ProblemSpec {
  ProblemKind kind = ProblemKind::Poisson;
  std::string name;
  int components = 1;           // continuity/flux components per interface point
  int boundary_components = 1;  // boundary condition components
  ScalarFn forcing;
  std::array<ScalarFn, 2> boundary_data;  // g (or g1, g2)
  ScalarFn exact;                         // empty when no closed form is known
  GradFn exact_grad;
  std::optional<GrfField> rho;  // coefficient field for VarCoefPoisson
  double default_l = 32;

  bool has_exact() const { return static_cast<bool>(exact); }
  int max_derivative_order() const { return kind == ProblemKind::Biharmonic ? 4 : 2; }

  // Operator rows of the collocation system, one row per point.
  Eigen::MatrixXd interior_rows(const FeatureLayer& layer,
                                const std::vector<Eigen::Vector2d>& pts) const;
  Eigen::MatrixXd boundary_rows(const FeatureLayer& layer,
                                const std::vector<Eigen::Vector2d>& pts, int comp) const;
  Eigen::MatrixXd trace_rows(const FeatureLayer& layer, const std::vector<Eigen::Vector2d>& pts,
                             int comp) const;
  Eigen::MatrixXd flux_rows(const FeatureLayer& layer, const std::vector<Eigen::Vector2d>& pts,
                            const Eigen::Vector2d& normal, int comp) const;
};

struct ProblemParams {
  double alpha = 32.0;
  std::uint64_t forcing_seed = 2;
  std::uint64_t rho_seed = 3;
};

/// Known names: poisson_sinpi, poisson_sin2pi_exp, poisson_grf, varcoef_poisson,
/// biharmonic_sinpi.
ProblemSpec make_problem(const std::string& name, const ProblemParams& params = {});

}  // namespace ddelm
