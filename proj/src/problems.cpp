#include "ddelm/problems.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace ddelm {

namespace {
constexpr int kGrfTerms = 256;
constexpr double kPi = std::numbers::pi;
}  // namespace

GrfField sample_grf(double alpha, std::uint64_t seed) {
  if (alpha <= 0) throw std::invalid_argument("sample_grf: alpha must be positive");
  GrfField g;
  g.alpha = alpha;
  g.seed = seed;
  g.amp.resize(kGrfTerms);
  g.freq.resize(2, kGrfTerms);
  g.phase.resize(kGrfTerms);

  std::mt19937_64 gen(seed);
  std::normal_distribution<double> na(0.0, alpha * alpha / 16.0);  // sqrt(alpha^4/256)
  std::normal_distribution<double> nw(0.0, alpha);
  std::uniform_real_distribution<double> ub(0.0, 2.0 * kPi);
  for (int i = 0; i < kGrfTerms; ++i) {
    g.amp(i) = na(gen);
    g.freq(0, i) = nw(gen);
    g.freq(1, i) = nw(gen);
    double b;
    do {
      b = ub(gen);
    } while (b <= 0.0);
    g.phase(i) = b;
  }
  return g;
}

double eval_grf(const GrfField& g, const Eigen::Vector2d& x) {
  double v = 0.0;
  for (int i = 0; i < kGrfTerms; ++i)
    v += g.amp(i) * std::sin(g.freq(0, i) * x.x() + g.freq(1, i) * x.y() + g.phase(i));
  return v;
}

Eigen::Vector2d grad_grf(const GrfField& g, const Eigen::Vector2d& x) {
  Eigen::Vector2d grad = Eigen::Vector2d::Zero();
  for (int i = 0; i < kGrfTerms; ++i) {
    const double c =
        g.amp(i) * std::cos(g.freq(0, i) * x.x() + g.freq(1, i) * x.y() + g.phase(i));
    grad.x() += c * g.freq(0, i);
    grad.y() += c * g.freq(1, i);
  }
  return grad;
}

double eval_rho(const GrfField& g, const Eigen::Vector2d& x) {
  return std::tanh(eval_grf(g, x)) + 1.1;
}

Eigen::Vector2d grad_rho(const GrfField& g, const Eigen::Vector2d& x) {
  const double t = std::tanh(eval_grf(g, x));
  return (1.0 - t * t) * grad_grf(g, x);
}

Eigen::MatrixXd ProblemSpec::interior_rows(const FeatureLayer& layer,
                                           const std::vector<Eigen::Vector2d>& pts) const {
  switch (kind) {
    case ProblemKind::Poisson:
      return -(eval_derivative_matrix(layer, pts, 2, 0) +
               eval_derivative_matrix(layer, pts, 0, 2));
    case ProblemKind::VarCoefPoisson: {
      // -div(rho grad u) = -rho lap(u) - grad(rho) . grad(u)
      Eigen::MatrixXd lap = eval_derivative_matrix(layer, pts, 2, 0) +
                            eval_derivative_matrix(layer, pts, 0, 2);
      Eigen::MatrixXd gx = eval_derivative_matrix(layer, pts, 1, 0);
      Eigen::MatrixXd gy = eval_derivative_matrix(layer, pts, 0, 1);
      Eigen::MatrixXd rows(pts.size(), layer.M);
      for (int k = 0; k < static_cast<int>(pts.size()); ++k) {
        const double r = eval_rho(*rho, pts[k]);
        const Eigen::Vector2d gr = grad_rho(*rho, pts[k]);
        rows.row(k) = -r * lap.row(k) - gr.x() * gx.row(k) - gr.y() * gy.row(k);
      }
      return rows;
    }
    case ProblemKind::Biharmonic:
      return eval_derivative_matrix(layer, pts, 4, 0) +
             2.0 * eval_derivative_matrix(layer, pts, 2, 2) +
             eval_derivative_matrix(layer, pts, 0, 4);
  }
  throw std::logic_error("interior_rows: unknown kind");
}

Eigen::MatrixXd ProblemSpec::boundary_rows(const FeatureLayer& layer,
                                           const std::vector<Eigen::Vector2d>& pts,
                                           int comp) const {
  return trace_rows(layer, pts, comp);
}

Eigen::MatrixXd ProblemSpec::trace_rows(const FeatureLayer& layer,
                                        const std::vector<Eigen::Vector2d>& pts, int comp) const {
  if (comp == 0) return eval_derivative_matrix(layer, pts, 0, 0);
  if (comp == 1 && kind == ProblemKind::Biharmonic)
    return eval_derivative_matrix(layer, pts, 2, 0) + eval_derivative_matrix(layer, pts, 0, 2);
  throw std::invalid_argument("trace_rows: invalid component");
}

Eigen::MatrixXd ProblemSpec::flux_rows(const FeatureLayer& layer,
                                       const std::vector<Eigen::Vector2d>& pts,
                                       const Eigen::Vector2d& normal, int comp) const {
  if (comp == 0) {
    Eigen::MatrixXd rows = normal.x() * eval_derivative_matrix(layer, pts, 1, 0) +
                           normal.y() * eval_derivative_matrix(layer, pts, 0, 1);
    if (kind == ProblemKind::VarCoefPoisson) {
      // Conormal flux rho du/dn.
      for (int k = 0; k < static_cast<int>(pts.size()); ++k)
        rows.row(k) *= eval_rho(*rho, pts[k]);
    }
    return rows;
  }
  if (comp == 1 && kind == ProblemKind::Biharmonic) {
    return normal.x() * (eval_derivative_matrix(layer, pts, 3, 0) +
                         eval_derivative_matrix(layer, pts, 1, 2)) +
           normal.y() * (eval_derivative_matrix(layer, pts, 2, 1) +
                         eval_derivative_matrix(layer, pts, 0, 3));
  }
  throw std::invalid_argument("flux_rows: invalid component");
}

ProblemSpec make_problem(const std::string& name, const ProblemParams& params) {
  ProblemSpec p;
  p.name = name;
  if (name == "poisson_sinpi") {
    p.kind = ProblemKind::Poisson;
    p.exact = [](const Eigen::Vector2d& x) { return std::sin(kPi * x.x()) * std::sin(kPi * x.y()); };
    p.exact_grad = [](const Eigen::Vector2d& x) {
      return Eigen::Vector2d(kPi * std::cos(kPi * x.x()) * std::sin(kPi * x.y()),
                             kPi * std::sin(kPi * x.x()) * std::cos(kPi * x.y()));
    };
    p.forcing = [](const Eigen::Vector2d& x) {
      return 2.0 * kPi * kPi * std::sin(kPi * x.x()) * std::sin(kPi * x.y());
    };
    p.boundary_data[0] = p.exact;
  } else if (name == "poisson_sin2pi_exp") {
    p.kind = ProblemKind::Poisson;
    p.exact = [](const Eigen::Vector2d& x) { return std::sin(2 * kPi * x.x()) * std::exp(x.y()); };
    p.exact_grad = [](const Eigen::Vector2d& x) {
      return Eigen::Vector2d(2 * kPi * std::cos(2 * kPi * x.x()) * std::exp(x.y()),
                             std::sin(2 * kPi * x.x()) * std::exp(x.y()));
    };
    p.forcing = [](const Eigen::Vector2d& x) {
      return (4.0 * kPi * kPi - 1.0) * std::sin(2 * kPi * x.x()) * std::exp(x.y());
    };
    p.boundary_data[0] = p.exact;
  } else if (name == "poisson_grf") {
    p.kind = ProblemKind::Poisson;
    GrfField f = sample_grf(params.alpha, params.forcing_seed);
    p.forcing = [f](const Eigen::Vector2d& x) { return eval_grf(f, x); };
    p.boundary_data[0] = [](const Eigen::Vector2d&) { return 0.0; };
  } else if (name == "varcoef_poisson") {
    p.kind = ProblemKind::VarCoefPoisson;
    p.rho = sample_grf(params.alpha, params.rho_seed);
    p.forcing = [](const Eigen::Vector2d&) { return 1.0; };
    p.boundary_data[0] = [](const Eigen::Vector2d&) { return 0.0; };
  } else if (name == "biharmonic_sinpi") {
    p.kind = ProblemKind::Biharmonic;
    p.components = 2;
    p.boundary_components = 2;
    p.default_l = 64;
    p.exact = [](const Eigen::Vector2d& x) { return std::sin(kPi * x.x()) * std::sin(kPi * x.y()); };
    p.exact_grad = [](const Eigen::Vector2d& x) {
      return Eigen::Vector2d(kPi * std::cos(kPi * x.x()) * std::sin(kPi * x.y()),
                             kPi * std::sin(kPi * x.x()) * std::cos(kPi * x.y()));
    };
    p.forcing = [](const Eigen::Vector2d& x) {
      return 4.0 * kPi * kPi * kPi * kPi * std::sin(kPi * x.x()) * std::sin(kPi * x.y());
    };
    p.boundary_data[0] = p.exact;  // vanishes on the outer boundary
    p.boundary_data[1] = [](const Eigen::Vector2d& x) {
      return -2.0 * kPi * kPi * std::sin(kPi * x.x()) * std::sin(kPi * x.y());
    };
  } else {
    throw std::invalid_argument("make_problem: unknown problem '" + name + "'");
  }
  return p;
}

}  // namespace ddelm
