#include "ddelm/metrics.hpp"

#include <cmath>
#include <stdexcept>

#include "ddelm/solvers.hpp"

namespace ddelm {

namespace {

struct FieldSamples {
  Eigen::VectorXd u, gx, gy;  // indexed by b * n + a
};

/// Batch evaluation of the field and its gradient on the uniform n x n grid,
/// grouped by owning subdomain so each group is one dense product.
FieldSamples sample_field(const ElmField& f, int n) {
  const double h = 1.0 / (n - 1);
  const int total = n * n;
  const int N = f.part.n_subdomains();
  std::vector<std::vector<int>> owned(N);
  for (int b = 0; b < n; ++b)
    for (int a = 0; a < n; ++a) {
      const Eigen::Vector2d x(a * h, b * h);
      owned[f.part.subdomain_of(x)].push_back(b * n + a);
    }

  FieldSamples out;
  out.u.resize(total);
  out.gx.resize(total);
  out.gy.resize(total);
  for (int i = 0; i < N; ++i) {
    const int k = static_cast<int>(owned[i].size());
    if (k == 0) continue;
    const FeatureLayer& layer = f.layers[i];
    Eigen::MatrixXd P(k, 2);
    for (int p = 0; p < k; ++p) {
      const int id = owned[i][p];
      P(p, 0) = (id % n) * h;
      P(p, 1) = (id / n) * h;
    }
    const Eigen::MatrixXd S =
        ((P * layer.w).rowwise() + layer.b.transpose()).array().tanh().matrix();
    const Eigen::MatrixXd C = (1.0 - S.array().square()).matrix();
    const Eigen::VectorXd& c = f.coeffs[i];
    const Eigen::VectorXd u = S * c;
    const Eigen::VectorXd gx = C * layer.w.row(0).transpose().cwiseProduct(c);
    const Eigen::VectorXd gy = C * layer.w.row(1).transpose().cwiseProduct(c);
    for (int p = 0; p < k; ++p) {
      out.u(owned[i][p]) = u(p);
      out.gx(owned[i][p]) = gx(p);
      out.gy(owned[i][p]) = gy(p);
    }
  }
  return out;
}

double trap_weight_1d(int a, int n, double h) { return (a == 0 || a == n - 1) ? h / 2 : h; }

ErrorReport errors_from_samples(const FieldSamples& fs, int n,
                                const std::function<void(int a, int b, double&, double&,
                                                         double&)>& ref_at,
                                const std::string& kind) {
  double num_l2 = 0, den_l2 = 0, num_g = 0, den_g = 0;
  for (int b = 0; b < n; ++b) {
    const double wb = trap_weight_1d(b, n, 1.0 / (n - 1));
    for (int a = 0; a < n; ++a) {
      const double w = wb * trap_weight_1d(a, n, 1.0 / (n - 1));
      double ru, rgx, rgy;
      ref_at(a, b, ru, rgx, rgy);
      const int id = b * n + a;
      const double du = fs.u(id) - ru;
      const double dgx = fs.gx(id) - rgx, dgy = fs.gy(id) - rgy;
      num_l2 += w * du * du;
      den_l2 += w * ru * ru;
      num_g += w * (dgx * dgx + dgy * dgy);
      den_g += w * (rgx * rgx + rgy * rgy);
    }
  }
  ErrorReport rep;
  rep.grid_n = n;
  rep.reference = kind;
  rep.l2 = den_l2 > 0 ? std::sqrt(num_l2 / den_l2) : std::sqrt(num_l2);
  const double den_h1 = den_l2 + den_g;
  rep.h1 = den_h1 > 0 ? std::sqrt((num_l2 + num_g) / den_h1) : std::sqrt(num_l2 + num_g);
  return rep;
}

}  // namespace

void ElmField::value_and_gradient(const Eigen::Vector2d& x, double& u,
                                  Eigen::Vector2d& grad) const {
  const int i = part.subdomain_of(x);
  const FeatureLayer& layer = layers[i];
  const Eigen::VectorXd z = layer.w.transpose() * x + layer.b;
  const Eigen::ArrayXd s = z.array().tanh();
  const Eigen::ArrayXd cd = (1.0 - s.square()) * coeffs[i].array();
  u = (s * coeffs[i].array()).sum();
  grad.x() = (cd * layer.w.row(0).transpose().array()).sum();
  grad.y() = (cd * layer.w.row(1).transpose().array()).sum();
}

double ElmField::value(const Eigen::Vector2d& x) const {
  double u;
  Eigen::Vector2d g;
  value_and_gradient(x, u, g);
  return u;
}

ErrorReport relative_errors(const ElmField& field, const ScalarFn& ref, const GradFn& ref_grad,
                            int grid_n) {
  if (grid_n < 64) throw std::invalid_argument("relative_errors: evaluation grid too coarse");
  const FieldSamples fs = sample_field(field, grid_n);
  const double h = 1.0 / (grid_n - 1);
  return errors_from_samples(
      fs, grid_n,
      [&](int a, int b, double& u, double& gx, double& gy) {
        const Eigen::Vector2d x(a * h, b * h);
        u = ref(x);
        const Eigen::Vector2d g = ref_grad(x);
        gx = g.x();
        gy = g.y();
      },
      "exact");
}

ErrorReport relative_errors(const ElmField& field, const GriddedField& ref) {
  if (ref.n < 64) throw std::invalid_argument("relative_errors: evaluation grid too coarse");
  const FieldSamples fs = sample_field(field, ref.n);
  return errors_from_samples(
      fs, ref.n,
      [&](int a, int b, double& u, double& gx, double& gy) {
        u = ref.u(a, b);
        gx = ref.gx(a, b);
        gy = ref.gy(a, b);
      },
      "finite-difference");
}

namespace {

/// 4th-order first derivative of a sampled line, one-sided at the ends.
Eigen::VectorXd line_derivative(const Eigen::VectorXd& f, double h) {
  const int n = static_cast<int>(f.size());
  Eigen::VectorXd d(n);
  const double c = 1.0 / (12 * h);
  d(0) = c * (-25 * f(0) + 48 * f(1) - 36 * f(2) + 16 * f(3) - 3 * f(4));
  d(1) = c * (-3 * f(0) - 10 * f(1) + 18 * f(2) - 6 * f(3) + f(4));
  for (int i = 2; i <= n - 3; ++i)
    d(i) = c * (f(i - 2) - 8 * f(i - 1) + 8 * f(i + 1) - f(i + 2));
  d(n - 2) = -c * (-3 * f(n - 1) - 10 * f(n - 2) + 18 * f(n - 3) - 6 * f(n - 4) + f(n - 5));
  d(n - 1) = -c * (-25 * f(n - 1) + 48 * f(n - 2) - 36 * f(n - 3) + 16 * f(n - 4) - 3 * f(n - 5));
  return d;
}

}  // namespace

GriddedField fd_reference(const ProblemSpec& problem, int grid_n) {
  if (problem.kind == ProblemKind::Biharmonic)
    throw std::invalid_argument("fd_reference: only the Poisson variants are supported");
  if (grid_n < 5) throw std::invalid_argument("fd_reference: grid too coarse");
  const int n = grid_n;
  const int ni = n - 2;  // interior per direction
  const double h = 1.0 / (n - 1);
  const double ih2 = 1.0 / (h * h);

  auto rho_at = [&](double x, double y) {
    return problem.kind == ProblemKind::VarCoefPoisson
               ? eval_rho(*problem.rho, Eigen::Vector2d(x, y))
               : 1.0;
  };
  // Midpoint coefficients around each interior node (east/west/north/south).
  Eigen::MatrixXd re(ni, ni), rw(ni, ni), rn(ni, ni), rs(ni, ni);
  for (int b = 1; b <= ni; ++b)
    for (int a = 1; a <= ni; ++a) {
      re(a - 1, b - 1) = rho_at((a + 0.5) * h, b * h);
      rw(a - 1, b - 1) = rho_at((a - 0.5) * h, b * h);
      rn(a - 1, b - 1) = rho_at(a * h, (b + 0.5) * h);
      rs(a - 1, b - 1) = rho_at(a * h, (b - 0.5) * h);
    }

  const ScalarFn& g = problem.boundary_data[0];
  auto id_of = [ni](int a, int b) { return (b - 1) * ni + (a - 1); };
  auto op = [&](const Eigen::VectorXd& v) {
    Eigen::VectorXd out(ni * ni);
    for (int b = 1; b <= ni; ++b)
      for (int a = 1; a <= ni; ++a) {
        const double uc = v(id_of(a, b));
        const double ue = (a + 1 <= ni) ? v(id_of(a + 1, b)) : 0.0;
        const double uw = (a - 1 >= 1) ? v(id_of(a - 1, b)) : 0.0;
        const double un = (b + 1 <= ni) ? v(id_of(a, b + 1)) : 0.0;
        const double us = (b - 1 >= 1) ? v(id_of(a, b - 1)) : 0.0;
        out(id_of(a, b)) = ih2 * (re(a - 1, b - 1) * (uc - ue) + rw(a - 1, b - 1) * (uc - uw) +
                                  rn(a - 1, b - 1) * (uc - un) + rs(a - 1, b - 1) * (uc - us));
      }
    return out;
  };

  Eigen::VectorXd rhs(ni * ni);
  for (int b = 1; b <= ni; ++b)
    for (int a = 1; a <= ni; ++a) {
      double v = problem.forcing(Eigen::Vector2d(a * h, b * h));
      if (a == 1) v += ih2 * rw(a - 1, b - 1) * g(Eigen::Vector2d(0.0, b * h));
      if (a == ni) v += ih2 * re(a - 1, b - 1) * g(Eigen::Vector2d(1.0, b * h));
      if (b == 1) v += ih2 * rs(a - 1, b - 1) * g(Eigen::Vector2d(a * h, 0.0));
      if (b == ni) v += ih2 * rn(a - 1, b - 1) * g(Eigen::Vector2d(a * h, 1.0));
      rhs(id_of(a, b)) = v;
    }

  CgResult res = cg(op, rhs, 1e-12, 100 * ni * ni);
  if (!res.converged) throw std::runtime_error("fd_reference: CG did not converge");

  GriddedField out;
  out.n = n;
  out.u.resize(n, n);
  for (int b = 0; b < n; ++b)
    for (int a = 0; a < n; ++a) {
      if (a == 0 || a == n - 1 || b == 0 || b == n - 1)
        out.u(a, b) = g(Eigen::Vector2d(a * h, b * h));
      else
        out.u(a, b) = res.x(id_of(a, b));
    }
  out.gx.resize(n, n);
  out.gy.resize(n, n);
  for (int b = 0; b < n; ++b) out.gx.col(b) = line_derivative(out.u.col(b), h);
  for (int a = 0; a < n; ++a) out.gy.row(a) = line_derivative(out.u.row(a).transpose(), h).transpose();
  return out;
}

}  // namespace ddelm
