#include "hsphere/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace hsphere {

namespace {

double clamp_cos(double c) { return std::min(1.0, std::max(-1.0, c)); }

// theta * cot(theta) with the removable singularity filled by its series.
double theta_cot_theta(double theta) {
  if (theta < kHessianSeriesAngle) return 1.0 - theta * theta / 3.0;
  return theta * std::cos(theta) / std::sin(theta);
}

void require_base_match(const SpherePoint& p, const TangentVector& v, const char* where) {
  require_same_grid(*p.grid, *v.base.grid, where);
  if ((p.coef - v.base.coef).cwiseAbs().maxCoeff() > 1e-9)
    throw DimensionError(std::string(where) + ": tangent vector is based at a different point");
}

}  // namespace

SpherePoint sphere_point(GridPtr grid, Eigen::VectorXd coef) {
  if (!grid) throw DimensionError("sphere_point: null grid");
  const double sq = grid->inner(coef, coef);
  if (std::abs(sq - 1.0) > kUnitNormTol)
    throw DomainError("sphere_point: coefficients are not unit-norm under the grid inner product");
  return SpherePoint{std::move(grid), std::move(coef)};
}

SpherePoint sphere_point_normalized(GridPtr grid, Eigen::VectorXd coef) {
  if (!grid) throw DimensionError("sphere_point_normalized: null grid");
  const double nrm = grid->norm(coef);
  if (!(nrm > 0.0))
    throw DomainError("sphere_point_normalized: cannot normalize the zero function");
  return SpherePoint{std::move(grid), coef / nrm};
}

TangentVector tangent_vector(SpherePoint base, Eigen::VectorXd coef) {
  const double dot = base.grid->inner(coef, base.coef);
  const double nrm = base.grid->norm(coef);
  if (std::abs(dot) > kTangencyTol * (1.0 + nrm))
    throw DomainError("tangent_vector: coefficients are not tangent at the base point");
  return TangentVector{std::move(base), std::move(coef)};
}

TangentVector tangent_projected(SpherePoint base, Eigen::VectorXd coef) {
  const double dot = base.grid->inner(coef, base.coef);
  coef -= dot * base.coef;
  return TangentVector{std::move(base), std::move(coef)};
}

double inner(const Grid& grid, const Eigen::VectorXd& f, const Eigen::VectorXd& g) {
  return grid.inner(f, g);
}

double inner(const TangentVector& u, const TangentVector& v) {
  require_same_grid(*u.base.grid, *v.base.grid, "inner");
  return u.base.grid->inner(u.coef, v.coef);
}

double tangent_norm(const TangentVector& v) { return v.base.grid->norm(v.coef); }

double geodesic_distance(const SpherePoint& p, const SpherePoint& q) {
  require_same_grid(*p.grid, *q.grid, "geodesic_distance");
  const double c = p.grid->inner(p.coef, q.coef);
  // arccos loses every significant digit as c -> 1; the chord form
  // 2 asin(|p-q|/2) is exact there and agrees with arccos at the switch.
  if (c >= 1.0 - 1e-10)
    return 2.0 * std::asin(std::min(1.0, 0.5 * p.grid->norm(p.coef - q.coef)));
  return std::acos(clamp_cos(c));
}

SpherePoint exp_map(const SpherePoint& p, const TangentVector& v) {
  require_base_match(p, v, "exp_map");
  const double nrm = tangent_norm(v);
  if (nrm < kSmallAngle) return p;
  Eigen::VectorXd coef = std::cos(nrm) * p.coef + (std::sin(nrm) / nrm) * v.coef;
  return sphere_point_normalized(p.grid, std::move(coef));
}

TangentVector log_map(const SpherePoint& p, const SpherePoint& x) {
  require_same_grid(*p.grid, *x.grid, "log_map");
  const double rho = geodesic_distance(p, x);
  if (rho < kSmallAngle) return TangentVector{p, Eigen::VectorXd::Zero(p.coef.size())};
  if (rho > M_PI - kAntipodalGuard)
    throw DomainError("log map undefined at antipode");
  const double c = p.grid->inner(p.coef, x.coef);
  Eigen::VectorXd u = x.coef - c * p.coef;
  const double unorm = p.grid->norm(u);
  if (unorm == 0.0) return TangentVector{p, Eigen::VectorXd::Zero(p.coef.size())};
  u *= rho / unorm;
  return tangent_projected(p, std::move(u));
}

Eigen::MatrixXd transport_matrix(const SpherePoint& x, const SpherePoint& y) {
  require_same_grid(*x.grid, *y.grid, "transport_matrix");
  const Grid& grid = *x.grid;
  const Eigen::Index m = grid.size();
  const double rho = geodesic_distance(x, y);
  if (rho > M_PI - kAntipodalGuard)
    throw DomainError("parallel transport undefined between antipodal points");
  const Eigen::VectorXd xt = grid.to_weighted(x.coef);
  const Eigen::VectorXd yt = grid.to_weighted(y.coef);
  Eigen::MatrixXd t = Eigen::MatrixXd::Identity(m, m);
  if (rho >= kSmallAngle) {
    const Eigen::VectorXd l1 = grid.to_weighted(log_map(x, y).coef);
    const Eigen::VectorXd l2 = grid.to_weighted(log_map(y, x).coef);
    t -= ((l1 + l2) / (rho * rho)) * l1.transpose();
  }
  // Project through both tangent spaces: T = P_y (I - (l1+l2) l1^T / rho^2) P_x.
  t -= yt * (yt.transpose() * t);
  t -= (t * xt) * xt.transpose();
  return t;
}

TangentVector parallel_transport(const SpherePoint& x, const SpherePoint& y,
                                 const TangentVector& v) {
  require_base_match(x, v, "parallel_transport");
  require_same_grid(*x.grid, *y.grid, "parallel_transport");
  const Grid& grid = *x.grid;
  const double rho = geodesic_distance(x, y);
  if (rho > M_PI - kAntipodalGuard)
    throw DomainError("parallel transport undefined between antipodal points");
  if (rho < kSmallAngle) return TangentVector{y, v.coef};
  const TangentVector lxy = log_map(x, y);
  const TangentVector lyx = log_map(y, x);
  const double along = grid.inner(lxy.coef, v.coef) / (rho * rho);
  Eigen::VectorXd coef = v.coef - along * (lxy.coef + lyx.coef);
  return tangent_projected(y, std::move(coef));
}

TangentOperator transport_operator(const SpherePoint& x, const SpherePoint& y,
                                   const TangentOperator& a) {
  require_base_match(x, TangentVector{a.base, a.base.coef}, "transport_operator");
  const Eigen::MatrixXd t = transport_matrix(x, y);
  Eigen::MatrixXd mat = t * a.mat * t.transpose();
  mat = 0.5 * (mat + mat.transpose()).eval();
  std::optional<Eigen::MatrixXd> factors;
  if (a.factors) factors = t * (*a.factors);
  return TangentOperator{y, std::move(mat), std::move(factors)};
}

SpherePoint constant_point(GridPtr grid) {
  Eigen::VectorXd ones = Eigen::VectorXd::Ones(grid->size());
  return sphere_point_normalized(std::move(grid), std::move(ones));
}

Eigen::VectorXd rotation_operator(const SpherePoint& q, const Eigen::VectorXd& p) {
  const Grid& grid = *q.grid;
  if (p.size() != grid.size())
    throw DimensionError("rotation_operator: vector length does not match grid size");
  const SpherePoint psi1 = constant_point(q.grid);
  const double c = clamp_cos(grid.inner(psi1.coef, q.coef));
  if (c < -1.0 + kAntipodalGuard)
    throw DomainError("rotation_operator: q is antipodal to the constant function");
  const double s2 = 1.0 - c * c;
  if (s2 < kSmallAngle * kSmallAngle) return p;  // q = psi_1: identity
  const double rho_q = std::acos(c);
  const Eigen::VectorXd u = (psi1.coef - c * q.coef) / std::sqrt(s2);
  const double up = grid.inner(u, p);
  const double qp = grid.inner(q.coef, p);
  return p + std::sin(rho_q) * (up * q.coef - qp * u) +
         (std::cos(rho_q) - 1.0) * (qp * q.coef + up * u);
}

Eigen::MatrixXd tangent_basis(const SpherePoint& base) {
  const Grid& grid = *base.grid;
  const Eigen::Index m = grid.size();
  Eigen::VectorXd h = grid.to_weighted(base.coef);
  // Householder vector mapping +/- e1 to the weighted base direction.
  h[0] += (h[0] >= 0.0 ? 1.0 : -1.0) * h.norm();
  const double hh = h.squaredNorm();
  Eigen::MatrixXd q(m, m - 1);
  for (Eigen::Index j = 1; j < m; ++j) {
    q.col(j - 1) = -(2.0 * h[j] / hh) * h;
    q(j, j - 1) += 1.0;
  }
  return q;
}

TangentOperator scaled_tangent_identity(SpherePoint base, double scale) {
  const Grid& grid = *base.grid;
  const Eigen::VectorXd bt = grid.to_weighted(base.coef);
  Eigen::MatrixXd mat =
      scale * (Eigen::MatrixXd::Identity(grid.size(), grid.size()) - bt * bt.transpose());
  return TangentOperator{std::move(base), std::move(mat), std::nullopt};
}

TangentOperator hessian_operator(const SpherePoint& x, const SpherePoint& mu) {
  require_same_grid(*x.grid, *mu.grid, "hessian_operator");
  const double theta = geodesic_distance(x, mu);
  if (theta >= M_PI - kAntipodalGuard)
    throw DomainError("hessian_operator: x is antipodal to the base point");
  if (theta < kSmallAngle) return scaled_tangent_identity(mu, 2.0);
  const Grid& grid = *mu.grid;
  const Eigen::VectorXd bt = grid.to_weighted(mu.coef);
  const Eigen::VectorXd e1 = grid.to_weighted(log_map(mu, x).coef) / theta;
  const double a = theta_cot_theta(theta);
  Eigen::MatrixXd mat =
      2.0 * a * (Eigen::MatrixXd::Identity(grid.size(), grid.size()) - bt * bt.transpose());
  mat += 2.0 * (1.0 - a) * e1 * e1.transpose();
  return TangentOperator{mu, std::move(mat), std::nullopt};
}

TangentVector apply(const TangentOperator& a, const TangentVector& v) {
  require_base_match(a.base, v, "apply");
  const Grid& grid = *a.base.grid;
  Eigen::VectorXd out = grid.from_weighted(a.mat * grid.to_weighted(v.coef));
  return tangent_projected(a.base, std::move(out));
}

}  // namespace hsphere
