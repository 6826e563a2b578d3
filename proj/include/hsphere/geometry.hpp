#pragma once

#include <Eigen/Core>
#include <optional>

#include "hsphere/grid.hpp"

namespace hsphere {

// Numerical guards shared by the geometry kernels.
inline constexpr double kUnitNormTol = 1e-10;    // |<p,p>-1| for sphere points
inline constexpr double kTangencyTol = 1e-8;     // |<v,p>| <= tol*(1+|v|)
inline constexpr double kSmallAngle = 1e-12;     // exp/log removable singularity
inline constexpr double kAntipodalGuard = 1e-6;  // log map defined for rho < pi - guard
inline constexpr double kHessianSeriesAngle = 1e-6;  // theta*cot(theta) series switch

// Unit-norm element of the discretized Hilbert sphere.
struct SpherePoint {
  GridPtr grid;
  Eigen::VectorXd coef;
};

// Element of the tangent space at `base`: orthogonal to base.coef under the
// grid inner product.
struct TangentVector {
  SpherePoint base;
  Eigen::VectorXd coef;
};

// Symmetric linear operator on the tangent space at `base`, stored as a
// symmetric matrix acting on weighted coordinates (w^{1/2}-scaled values).
// The base direction lies in the kernel. When the operator is an explicit
// low-rank sum, `factors` holds F with mat = F F^T (weighted coordinates),
// which the eigensolver exploits via the Gram reduction.
struct TangentOperator {
  SpherePoint base;
  Eigen::MatrixXd mat;
  std::optional<Eigen::MatrixXd> factors;
};

// Checked constructors. The *_normalized / *_projected variants repair the
// invariant instead of rejecting, and are what the iterative code uses to
// stop numerical drift.
SpherePoint sphere_point(GridPtr grid, Eigen::VectorXd coef);
SpherePoint sphere_point_normalized(GridPtr grid, Eigen::VectorXd coef);
TangentVector tangent_vector(SpherePoint base, Eigen::VectorXd coef);
TangentVector tangent_projected(SpherePoint base, Eigen::VectorXd coef);

double inner(const Grid& grid, const Eigen::VectorXd& f, const Eigen::VectorXd& g);
double inner(const TangentVector& u, const TangentVector& v);
double tangent_norm(const TangentVector& v);

// Great-circle distance arccos(<p,q>), clamped against roundoff.
double geodesic_distance(const SpherePoint& p, const SpherePoint& q);

// exp_p v = cos(|v|) p + sin(|v|) v / |v|; |v| = 0 returns p.
SpherePoint exp_map(const SpherePoint& p, const TangentVector& v);

// log_p x = rho * u / |u| with u = x - <p,x> p; undefined at the antipode.
TangentVector log_map(const SpherePoint& p, const SpherePoint& x);

// Levi-Civita transport of v (tangent at x) along the geodesic from x to y.
TangentVector parallel_transport(const SpherePoint& x, const SpherePoint& y,
                                 const TangentVector& v);

// Operator transport P_x^y A P_y^x (conjugation by the isometry).
TangentOperator transport_operator(const SpherePoint& x, const SpherePoint& y,
                                   const TangentOperator& a);

// Ambient rotation taking the normalized constant function psi_1 to q along
// the shortest geodesic; acts as the identity on the orthogonal complement
// of span{psi_1, q}.
Eigen::VectorXd rotation_operator(const SpherePoint& q, const Eigen::VectorXd& p);

// Normalized constant function on the grid (psi_1).
SpherePoint constant_point(GridPtr grid);

// Hessian of v -> rho^2(x, exp_mu v) at v = 0, as an operator on T_mu:
//   u -> 2<u,e1>e1 + 2 theta cot(theta) (u - <u,e1>e1),  e1 = log_mu x / theta.
// theta -> 0 degenerates to 2 Id on the tangent space.
TangentOperator hessian_operator(const SpherePoint& x, const SpherePoint& mu);

// scale * identity on the tangent space at base.
TangentOperator scaled_tangent_identity(SpherePoint base, double scale);

TangentVector apply(const TangentOperator& a, const TangentVector& v);

// Orthonormal basis Q (size m x (m-1), weighted coordinates) of the tangent
// space at base, built from one Householder reflection.
Eigen::MatrixXd tangent_basis(const SpherePoint& base);

// Transport matrix in weighted coordinates, including the projections onto
// the two tangent spaces: maps T_x to T_y isometrically.
Eigen::MatrixXd transport_matrix(const SpherePoint& x, const SpherePoint& y);

}  // namespace hsphere
