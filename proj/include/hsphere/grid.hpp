#pragma once

#include <Eigen/Core>
#include <memory>

#include "hsphere/errors.hpp"

namespace hsphere {

// Discretization of the function domain. Functions are stored as value
// vectors on the grid points; the quadrature weights induce the inner
// product <f,g> = sum_j w_j f_j g_j used everywhere.
//
// Interval domains use strictly increasing abscissae with trapezoid weights;
// zone domains (discrete supports) use arbitrary point labels with positive
// zone measures as weights.
class Grid {
 public:
  Grid(Eigen::VectorXd points, Eigen::VectorXd weights);

  Eigen::Index size() const { return points_.size(); }
  const Eigen::VectorXd& points() const { return points_; }
  const Eigen::VectorXd& weights() const { return weights_; }
  const Eigen::VectorXd& sqrt_weights() const { return sqrt_weights_; }

  double inner(const Eigen::VectorXd& f, const Eigen::VectorXd& g) const;
  double norm(const Eigen::VectorXd& f) const;

  // Coefficients <-> weighted coordinates (where the inner product is the
  // plain dot product and symmetric operators are symmetric matrices).
  Eigen::VectorXd to_weighted(const Eigen::VectorXd& coef) const;
  Eigen::VectorXd from_weighted(const Eigen::VectorXd& tilde) const;

 private:
  Eigen::VectorXd points_;
  Eigen::VectorXd weights_;
  Eigen::VectorXd sqrt_weights_;
};

using GridPtr = std::shared_ptr<const Grid>;

// Uniform grid on [a, b] with trapezoid quadrature weights.
GridPtr trapezoid_grid(Eigen::Index n_points, double a = 0.0, double b = 1.0);

// Zone grid: points are 0..n-1, weights are the zone measures.
GridPtr zone_grid(Eigen::VectorXd measures);

bool same_grid(const Grid& a, const Grid& b);

inline void require_same_grid(const Grid& a, const Grid& b, const char* where) {
  if (!same_grid(a, b))
    throw DimensionError(std::string(where) + ": operands live on different grids");
}

}  // namespace hsphere
