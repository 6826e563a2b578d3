#include "hsphere/grid.hpp"

#include <cmath>

namespace hsphere {

Grid::Grid(Eigen::VectorXd points, Eigen::VectorXd weights)
    : points_(std::move(points)), weights_(std::move(weights)) {
  if (points_.size() != weights_.size())
    throw DimensionError("Grid: points and weights differ in length");
  if (points_.size() == 0) throw DimensionError("Grid: empty");
  if ((weights_.array() <= 0.0).any())
    throw DomainError("Grid: quadrature weights must be positive");
  sqrt_weights_ = weights_.array().sqrt();
}

double Grid::inner(const Eigen::VectorXd& f, const Eigen::VectorXd& g) const {
  if (f.size() != size() || g.size() != size())
    throw DimensionError("inner: vector length does not match grid size");
  return (weights_.array() * f.array() * g.array()).sum();
}

double Grid::norm(const Eigen::VectorXd& f) const { return std::sqrt(inner(f, f)); }

Eigen::VectorXd Grid::to_weighted(const Eigen::VectorXd& coef) const {
  if (coef.size() != size())
    throw DimensionError("to_weighted: vector length does not match grid size");
  return sqrt_weights_.cwiseProduct(coef);
}

Eigen::VectorXd Grid::from_weighted(const Eigen::VectorXd& tilde) const {
  if (tilde.size() != size())
    throw DimensionError("from_weighted: vector length does not match grid size");
  return tilde.cwiseQuotient(sqrt_weights_);
}

GridPtr trapezoid_grid(Eigen::Index n_points, double a, double b) {
  if (n_points < 2) throw DimensionError("trapezoid_grid: need at least 2 points");
  if (!(b > a)) throw DomainError("trapezoid_grid: need b > a");
  const double h = (b - a) / static_cast<double>(n_points - 1);
  Eigen::VectorXd pts(n_points), w(n_points);
  for (Eigen::Index j = 0; j < n_points; ++j) {
    pts[j] = a + h * static_cast<double>(j);
    w[j] = h;
  }
  w[0] *= 0.5;
  w[n_points - 1] *= 0.5;
  return std::make_shared<const Grid>(std::move(pts), std::move(w));
}

GridPtr zone_grid(Eigen::VectorXd measures) {
  Eigen::VectorXd pts(measures.size());
  for (Eigen::Index j = 0; j < pts.size(); ++j) pts[j] = static_cast<double>(j);
  return std::make_shared<const Grid>(std::move(pts), std::move(measures));
}

bool same_grid(const Grid& a, const Grid& b) {
  if (&a == &b) return true;
  return a.size() == b.size() && a.points() == b.points() && a.weights() == b.weights();
}

}  // namespace hsphere
