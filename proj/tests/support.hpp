#pragma once

#include <random>

#include "hsphere/estimation.hpp"

// Test-side random elements. These use <random> directly and are independent
// of the library's own RNG machinery.
namespace testsupport {

using namespace hsphere;

inline SpherePoint random_point(const GridPtr& grid, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Eigen::VectorXd coef(grid->size());
  for (Eigen::Index j = 0; j < coef.size(); ++j) coef[j] = normal(rng);
  return sphere_point_normalized(grid, std::move(coef));
}

inline TangentVector random_tangent(const SpherePoint& base, double norm,
                                    std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Eigen::VectorXd coef(base.grid->size());
  for (;;) {
    for (Eigen::Index j = 0; j < coef.size(); ++j) coef[j] = normal(rng);
    TangentVector v = tangent_projected(base, coef);
    const double current = tangent_norm(v);
    if (current > 1e-8) {
      v.coef *= norm / current;
      return v;
    }
  }
}

// A sphere point at geodesic distance theta from base, in a random direction.
inline SpherePoint point_at_distance(const SpherePoint& base, double theta,
                                     std::mt19937_64& rng) {
  return exp_map(base, random_tangent(base, theta, rng));
}

}  // namespace testsupport
