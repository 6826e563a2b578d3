#pragma once

#include <Eigen/Core>
#include <vector>

#include "hsphere/geometry.hpp"

namespace hsphere {

inline constexpr double kEigenvalueFloorRel = 1e-12;  // relative to lambda_1
inline constexpr double kMinHessianEigenvalue = 1e-8;

// A sample of sphere points sharing one grid; points are the columns.
class SampleSet {
 public:
  SampleSet(GridPtr grid, Eigen::MatrixXd coefs);
  explicit SampleSet(const std::vector<SpherePoint>& points);

  Eigen::Index size() const { return coefs_.cols(); }
  const GridPtr& grid() const { return grid_; }
  const Eigen::MatrixXd& coefs() const { return coefs_; }
  SpherePoint point(Eigen::Index i) const { return SpherePoint{grid_, coefs_.col(i)}; }

  SampleSet resample(const std::vector<Eigen::Index>& indices) const;

 private:
  GridPtr grid_;
  Eigen::MatrixXd coefs_;  // m x n, each column unit norm
};

struct SupportCheck {
  double diameter = 0.0;
  bool satisfied = true;  // diameter <= pi/2
};

// Max pairwise geodesic distance and the concentration flag. Estimation
// proceeds either way; reports surface the flag.
SupportCheck check_support(const SampleSet& sample);

struct FrechetMeanOptions {
  double tol = 1e-10;  // on the norm of the mean tangent vector
  int max_iter = 200;
};

struct FrechetMeanResult {
  SpherePoint mean;
  int iterations = 0;
  double final_gradient_norm = 0.0;
  double functional_value = 0.0;  // M_n(mean)
};

// Sample Frechet (intrinsic) mean by Karcher fixed-point iteration
// mu <- exp_mu(mean of log_mu X_i), initialized at the extrinsic mean,
// with step halving whenever the functional fails to decrease.
FrechetMeanResult frechet_mean(const SampleSet& sample, const FrechetMeanOptions& options = {});

// Mean of squared geodesic distances M_n(p).
double frechet_functional(const SampleSet& sample, const SpherePoint& p);

// V_i = log_mean X_i; names the offending index on an antipodal point.
std::vector<TangentVector> tangent_vectors(const SampleSet& sample, const SpherePoint& mean);

// (1/n) sum V_i (x) V_i, kept in factored form for the Gram eigensolver.
TangentOperator covariance_operator(const std::vector<TangentVector>& vectors);

// Average Hessian (1/n) sum Lambda_{X_i 1} at the given base point.
TangentOperator lambda_hat(const SampleSet& sample, const SpherePoint& mean);

// Sandwich covariance 4 Lambda^{-1} G Lambda^{-1} of sqrt(n) log_mean(mu_hat);
// inversion is done in an orthonormal basis of the tangent space.
TangentOperator asymptotic_covariance(const SampleSet& sample, const SpherePoint& mean);

struct EigenSystem {
  std::vector<double> values;          // nonincreasing, nonnegative
  std::vector<TangentVector> vectors;  // orthonormal at the operator base
};

// Leading eigenpairs. Uses the n x n Gram reduction when the operator is an
// explicit rank-<=n sum with n below the grid size, otherwise a dense
// symmetric solve in the tangent basis.
EigenSystem eigen(const TangentOperator& a, Eigen::Index max_rank);

// Cumulative eigenvalue fractions (FVE curve) of a spectrum.
std::vector<double> fve_fractions(const std::vector<double>& values);

// Smallest K with cumulative fraction >= r, r in (0,1).
int select_K(const std::vector<double>& values, double r);

// Empirical H-operator of the covariance CLT: u -> (1/n) sum (Lambda_{X_i 1} u) (x) V_i,
// with (a (x) b) h = <a,h> b. The result is generally not symmetric, so it is
// returned as a plain tangent-space map.
class HOperator {
 public:
  HOperator(SpherePoint base, Eigen::MatrixXd v_tilde, Eigen::MatrixXd e_tilde,
            Eigen::VectorXd a_coeff);

  // Matrix (weighted coordinates) of the operator h -> <Lambda u, h> V averaged
  // over the sample, for the given tangent direction u.
  Eigen::MatrixXd matrix(const TangentVector& u) const;
  TangentVector apply_to(const TangentVector& u, const TangentVector& h) const;
  const SpherePoint& base() const { return base_; }

 private:
  SpherePoint base_;
  Eigen::MatrixXd v_tilde_;  // columns: weighted tangent vectors V_i
  Eigen::MatrixXd e_tilde_;  // columns: weighted unit directions e_i (0 when theta_i = 0)
  Eigen::VectorXd a_coeff_;  // theta_i cot(theta_i)
};

HOperator h_operator(const SampleSet& sample, const SpherePoint& mean);

// Covariance at mean_hat parallel-transported to the reference point.
TangentOperator transported_covariance(const SampleSet& sample, const SpherePoint& mean_hat,
                                       const SpherePoint& reference);

// Extrinsic mean: normalized ambient average.
SpherePoint extrinsic_mean(const SampleSet& sample);

namespace detail {

// Weighted-coordinate log maps of all sample points at `base`, as columns.
Eigen::MatrixXd log_matrix_weighted(const SampleSet& sample, const SpherePoint& base);

// Deterministic pairwise (binary tree) column sum, independent of threading.
Eigen::VectorXd pairwise_column_sum(const Eigen::MatrixXd& columns);

double pairwise_sum(const Eigen::VectorXd& values);

}  // namespace detail

}  // namespace hsphere
