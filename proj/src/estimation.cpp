#include "hsphere/estimation.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace hsphere {

namespace detail {

Eigen::MatrixXd log_matrix_weighted(const SampleSet& sample, const SpherePoint& base) {
  const Grid& grid = *sample.grid();
  Eigen::MatrixXd out(grid.size(), sample.size());
  for (Eigen::Index i = 0; i < sample.size(); ++i) {
    TangentVector v = log_map(base, sample.point(i));
    out.col(i) = grid.to_weighted(v.coef);
  }
  return out;
}

namespace {

Eigen::VectorXd pairwise_column_sum_range(const Eigen::MatrixXd& columns, Eigen::Index begin,
                                          Eigen::Index end) {
  constexpr Eigen::Index kLeaf = 8;
  if (end - begin <= kLeaf) {
    Eigen::VectorXd acc = columns.col(begin);
    for (Eigen::Index i = begin + 1; i < end; ++i) acc += columns.col(i);
    return acc;
  }
  const Eigen::Index mid = begin + (end - begin) / 2;
  return pairwise_column_sum_range(columns, begin, mid) +
         pairwise_column_sum_range(columns, mid, end);
}

double pairwise_sum_range(const Eigen::VectorXd& values, Eigen::Index begin, Eigen::Index end) {
  constexpr Eigen::Index kLeaf = 8;
  if (end - begin <= kLeaf) {
    double acc = 0.0;
    for (Eigen::Index i = begin; i < end; ++i) acc += values[i];
    return acc;
  }
  const Eigen::Index mid = begin + (end - begin) / 2;
  return pairwise_sum_range(values, begin, mid) + pairwise_sum_range(values, mid, end);
}

}  // namespace

Eigen::VectorXd pairwise_column_sum(const Eigen::MatrixXd& columns) {
  if (columns.cols() == 0) return Eigen::VectorXd::Zero(columns.rows());
  return pairwise_column_sum_range(columns, 0, columns.cols());
}

double pairwise_sum(const Eigen::VectorXd& values) {
  if (values.size() == 0) return 0.0;
  return pairwise_sum_range(values, 0, values.size());
}

}  // namespace detail

namespace {

double clamp_cos(double c) { return std::min(1.0, std::max(-1.0, c)); }

// Squared geodesic distances from every sample point to p, in index order.
Eigen::VectorXd squared_distances(const SampleSet& sample, const SpherePoint& p) {
  const Grid& grid = *sample.grid();
  const Eigen::VectorXd pt = grid.to_weighted(p.coef);
  Eigen::VectorXd cosines = sample.coefs().transpose() * grid.weights().asDiagonal() * p.coef;
  Eigen::VectorXd out(cosines.size());
  for (Eigen::Index i = 0; i < cosines.size(); ++i) {
    const double rho = std::acos(clamp_cos(cosines[i]));
    out[i] = rho * rho;
  }
  return out;
}

}  // namespace

SampleSet::SampleSet(GridPtr grid, Eigen::MatrixXd coefs)
    : grid_(std::move(grid)), coefs_(std::move(coefs)) {
  if (!grid_) throw DimensionError("SampleSet: null grid");
  if (coefs_.cols() == 0) throw DimensionError("SampleSet: empty sample");
  if (coefs_.rows() != grid_->size())
    throw DimensionError("SampleSet: coefficient rows do not match grid size");
  for (Eigen::Index i = 0; i < coefs_.cols(); ++i) {
    const double sq = grid_->inner(coefs_.col(i), coefs_.col(i));
    if (std::abs(sq - 1.0) > kUnitNormTol)
      throw DomainError("SampleSet: point " + std::to_string(i) + " is not unit-norm");
  }
}

SampleSet::SampleSet(const std::vector<SpherePoint>& points)
    : grid_(points.empty() ? nullptr : points.front().grid) {
  if (points.empty()) throw DimensionError("SampleSet: empty sample");
  coefs_.resize(grid_->size(), static_cast<Eigen::Index>(points.size()));
  for (std::size_t i = 0; i < points.size(); ++i) {
    require_same_grid(*grid_, *points[i].grid, "SampleSet");
    coefs_.col(static_cast<Eigen::Index>(i)) = points[i].coef;
  }
  *this = SampleSet(grid_, std::move(coefs_));
}

SampleSet SampleSet::resample(const std::vector<Eigen::Index>& indices) const {
  if (indices.empty()) throw DimensionError("resample: empty index list");
  Eigen::MatrixXd out(coefs_.rows(), static_cast<Eigen::Index>(indices.size()));
  for (std::size_t j = 0; j < indices.size(); ++j)
    out.col(static_cast<Eigen::Index>(j)) = coefs_.col(indices[j]);
  SampleSet copy(*this);
  copy.coefs_ = std::move(out);
  return copy;
}

SupportCheck check_support(const SampleSet& sample) {
  const Grid& grid = *sample.grid();
  const Eigen::MatrixXd tilde = grid.sqrt_weights().asDiagonal() * sample.coefs();
  const Eigen::MatrixXd gram = tilde.transpose() * tilde;
  double diameter = 0.0;
  for (Eigen::Index i = 0; i < gram.rows(); ++i)
    for (Eigen::Index j = i + 1; j < gram.cols(); ++j)
      diameter = std::max(diameter, std::acos(clamp_cos(gram(i, j))));
  return SupportCheck{diameter, diameter <= M_PI / 2.0 + 1e-12};
}

double frechet_functional(const SampleSet& sample, const SpherePoint& p) {
  require_same_grid(*sample.grid(), *p.grid, "frechet_functional");
  return detail::pairwise_sum(squared_distances(sample, p)) /
         static_cast<double>(sample.size());
}

SpherePoint extrinsic_mean(const SampleSet& sample) {
  Eigen::VectorXd avg = sample.coefs().rowwise().mean();
  if (sample.grid()->norm(avg) < 1e-12)
    throw DomainError("extrinsic_mean: ambient average is numerically zero");
  return sphere_point_normalized(sample.grid(), std::move(avg));
}

FrechetMeanResult frechet_mean(const SampleSet& sample, const FrechetMeanOptions& options) {
  const Grid& grid = *sample.grid();
  const double n = static_cast<double>(sample.size());

  SpherePoint mu = [&] {
    Eigen::VectorXd avg = sample.coefs().rowwise().mean();
    if (grid.norm(avg) < 1e-12) return sample.point(0);  // symmetric degenerate start
    return sphere_point_normalized(sample.grid(), std::move(avg));
  }();

  double functional = frechet_functional(sample, mu);
  for (int iter = 0; iter <= options.max_iter; ++iter) {
    const Eigen::MatrixXd logs = detail::log_matrix_weighted(sample, mu);
    const Eigen::VectorXd grad_tilde = detail::pairwise_column_sum(logs) / n;
    const double grad_norm = grad_tilde.norm();
    if (grad_norm <= options.tol)
      return FrechetMeanResult{mu, iter, grad_norm, functional};

    const TangentVector direction = tangent_projected(mu, grid.from_weighted(grad_tilde));
    // Strict decrease is required only up to roundoff: near the optimum the
    // true decrease (~|grad|^2) drops below the resolution of M_n while the
    // gradient still contracts, so plateau steps must stay acceptable.
    const double slack = 8.0 * std::numeric_limits<double>::epsilon() * (1.0 + functional);
    double step = 1.0;
    bool accepted = false;
    while (step >= 0x1p-30) {
      TangentVector scaled{mu, step * direction.coef};
      SpherePoint candidate = exp_map(mu, scaled);
      const double candidate_value = frechet_functional(sample, candidate);
      if (candidate_value <= functional + slack) {
        mu = std::move(candidate);
        functional = std::min(functional, candidate_value);
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted)
      throw ConvergenceError(
          "frechet_mean: functional cannot decrease but gradient norm " +
              std::to_string(grad_norm) + " exceeds tolerance",
          std::vector<double>(mu.coef.data(), mu.coef.data() + mu.coef.size()), grad_norm);
  }

  const Eigen::MatrixXd logs = detail::log_matrix_weighted(sample, mu);
  const double grad_norm = (detail::pairwise_column_sum(logs) / n).norm();
  throw ConvergenceError(
      "frechet_mean: no convergence after " + std::to_string(options.max_iter) + " iterations",
      std::vector<double>(mu.coef.data(), mu.coef.data() + mu.coef.size()), grad_norm);
}

std::vector<TangentVector> tangent_vectors(const SampleSet& sample, const SpherePoint& mean) {
  require_same_grid(*sample.grid(), *mean.grid, "tangent_vectors");
  std::vector<TangentVector> out;
  out.reserve(static_cast<std::size_t>(sample.size()));
  for (Eigen::Index i = 0; i < sample.size(); ++i) {
    try {
      out.push_back(log_map(mean, sample.point(i)));
    } catch (const DomainError&) {
      throw DomainError("tangent_vectors: point " + std::to_string(i) +
                        " is antipodal to the mean");
    }
  }
  return out;
}

TangentOperator covariance_operator(const std::vector<TangentVector>& vectors) {
  if (vectors.empty()) throw DimensionError("covariance_operator: empty input");
  const SpherePoint& base = vectors.front().base;
  const Grid& grid = *base.grid;
  const Eigen::VectorXd bt = grid.to_weighted(base.coef);
  const double n = static_cast<double>(vectors.size());
  Eigen::MatrixXd factors(grid.size(), static_cast<Eigen::Index>(vectors.size()));
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    require_same_grid(grid, *vectors[i].base.grid, "covariance_operator");
    if ((vectors[i].base.coef - base.coef).cwiseAbs().maxCoeff() > 1e-9)
      throw DimensionError("covariance_operator: vectors have different base points");
    factors.col(static_cast<Eigen::Index>(i)) =
        grid.to_weighted(vectors[i].coef) / std::sqrt(n);
  }
  factors -= bt * (bt.transpose() * factors);  // keep the base direction in the kernel
  Eigen::MatrixXd mat = factors * factors.transpose();
  return TangentOperator{base, std::move(mat), std::move(factors)};
}

TangentOperator lambda_hat(const SampleSet& sample, const SpherePoint& mean) {
  require_same_grid(*sample.grid(), *mean.grid, "lambda_hat");
  const Grid& grid = *sample.grid();
  const Eigen::Index m = grid.size();
  const double n = static_cast<double>(sample.size());
  const Eigen::VectorXd bt = grid.to_weighted(mean.coef);

  Eigen::MatrixXd dirs(m, sample.size());   // weighted unit directions e_i
  Eigen::VectorXd curv(sample.size());      // theta_i cot(theta_i)
  for (Eigen::Index i = 0; i < sample.size(); ++i) {
    const double theta = geodesic_distance(sample.point(i), mean);
    if (theta >= M_PI - kAntipodalGuard)
      throw DomainError("lambda_hat: point " + std::to_string(i) +
                        " is antipodal to the base point");
    if (theta < kSmallAngle) {
      dirs.col(i).setZero();
      curv[i] = 1.0;
      continue;
    }
    const TangentVector log_i = log_map(mean, sample.point(i));
    dirs.col(i) = grid.to_weighted(log_i.coef) / theta;
    curv[i] = theta < kHessianSeriesAngle ? 1.0 - theta * theta / 3.0
                                          : theta / std::tan(theta);
  }

  const double iso = 2.0 * detail::pairwise_sum(curv) / n;
  Eigen::MatrixXd mat = iso * (Eigen::MatrixXd::Identity(m, m) - bt * bt.transpose());
  const Eigen::VectorXd scale = (2.0 * (1.0 - curv.array()) / n).cwiseMax(0.0).cwiseSqrt();
  const Eigen::MatrixXd scaled = dirs * scale.asDiagonal();
  mat += scaled * scaled.transpose();
  mat = 0.5 * (mat + mat.transpose()).eval();
  return TangentOperator{mean, std::move(mat), std::nullopt};
}

TangentOperator asymptotic_covariance(const SampleSet& sample, const SpherePoint& mean) {
  const Grid& grid = *sample.grid();
  const TangentOperator cov = covariance_operator(tangent_vectors(sample, mean));
  const TangentOperator lambda = lambda_hat(sample, mean);

  const Eigen::MatrixXd q = tangent_basis(mean);
  const Eigen::MatrixXd lambda_t = q.transpose() * lambda.mat * q;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(lambda_t);
  const double min_eig = es.eigenvalues().minCoeff();
  if (min_eig <= kMinHessianEigenvalue)
    throw ConditioningError(
        "asymptotic_covariance: averaged Hessian is near-singular (min eigenvalue " +
            std::to_string(min_eig) + ")",
        min_eig);

  const Eigen::MatrixXd f_t = q.transpose() * (*cov.factors);
  const Eigen::MatrixXd solved =
      es.eigenvectors() *
      es.eigenvalues().cwiseInverse().asDiagonal() * (es.eigenvectors().transpose() * f_t);
  Eigen::MatrixXd factors = q * (2.0 * solved);
  // Keep the factors exactly tangent after the round trip through the basis.
  const Eigen::VectorXd bt = grid.to_weighted(mean.coef);
  factors -= bt * (bt.transpose() * factors);
  Eigen::MatrixXd mat = factors * factors.transpose();
  return TangentOperator{mean, std::move(mat), std::move(factors)};
}

EigenSystem eigen(const TangentOperator& a, Eigen::Index max_rank) {
  const Grid& grid = *a.base.grid;
  EigenSystem out;
  if (max_rank <= 0) return out;

  const auto push_pair = [&](double value, const Eigen::VectorXd& tilde) {
    Eigen::VectorXd coef = grid.from_weighted(tilde);
    TangentVector vec = tangent_projected(a.base, std::move(coef));
    const double nrm = tangent_norm(vec);
    if (nrm > 0.0) vec.coef /= nrm;
    out.values.push_back(value);
    out.vectors.push_back(std::move(vec));
  };

  if (a.factors && a.factors->cols() < grid.size()) {
    const Eigen::MatrixXd& f = *a.factors;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(f.transpose() * f);
    const Eigen::Index r = es.eigenvalues().size();
    const double top = std::max(0.0, es.eigenvalues().maxCoeff());
    const double floor = top * kEigenvalueFloorRel;
    for (Eigen::Index k = r - 1; k >= 0 && out.values.size() < static_cast<std::size_t>(max_rank);
         --k) {
      const double value = es.eigenvalues()[k];
      if (value <= floor || value <= 0.0) break;
      push_pair(value, f * (es.eigenvectors().col(k) / std::sqrt(value)));
    }
    return out;
  }

  const Eigen::MatrixXd q = tangent_basis(a.base);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(q.transpose() * a.mat * q);
  const Eigen::Index r = es.eigenvalues().size();
  for (Eigen::Index k = r - 1; k >= 0 && out.values.size() < static_cast<std::size_t>(max_rank);
       --k) {
    const double value = std::max(0.0, es.eigenvalues()[k]);
    push_pair(value, q * es.eigenvectors().col(k));
  }
  return out;
}

std::vector<double> fve_fractions(const std::vector<double>& values) {
  const double total = detail::pairwise_sum(
      Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size())));
  std::vector<double> out(values.size());
  double cum = 0.0;
  for (std::size_t j = 0; j < values.size(); ++j) {
    cum += values[j];
    out[j] = cum / total;
  }
  return out;
}

int select_K(const std::vector<double>& values, double r) {
  if (!(r > 0.0 && r < 1.0)) throw DomainError("select_K: threshold must be in (0,1)");
  if (values.empty()) throw DomainError("select_K: empty spectrum");
  double total = 0.0;
  for (double v : values) total += v;
  if (!(total > 0.0)) throw DomainError("select_K: all-zero spectrum");
  double cum = 0.0;
  for (std::size_t j = 0; j < values.size(); ++j) {
    cum += values[j];
    if (cum / total >= r) return static_cast<int>(j) + 1;
  }
  return static_cast<int>(values.size());
}

HOperator::HOperator(SpherePoint base, Eigen::MatrixXd v_tilde, Eigen::MatrixXd e_tilde,
                     Eigen::VectorXd a_coeff)
    : base_(std::move(base)),
      v_tilde_(std::move(v_tilde)),
      e_tilde_(std::move(e_tilde)),
      a_coeff_(std::move(a_coeff)) {}

Eigen::MatrixXd HOperator::matrix(const TangentVector& u) const {
  const Grid& grid = *base_.grid;
  require_same_grid(grid, *u.base.grid, "HOperator");
  const Eigen::VectorXd ut = grid.to_weighted(u.coef);
  const double n = static_cast<double>(v_tilde_.cols());
  const Eigen::VectorXd proj = e_tilde_.transpose() * ut;  // <e_i, u>
  // y_i = Lambda_{X_i 1} u = 2 a_i u + 2 (1 - a_i) <e_i,u> e_i
  Eigen::MatrixXd y = 2.0 * ut * a_coeff_.transpose();
  y += e_tilde_ * (2.0 * (1.0 - a_coeff_.array()) * proj.array()).matrix().asDiagonal();
  // (y_i (x) V_i) h = <y_i, h> V_i, so the matrix is V y^T averaged.
  return v_tilde_ * y.transpose() / n;
}

TangentVector HOperator::apply_to(const TangentVector& u, const TangentVector& h) const {
  const Grid& grid = *base_.grid;
  const Eigen::VectorXd out = matrix(u) * grid.to_weighted(h.coef);
  return tangent_projected(base_, grid.from_weighted(out));
}

HOperator h_operator(const SampleSet& sample, const SpherePoint& mean) {
  require_same_grid(*sample.grid(), *mean.grid, "h_operator");
  const Grid& grid = *sample.grid();
  Eigen::MatrixXd v_tilde(grid.size(), sample.size());
  Eigen::MatrixXd e_tilde(grid.size(), sample.size());
  Eigen::VectorXd a_coeff(sample.size());
  for (Eigen::Index i = 0; i < sample.size(); ++i) {
    const double theta = geodesic_distance(sample.point(i), mean);
    if (theta >= M_PI - kAntipodalGuard)
      throw DomainError("h_operator: point " + std::to_string(i) +
                        " is antipodal to the base point");
    const TangentVector log_i = log_map(mean, sample.point(i));
    v_tilde.col(i) = grid.to_weighted(log_i.coef);
    if (theta < kSmallAngle) {
      e_tilde.col(i).setZero();
      a_coeff[i] = 1.0;
    } else {
      e_tilde.col(i) = v_tilde.col(i) / theta;
      a_coeff[i] = theta < kHessianSeriesAngle ? 1.0 - theta * theta / 3.0
                                               : theta / std::tan(theta);
    }
  }
  return HOperator(mean, std::move(v_tilde), std::move(e_tilde), std::move(a_coeff));
}

TangentOperator transported_covariance(const SampleSet& sample, const SpherePoint& mean_hat,
                                       const SpherePoint& reference) {
  const TangentOperator cov = covariance_operator(tangent_vectors(sample, mean_hat));
  return transport_operator(mean_hat, reference, cov);
}

}  // namespace hsphere
