#include <doctest.h>

#include <cmath>
#include <random>

#include "hsphere/simulation.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace hsphere;
using testsupport::point_at_distance;
using testsupport::random_point;
using testsupport::random_tangent;

namespace {

SampleSet sample_from(const std::vector<SpherePoint>& pts) { return SampleSet(pts); }

SampleSet draw(const SimConfig& config, int group, std::uint64_t seed) {
  Rng rng = derive_rng(seed, 0);
  return draw_sample(config, group, rng);
}

}  // namespace

TEST_CASE("check_support") {
  const GridPtr grid = trapezoid_grid(101);
  const SpherePoint p1 = constant_point(grid);
  CHECK(check_support(sample_from({p1})).diameter == 0.0);
  CHECK(check_support(sample_from({p1})).satisfied);

  const Eigen::VectorXd psi2 = trig_psi(*grid, 2);
  const SpherePoint p2 = sphere_point_normalized(grid, psi2);
  const SupportCheck boundary = check_support(sample_from({p1, p2}));
  CHECK(boundary.diameter == doctest::Approx(M_PI / 2).epsilon(1e-9));
  CHECK(boundary.satisfied);

  const SpherePoint far = exp_map(p1, tangent_projected(p1, 1.8 * psi2));
  const SupportCheck wide = check_support(sample_from({p1, far}));
  CHECK(wide.diameter == doctest::Approx(1.8).epsilon(1e-9));
  CHECK_FALSE(wide.satisfied);
}

TEST_CASE("frechet mean basics") {
  const GridPtr grid = trapezoid_grid(101);
  std::mt19937_64 rng(101);
  const SpherePoint p = random_point(grid, rng);

  SUBCASE("single point") {
    const FrechetMeanResult res = frechet_mean(sample_from({p}));
    CHECK((res.mean.coef - p.coef).norm() == 0.0);
    CHECK(res.iterations == 0);
    CHECK(res.functional_value == 0.0);
  }
  SUBCASE("two points: geodesic midpoint") {
    const SpherePoint q = point_at_distance(p, 0.8, rng);
    const FrechetMeanResult res = frechet_mean(sample_from({p, q}));
    TangentVector half = log_map(p, q);
    half.coef *= 0.5;
    const SpherePoint midpoint = exp_map(p, half);
    CHECK(grid->norm(res.mean.coef - midpoint.coef) < 1e-9);
    CHECK(res.final_gradient_norm <= 1e-10);
  }
  SUBCASE("functional value is recomputable") {
    std::vector<SpherePoint> pts;
    for (int i = 0; i < 20; ++i) pts.push_back(point_at_distance(p, 0.5, rng));
    const SampleSet sample = sample_from(pts);
    const FrechetMeanResult res = frechet_mean(sample);
    CHECK(res.functional_value ==
          doctest::Approx(frechet_functional(sample, res.mean)).epsilon(1e-12));
  }
}

TEST_CASE("frechet mean recovers the generator mean") {
  // n = 500 draws, delta = 0, K_X = 5; bound is 3 standard errors of
  // sqrt(sum theta_k / n) from the tangent CLT scaling.
  SimConfig config;
  config.n_g = 500;
  config.K_X = 5;
  const SampleSet sample = draw(config, 1, 2024);
  const FrechetMeanResult res = frechet_mean(sample);
  const SpherePoint mu1 = mean_mu1(sample.grid());
  CHECK(geodesic_distance(res.mean, mu1) < 0.06);
  CHECK(res.final_gradient_norm <= 1e-10);
}

TEST_CASE("tangent vectors") {
  const GridPtr grid = trapezoid_grid(101);
  std::mt19937_64 rng(103);
  const SpherePoint mean = random_point(grid, rng);
  std::vector<SpherePoint> pts{mean};
  for (int i = 0; i < 30; ++i) pts.push_back(point_at_distance(mean, 0.6, rng));
  const SampleSet sample = sample_from(pts);

  const auto vectors = tangent_vectors(sample, mean);
  CHECK(tangent_norm(vectors[0]) == 0.0);  // X_i = mean
  for (Eigen::Index i = 0; i < sample.size(); ++i)
    CHECK(tangent_norm(vectors[static_cast<std::size_t>(i)]) ==
          doctest::Approx(geodesic_distance(sample.point(i), mean)).epsilon(1e-10));

  // At the converged mean the tangent vectors average to (numerically) zero.
  const FrechetMeanResult res = frechet_mean(sample);
  const auto centered = tangent_vectors(sample, res.mean);
  Eigen::VectorXd avg = Eigen::VectorXd::Zero(grid->size());
  for (const auto& v : centered) avg += v.coef;
  avg /= static_cast<double>(centered.size());
  CHECK(grid->norm(avg) <= 1e-9);
}

TEST_CASE("covariance operator") {
  const GridPtr grid = trapezoid_grid(101);
  std::mt19937_64 rng(107);
  const SpherePoint mean = random_point(grid, rng);

  SUBCASE("single vector is a rank-one tensor square") {
    const TangentVector v = random_tangent(mean, 0.9, rng);
    const TangentOperator cov = covariance_operator({v});
    CHECK(cov.mat.trace() == doctest::Approx(0.81).epsilon(1e-10));
    const EigenSystem es = eigen(cov, 5);
    REQUIRE(es.values.size() == 1);
    CHECK(es.values[0] == doctest::Approx(0.81).epsilon(1e-10));
    CHECK(std::abs(std::abs(inner(es.vectors[0], v)) - 0.9) < 1e-9);
    // symmetry in the weighted inner product and base direction in the kernel
    CHECK((cov.mat - cov.mat.transpose()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(grid->from_weighted(cov.mat * grid->to_weighted(mean.coef)).norm() < 1e-10);
  }
  SUBCASE("trace identity") {
    std::vector<SpherePoint> pts;
    for (int i = 0; i < 40; ++i) pts.push_back(point_at_distance(mean, 0.7, rng));
    const SampleSet sample = sample_from(pts);
    const FrechetMeanResult res = frechet_mean(sample);
    const TangentOperator cov = covariance_operator(tangent_vectors(sample, res.mean));
    CHECK(cov.mat.trace() ==
          doctest::Approx(frechet_functional(sample, res.mean)).epsilon(1e-10));
  }
  SUBCASE("empty input rejected") {
    CHECK_THROWS_AS(covariance_operator({}), DimensionError);
  }
}

TEST_CASE("covariance eigenvalues match the generator spectrum") {
  SimConfig config;
  config.n_g = 2000;
  config.K_X = 3;
  const SampleSet sample = draw(config, 1, 77);
  const FrechetMeanResult res = frechet_mean(sample);
  const TangentOperator cov = covariance_operator(tangent_vectors(sample, res.mean));
  const EigenSystem es = eigen(cov, 3);
  REQUIRE(es.values.size() == 3);
  const double theta[3] = {1.0 / 3.0, 1.0 / 9.0, 1.0 / 27.0};
  for (int k = 0; k < 3; ++k)
    CHECK(std::abs(es.values[k] - theta[k]) / theta[k] < 0.15);
}

TEST_CASE("lambda_hat") {
  const GridPtr grid = trapezoid_grid(61);
  std::mt19937_64 rng(109);
  const SpherePoint mean = random_point(grid, rng);

  SUBCASE("all points at the base give 2 Id") {
    const SampleSet sample = sample_from({mean, mean, mean});
    const TangentOperator lam = lambda_hat(sample, mean);
    const TangentVector u = random_tangent(mean, 1.0, rng);
    CHECK(grid->norm(apply(lam, u).coef - 2.0 * u.coef) < 1e-10);
  }
  SUBCASE("single point at pi/2") {
    const SampleSet sample = sample_from({point_at_distance(mean, M_PI / 2, rng)});
    const EigenSystem es = eigen(lambda_hat(sample, mean), grid->size());
    CHECK(es.values.front() == doctest::Approx(2.0).epsilon(1e-10));
    for (std::size_t k = 1; k < es.values.size(); ++k) CHECK(std::abs(es.values[k]) < 1e-10);
  }
  SUBCASE("matches the finite-difference Hessian of the Frechet functional") {
    std::vector<SpherePoint> pts;
    for (int i = 0; i < 25; ++i) pts.push_back(point_at_distance(mean, 0.8, rng));
    const SampleSet sample = sample_from(pts);
    const FrechetMeanResult res = frechet_mean(sample);
    const TangentOperator lam = lambda_hat(sample, res.mean);
    for (int rep = 0; rep < 5; ++rep) {
      const TangentVector u = random_tangent(res.mean, 1.0, rng);
      const double form = grid->inner(u.coef, apply(lam, u).coef);
      const double fd = oracles::second_difference(
          [&](double t) {
            const TangentVector scaled{res.mean, t * u.coef};
            return frechet_functional(sample, exp_map(res.mean, scaled));
          },
          1e-4);
      CHECK(form == doctest::Approx(fd).epsilon(1e-5));
    }
  }
}

TEST_CASE("asymptotic covariance") {
  const GridPtr grid = trapezoid_grid(61);
  std::mt19937_64 rng(113);
  const SpherePoint mean = random_point(grid, rng);

  SUBCASE("concentrated data: T-hat approaches G-hat") {
    std::vector<SpherePoint> pts;
    for (int i = 0; i < 30; ++i) pts.push_back(point_at_distance(mean, 1e-3, rng));
    const SampleSet sample = sample_from(pts);
    const FrechetMeanResult res = frechet_mean(sample);
    const TangentOperator cov = covariance_operator(tangent_vectors(sample, res.mean));
    const TangentOperator asy = asymptotic_covariance(sample, res.mean);
    CHECK((asy.mat - cov.mat).cwiseAbs().maxCoeff() <=
          1e-2 * cov.mat.cwiseAbs().maxCoeff());
  }
  SUBCASE("invariant to sample reordering") {
    std::vector<SpherePoint> pts;
    for (int i = 0; i < 12; ++i) pts.push_back(point_at_distance(mean, 0.5, rng));
    std::vector<SpherePoint> reversed(pts.rbegin(), pts.rend());
    const SpherePoint base = frechet_mean(sample_from(pts)).mean;
    const TangentOperator a = asymptotic_covariance(sample_from(pts), base);
    const TangentOperator b = asymptotic_covariance(sample_from(reversed), base);
    CHECK((a.mat - b.mat).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("eigen: gram and dense paths agree on random low-rank operators") {
  const GridPtr grid = trapezoid_grid(101);
  std::mt19937_64 rng(127);
  const SpherePoint base = random_point(grid, rng);
  for (int rep = 0; rep < 5; ++rep) {
    std::vector<TangentVector> vs;
    for (int i = 0; i < 5; ++i) vs.push_back(random_tangent(base, 0.5 + 0.2 * i, rng));
    TangentOperator factored = covariance_operator(vs);
    TangentOperator dense = factored;
    dense.factors.reset();

    const EigenSystem gram = eigen(factored, 5);
    const EigenSystem full = eigen(dense, 5);
    REQUIRE(gram.values.size() == 5);
    for (int k = 0; k < 5; ++k) {
      CHECK(std::abs(gram.values[k] - full.values[k]) < 1e-9);
      CHECK(std::abs(std::abs(inner(gram.vectors[k], full.vectors[k])) - 1.0) < 1e-7);
    }
  }
}

TEST_CASE("eigen: identity operator") {
  const GridPtr grid = trapezoid_grid(31);
  std::mt19937_64 rng(131);
  const SpherePoint base = random_point(grid, rng);
  const EigenSystem es = eigen(scaled_tangent_identity(base, 2.0), grid->size());
  CHECK(es.values.size() == static_cast<std::size_t>(grid->size() - 1));
  for (double v : es.values) CHECK(v == doctest::Approx(2.0).epsilon(1e-10));
  // orthonormality
  for (std::size_t a = 0; a < 5; ++a)
    for (std::size_t b = 0; b <= a; ++b)
      CHECK(std::abs(inner(es.vectors[a], es.vectors[b]) - (a == b ? 1.0 : 0.0)) < 1e-8);
}

TEST_CASE("select_K and FVE") {
  std::vector<double> values;
  double v = 1.0;
  for (int k = 0; k < 50; ++k) {
    v /= 3.0;
    values.push_back(v);
  }
  CHECK(select_K(values, 0.8) == 2);
  CHECK(select_K(values, 0.95) == 3);
  CHECK(select_K({3.0}, 0.99) == 1);
  CHECK_THROWS_AS(select_K({0.0, 0.0}, 0.5), DomainError);
  CHECK_THROWS_AS(select_K(values, 1.5), DomainError);
}

TEST_CASE("h operator") {
  const GridPtr grid = trapezoid_grid(61);
  std::mt19937_64 rng(137);
  const SpherePoint mean = random_point(grid, rng);

  SUBCASE("all observations at the mean give the zero map") {
    const SampleSet sample = sample_from({mean, mean});
    const HOperator h = h_operator(sample, mean);
    const TangentVector u = random_tangent(mean, 1.0, rng);
    CHECK(h.matrix(u).cwiseAbs().maxCoeff() < 1e-14);
  }
  SUBCASE("single observation along e1") {
    const double theta = 0.9;
    const SpherePoint x = point_at_distance(mean, theta, rng);
    const SampleSet sample = sample_from({x});
    const TangentVector v1 = log_map(mean, x);
    TangentVector e1{mean, v1.coef / theta};
    const HOperator h = h_operator(sample, mean);
    // Lambda_{X1} e1 = 2 e1, so H(e1) = 2 e1 (x) V1 and H(e1) h = 2 <e1,h> V1.
    const TangentVector hvec = random_tangent(mean, 1.0, rng);
    const TangentVector out = h.apply_to(e1, hvec);
    const Eigen::VectorXd expected = 2.0 * inner(e1, hvec) * v1.coef;
    CHECK(grid->norm(out.coef - expected) < 1e-10);
  }
  SUBCASE("linear in the direction argument") {
    std::vector<SpherePoint> pts;
    for (int i = 0; i < 15; ++i) pts.push_back(point_at_distance(mean, 0.6, rng));
    const HOperator h = h_operator(sample_from(pts), mean);
    const TangentVector u = random_tangent(mean, 1.0, rng);
    const TangentVector w = random_tangent(mean, 1.0, rng);
    const TangentVector combo{mean, 2.0 * u.coef - 0.5 * w.coef};
    const Eigen::MatrixXd lhs = h.matrix(combo);
    const Eigen::MatrixXd rhs = 2.0 * h.matrix(u) - 0.5 * h.matrix(w);
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("transported covariance") {
  const GridPtr grid = trapezoid_grid(61);
  std::mt19937_64 rng(139);
  const SpherePoint mean = random_point(grid, rng);
  std::vector<SpherePoint> pts;
  for (int i = 0; i < 25; ++i) pts.push_back(point_at_distance(mean, 0.5, rng));
  const SampleSet sample = sample_from(pts);
  const FrechetMeanResult res = frechet_mean(sample);

  const TangentOperator same = transported_covariance(sample, res.mean, res.mean);
  const TangentOperator direct = covariance_operator(tangent_vectors(sample, res.mean));
  CHECK((same.mat - direct.mat).cwiseAbs().maxCoeff() < 1e-12);

  const SpherePoint ref = point_at_distance(res.mean, 0.8, rng);
  const TangentOperator moved = transported_covariance(sample, res.mean, ref);
  const EigenSystem ea = eigen(direct, 6);
  const EigenSystem eb = eigen(moved, 6);
  for (std::size_t k = 0; k < std::min(ea.values.size(), eb.values.size()); ++k)
    CHECK(eb.values[k] == doctest::Approx(ea.values[k]).epsilon(1e-9));
}

TEST_CASE("isometry invariance of the mean and covariance spectrum") {
  SimConfig config;
  config.n_g = 40;
  config.K_X = 5;
  const SampleSet sample = draw(config, 1, 31);
  const GridPtr grid = sample.grid();
  std::mt19937_64 rng(149);
  const SpherePoint q = random_point(grid, rng);

  Eigen::MatrixXd rotated(grid->size(), sample.size());
  for (Eigen::Index i = 0; i < sample.size(); ++i)
    rotated.col(i) = rotation_operator(q, sample.coefs().col(i));
  const SampleSet moved(grid, std::move(rotated));

  const FrechetMeanResult m0 = frechet_mean(sample);
  const FrechetMeanResult m1 = frechet_mean(moved);
  CHECK(grid->norm(m1.mean.coef - rotation_operator(q, m0.mean.coef)) < 1e-8);

  const EigenSystem e0 = eigen(covariance_operator(tangent_vectors(sample, m0.mean)), 5);
  const EigenSystem e1 = eigen(covariance_operator(tangent_vectors(moved, m1.mean)), 5);
  for (std::size_t k = 0; k < e0.values.size(); ++k)
    CHECK(std::abs(e1.values[k] - e0.values[k]) < 1e-9);
}
