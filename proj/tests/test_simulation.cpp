#include <doctest.h>

#include <cmath>

#include "hsphere/parallel.hpp"
#include "hsphere/simulation.hpp"

using namespace hsphere;

namespace {

// Analytic integral of sqrt(2 s) over [0,1]: 2 sqrt(2) / 3.
constexpr double kIntSqrt2s = 0.9428090415820634;

}  // namespace

TEST_CASE("theta spectrum and its FVE curve reproduce the printed values") {
  const Eigen::VectorXd theta = theta_spectrum(50);
  CHECK(std::abs(theta.sum() - 0.5) <= 1e-15 * 0.5);

  std::vector<double> values(theta.data(), theta.data() + theta.size());
  const std::vector<double> fve = fve_fractions(values);
  const double printed[5] = {66.7, 88.9, 96.3, 98.8, 99.6};
  for (int j = 0; j < 5; ++j)
    CHECK(std::round(1000.0 * fve[j]) / 10.0 == doctest::Approx(printed[j]).epsilon(1e-12));
}

TEST_CASE("mean_mu1") {
  const GridPtr grid = trapezoid_grid(201);
  const SpherePoint mu1 = mean_mu1(grid);
  // value at s = 0.5 is sqrt(2 * 0.5) = 1 up to the renormalization factor
  CHECK(mu1.coef[100] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(grid->inner(mu1.coef, mu1.coef) == doctest::Approx(1.0).epsilon(1e-12));
  const SpherePoint psi1 = constant_point(grid);
  CHECK(grid->inner(mu1.coef, psi1.coef) == doctest::Approx(kIntSqrt2s).epsilon(1e-3));
}

TEST_CASE("rotated basis phi") {
  const GridPtr grid = trapezoid_grid(101);
  const SpherePoint mu1 = mean_mu1(grid);

  SUBCASE("orthonormal and tangent at the rotated mean") {
    std::vector<Eigen::VectorXd> phis;
    for (int k = 1; k <= 6; ++k) phis.push_back(basis_phi(mu1, k));
    for (std::size_t a = 0; a < phis.size(); ++a) {
      CHECK(std::abs(grid->inner(phis[a], mu1.coef)) < 1e-8);
      for (std::size_t b = 0; b <= a; ++b)
        CHECK(std::abs(grid->inner(phis[a], phis[b]) - (a == b ? 1.0 : 0.0)) < 1e-8);
    }
  }
  SUBCASE("identity rotation at psi_1") {
    const SpherePoint psi1 = constant_point(grid);
    for (int k = 1; k <= 3; ++k) {
      const Eigen::VectorXd expected = trig_psi(*grid, k + 1);
      CHECK((basis_phi(psi1, k) - expected).norm() == 0.0);
    }
  }
}

TEST_CASE("mean_mu2") {
  const GridPtr grid = trapezoid_grid(101);
  const SpherePoint mu1 = mean_mu1(grid);
  CHECK((mean_mu2(mu1, 0.0, 3).coef - mu1.coef).norm() == 0.0);
  CHECK(geodesic_distance(mu1, mean_mu2(mu1, 0.4, 1)) == doctest::Approx(0.4).epsilon(1e-10));
  CHECK(geodesic_distance(mu1, mean_mu2(mu1, -0.25, 3)) ==
        doctest::Approx(0.25).epsilon(1e-10));

  // ||v|| = 1 for K_mu = 3 via the distance identity of exp
  CHECK(geodesic_distance(mu1, mean_mu2(mu1, 0.1, 3)) == doctest::Approx(0.1).epsilon(1e-10));
}

TEST_CASE("draw_sample moments and guards" * doctest::timeout(300)) {
  SimConfig config;
  config.n_g = 5000;
  config.K_X = 50;
  config.validate();
  const GridPtr grid = trapezoid_grid(config.grid_size);
  const GroupModel model = make_group_model(grid, config, 1);

  Rng rng = derive_rng(314, 0);
  DrawStats stats;
  const SampleSet sample = draw_sample(model, config, rng, &stats);

  // mean squared distance to the generator mean: sum theta = 0.5
  double acc = 0.0;
  for (Eigen::Index i = 0; i < sample.size(); ++i) {
    const double rho = geodesic_distance(sample.point(i), model.mean);
    acc += rho * rho;
  }
  CHECK(acc / static_cast<double>(sample.size()) == doctest::Approx(0.5).epsilon(0.04));
  CHECK(stats.rejected_draws < 10);

  // per-component score variance within 10% for k <= 3 (projection onto phi_k)
  const Eigen::VectorXd theta = theta_spectrum(config.K_X);
  for (int k = 0; k < 3; ++k) {
    double var = 0.0;
    for (Eigen::Index i = 0; i < sample.size(); ++i) {
      const TangentVector v = log_map(model.mean, sample.point(i));
      const double score = grid->inner(v.coef, model.basis.col(k));
      var += score * score;
    }
    var /= static_cast<double>(sample.size());
    CHECK(std::abs(var - theta[k]) / theta[k] < 0.10);
  }

  // (A1) proximity: at default settings, at least 99% of drawn points lie
  // within pi/2 of the generator mean.
  long within = 0;
  for (Eigen::Index i = 0; i < sample.size(); ++i)
    within += geodesic_distance(sample.point(i), model.mean) <= M_PI / 2.0;
  CHECK(static_cast<double>(within) / static_cast<double>(sample.size()) >= 0.99);
}

TEST_CASE("group generators coincide at delta = 0") {
  SimConfig config;
  config.delta = 0.0;
  const GridPtr grid = trapezoid_grid(51);
  const GroupModel g1 = make_group_model(grid, config, 1);
  const GroupModel g2 = make_group_model(grid, config, 2);
  CHECK(geodesic_distance(g1.mean, g2.mean) == 0.0);
  CHECK(g1.sign == 1.0);
  CHECK(g2.sign == -1.0);
}

TEST_CASE("exponential scores are centered with variance theta_k") {
  SimConfig config;
  config.n_g = 4000;
  config.K_X = 3;
  config.grid_size = 51;
  config.score_dist = ScoreDist::centered_exponential;
  const GridPtr grid = trapezoid_grid(config.grid_size);
  const GroupModel model = make_group_model(grid, config, 1);
  Rng rng = derive_rng(217, 0);
  const SampleSet sample = draw_sample(model, config, rng);

  const Eigen::VectorXd theta = theta_spectrum(config.K_X);
  for (int k = 0; k < 2; ++k) {
    double mean = 0.0, var = 0.0;
    std::vector<double> scores;
    for (Eigen::Index i = 0; i < sample.size(); ++i) {
      const TangentVector v = log_map(model.mean, sample.point(i));
      scores.push_back(grid->inner(v.coef, model.basis.col(k)));
    }
    for (double s : scores) mean += s;
    mean /= static_cast<double>(scores.size());
    for (double s : scores) var += (s - mean) * (s - mean);
    var /= static_cast<double>(scores.size());
    CHECK(std::abs(mean) < 3.0 * std::sqrt(theta[k] / static_cast<double>(scores.size())) + 1e-3);
    CHECK(std::abs(var - theta[k]) / theta[k] < 0.10);
  }
}

TEST_CASE("config validation") {
  SimConfig config;
  config.delta = 4.0;
  CHECK_THROWS_AS(config.validate(), DomainError);
  config.delta = 0.0;
  config.K_mu = 2;
  CHECK_THROWS_AS(config.validate(), DomainError);
  config.K_mu = 1;
  config.alpha = 1.5;
  CHECK_THROWS_AS(config.validate(), DomainError);

  StudyConfig study;
  study.methods = {"no_such_method"};
  CHECK_THROWS_AS(study.validate(), ValidationError);
  study.methods = {"norm_asymptotic"};
  study.deltas = {0.9};
  CHECK_THROWS_AS(study.validate(), DomainError);
}

TEST_CASE("power study is reproducible across thread counts" * doctest::timeout(300)) {
  StudyConfig study;
  study.base.n_g = 10;
  study.base.K_X = 4;
  study.base.grid_size = 41;
  study.base.runs = 12;
  study.base.n_boot = 99;
  study.base.n_draws = 2000;
  study.base.seed = 5150;
  study.deltas = {0.0, 0.3};
  study.methods = {"norm_asymptotic", "norm_bootstrap", "extrinsic", "flat"};

  set_max_threads(2);
  const std::string csv2 = power_table_csv(run_power_study(study));
  set_max_threads(1);
  const std::string csv1 = power_table_csv(run_power_study(study));
  set_max_threads(2);
  CHECK(csv1 == csv2);
  CHECK(csv1.find("delta,n_g,K_mu,score_dist,method,rejections,runs,proportion,se") == 0);
}
