#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hsphere/rng.hpp"
#include "hsphere/testing.hpp"

namespace hsphere {

enum class ScoreDist { normal, centered_exponential };

std::string to_string(ScoreDist dist);
ScoreDist score_dist_from_string(const std::string& name);

// Two-group generative model: group means mu_1 = sqrt Beta(2,1) density and
// mu_2 = exp_{mu_1}(delta v); observations X = exp_{mu_g}(sign_g sum_k xi_k phi_gk)
// with rotated trigonometric basis phi_gk and score variances theta_k = 3^{-k}.
struct SimConfig {
  int n_g = 50;
  int K_mu = 1;  // components in the mean difference, one of {1, 3, 5}
  int K_X = 50;  // components in the observation noise
  double delta = 0.0;
  ScoreDist score_dist = ScoreDist::normal;
  Eigen::Index grid_size = 101;
  long runs = 500;
  long n_boot = 199;
  long n_draws = 100000;
  std::uint64_t seed = 0;
  double alpha = 0.05;

  void validate() const;
};

// theta_k = 3^{-k}, k = 1..K_X.
Eigen::VectorXd theta_spectrum(int k_x);

// Trigonometric basis on [0,1]: psi_1 = 1, psi_{2k} = sqrt(2) sin(2k pi s),
// psi_{2k+1} = sqrt(2) cos(2k pi s).
Eigen::VectorXd trig_psi(const Grid& grid, int j);

// Square root of the Beta(2,1) density, renormalized to unit quadrature norm.
SpherePoint mean_mu1(const GridPtr& grid);

// phi_k = R_{g_mean}(psi_{k+1}): rotated basis vector, tangent at g_mean.
Eigen::VectorXd basis_phi(const SpherePoint& g_mean, int k);

// mu_2 = exp_{mu_1}(delta v), v = K_mu^{-1/2} sum_{k<=K_mu} phi_{1k}.
SpherePoint mean_mu2(const SpherePoint& mu1, double delta, int K_mu);

// Precomputed generator state for one group.
struct GroupModel {
  SpherePoint mean;
  Eigen::MatrixXd basis;  // columns phi_{g,1..K_X}
  double sign = 1.0;      // (-1)^{g-1}
};

GroupModel make_group_model(const GridPtr& grid, const SimConfig& config, int group);

struct DrawStats {
  long rejected_draws = 0;  // tangent draws with norm >= pi - 0.01, redrawn
};

SampleSet draw_sample(const GroupModel& model, const SimConfig& config, Rng& rng,
                      DrawStats* stats = nullptr);
SampleSet draw_sample(const SimConfig& config, int group, Rng& rng, DrawStats* stats = nullptr);

struct PowerCell {
  double delta = 0.0;
  int n_g = 0;
  int K_mu = 0;
  std::string score_dist;
  std::string method;
  long rejections = 0;
  long runs = 0;  // successful runs entering the proportion
  long failures = 0;
  double proportion = 0.0;
  double se = 0.0;
  bool valid = true;  // failures stayed below 1% of requested runs
};

struct PowerTable {
  std::vector<PowerCell> rows;
};

struct StudyConfig {
  SimConfig base;  // delta field is ignored; deltas below drive the cells
  std::vector<double> deltas{0.0};
  std::vector<std::string> methods{"norm_asymptotic"};
  double fve = 0.95;  // FVE threshold for projection-based methods

  void validate() const;
};

// Empirical rejection proportions at base.alpha for each (delta, method)
// cell; all methods within a run see the same data. Deterministic for a
// fixed seed regardless of thread count.
PowerTable run_power_study(const StudyConfig& config);

std::string power_table_csv(const PowerTable& table);
std::string power_table_json(const PowerTable& table);

const std::vector<std::string>& known_methods();

}  // namespace hsphere
