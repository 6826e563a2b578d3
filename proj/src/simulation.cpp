#include "hsphere/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <sstream>

#include "hsphere/format.hpp"
#include "hsphere/parallel.hpp"

namespace hsphere {

namespace {

constexpr std::uint64_t kTagStudy = 0x73747564U;
constexpr double kDrawRejectNorm = M_PI - 0.01;

}  // namespace

std::string to_string(ScoreDist dist) {
  return dist == ScoreDist::normal ? "normal" : "centered_exponential";
}

ScoreDist score_dist_from_string(const std::string& name) {
  if (name == "normal") return ScoreDist::normal;
  if (name == "centered_exponential" || name == "exponential")
    return ScoreDist::centered_exponential;
  throw ValidationError("unknown score distribution '" + name + "'");
}

void SimConfig::validate() const {
  if (n_g < 2) throw DomainError("SimConfig: n_g must be at least 2");
  if (K_mu != 1 && K_mu != 3 && K_mu != 5)
    throw DomainError("SimConfig: K_mu must be one of {1, 3, 5}");
  if (K_X < K_mu) throw DomainError("SimConfig: K_X must be at least K_mu");
  if (!(std::abs(delta) <= 0.4)) throw DomainError("SimConfig: delta must lie in [-0.4, 0.4]");
  if (grid_size < 3) throw DomainError("SimConfig: grid_size must be at least 3");
  if (runs < 1) throw DomainError("SimConfig: runs must be positive");
  if (n_boot < 99) throw DomainError("SimConfig: bootstrap replicates must be at least 99");
  if (n_draws < 1) throw DomainError("SimConfig: n_draws must be positive");
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("SimConfig: alpha must be in (0,1)");
}

Eigen::VectorXd theta_spectrum(int k_x) {
  Eigen::VectorXd theta(k_x);
  double v = 1.0;
  for (int k = 0; k < k_x; ++k) {
    v /= 3.0;
    theta[k] = v;
  }
  return theta;
}

Eigen::VectorXd trig_psi(const Grid& grid, int j) {
  if (j < 1) throw DomainError("trig_psi: index must be positive");
  const Eigen::VectorXd& s = grid.points();
  if (j == 1) return Eigen::VectorXd::Ones(s.size());
  const double sqrt2 = std::sqrt(2.0);
  Eigen::VectorXd out(s.size());
  if (j % 2 == 0) {  // psi_{2k} = sqrt(2) sin(2 k pi s), 2k = j
    const double freq = M_PI * static_cast<double>(j);
    for (Eigen::Index i = 0; i < s.size(); ++i) out[i] = sqrt2 * std::sin(freq * s[i]);
  } else {  // psi_{2k-1} = sqrt(2) cos(2 (k-1) pi s), 2(k-1) = j - 1
    const double freq = M_PI * static_cast<double>(j - 1);
    for (Eigen::Index i = 0; i < s.size(); ++i) out[i] = sqrt2 * std::cos(freq * s[i]);
  }
  return out;
}

SpherePoint mean_mu1(const GridPtr& grid) {
  Eigen::VectorXd coef = (2.0 * grid->points().array()).cwiseMax(0.0).sqrt();
  return sphere_point_normalized(grid, std::move(coef));
}

Eigen::VectorXd basis_phi(const SpherePoint& g_mean, int k) {
  if (k < 1) throw DomainError("basis_phi: index must be positive");
  return rotation_operator(g_mean, trig_psi(*g_mean.grid, k + 1));
}

SpherePoint mean_mu2(const SpherePoint& mu1, double delta, int K_mu) {
  if (delta == 0.0) return mu1;
  Eigen::VectorXd v = Eigen::VectorXd::Zero(mu1.grid->size());
  for (int k = 1; k <= K_mu; ++k) v += basis_phi(mu1, k);
  v /= std::sqrt(static_cast<double>(K_mu));
  return exp_map(mu1, tangent_projected(mu1, delta * v));
}

GroupModel make_group_model(const GridPtr& grid, const SimConfig& config, int group) {
  if (group != 1 && group != 2) throw DomainError("make_group_model: group must be 1 or 2");
  GroupModel model;
  const SpherePoint mu1 = mean_mu1(grid);
  model.mean = group == 1 ? mu1 : mean_mu2(mu1, config.delta, config.K_mu);
  model.basis.resize(grid->size(), config.K_X);
  for (int k = 1; k <= config.K_X; ++k) model.basis.col(k - 1) = basis_phi(model.mean, k);
  model.sign = group == 1 ? 1.0 : -1.0;
  return model;
}

SampleSet draw_sample(const GroupModel& model, const SimConfig& config, Rng& rng,
                      DrawStats* stats) {
  const GridPtr& grid = model.mean.grid;
  const Eigen::VectorXd theta = theta_spectrum(config.K_X);
  Eigen::MatrixXd coefs(grid->size(), config.n_g);
  Eigen::VectorXd scores(config.K_X);
  for (int i = 0; i < config.n_g; ++i) {
    for (;;) {
      for (int k = 0; k < config.K_X; ++k) {
        if (config.score_dist == ScoreDist::normal) {
          scores[k] = std::sqrt(theta[k]) * rng.normal();
        } else {
          // eta ~ Exponential with Var(eta) = theta_k, centered at its mean.
          const double eta = rng.exponential_with_variance(theta[k]);
          scores[k] = eta - std::sqrt(theta[k]);
        }
      }
      Eigen::VectorXd tangent = model.basis * (model.sign * scores);
      const TangentVector v = tangent_projected(model.mean, std::move(tangent));
      if (tangent_norm(v) >= kDrawRejectNorm) {
        if (stats) ++stats->rejected_draws;
        continue;
      }
      coefs.col(i) = exp_map(model.mean, v).coef;
      break;
    }
  }
  return SampleSet(grid, std::move(coefs));
}

SampleSet draw_sample(const SimConfig& config, int group, Rng& rng, DrawStats* stats) {
  config.validate();
  const GridPtr grid = trapezoid_grid(config.grid_size);
  const GroupModel model = make_group_model(grid, config, group);
  return draw_sample(model, config, rng, stats);
}

const std::vector<std::string>& known_methods() {
  static const std::vector<std::string> methods = {
      "norm_asymptotic", "proj_asymptotic", "norm_bootstrap",
      "proj_bootstrap",  "extrinsic",       "flat"};
  return methods;
}

void StudyConfig::validate() const {
  base.validate();
  if (deltas.empty()) throw DomainError("StudyConfig: no effect sizes given");
  for (double d : deltas)
    if (!(std::abs(d) <= 0.4)) throw DomainError("StudyConfig: delta must lie in [-0.4, 0.4]");
  if (methods.empty()) throw DomainError("StudyConfig: no methods given");
  for (const auto& m : methods)
    if (std::find(known_methods().begin(), known_methods().end(), m) == known_methods().end())
      throw ValidationError("StudyConfig: unknown method '" + m + "'");
  if (!(fve > 0.0 && fve < 1.0)) throw DomainError("StudyConfig: fve must be in (0,1)");
}

namespace {

enum class Outcome : unsigned char { reject = 0, accept = 1, failed = 2 };

Outcome to_outcome(const TestReport& report, double alpha) {
  return report.p_value <= alpha ? Outcome::reject : Outcome::accept;
}

}  // namespace

PowerTable run_power_study(const StudyConfig& config) {
  config.validate();
  const auto& methods = config.methods;
  const std::size_t n_methods = methods.size();
  const std::size_t runs = static_cast<std::size_t>(config.base.runs);
  const GridPtr grid = trapezoid_grid(config.base.grid_size);

  const bool both_bootstrap =
      std::find(methods.begin(), methods.end(), "norm_bootstrap") != methods.end() &&
      std::find(methods.begin(), methods.end(), "proj_bootstrap") != methods.end();

  // Group models per delta cell (group 1 does not depend on delta).
  std::vector<GroupModel> models1(config.deltas.size()), models2(config.deltas.size());
  for (std::size_t d = 0; d < config.deltas.size(); ++d) {
    SimConfig cell = config.base;
    cell.delta = config.deltas[d];
    models1[d] = make_group_model(grid, cell, 1);
    models2[d] = make_group_model(grid, cell, 2);
  }

  const std::size_t total = config.deltas.size() * runs;
  std::vector<std::vector<Outcome>> outcomes(total, std::vector<Outcome>(n_methods, Outcome::failed));

  parallel_for(total, [&](std::size_t task) {
    const std::size_t d = task / runs;
    SimConfig cell = config.base;
    cell.delta = config.deltas[d];
    const std::uint64_t task_seed =
        splitmix64(splitmix64(config.base.seed ^ kTagStudy) + task);
    Rng rng = derive_rng(task_seed, 0);
    const SampleSet s1 = draw_sample(models1[d], cell, rng);
    const SampleSet s2 = draw_sample(models2[d], cell, rng);

    std::vector<Outcome>& row = outcomes[task];
    TestReport boot_norm, boot_proj;
    bool boot_done = false, boot_failed = false;
    for (std::size_t m = 0; m < n_methods; ++m) {
      const std::uint64_t op_seed = splitmix64(task_seed ^ (0xa11ce + m));
      try {
        const std::string& name = methods[m];
        if (name == "norm_asymptotic") {
          row[m] = to_outcome(two_sample_norm(s1, s2, cell.n_draws, op_seed), cell.alpha);
        } else if (name == "proj_asymptotic") {
          row[m] = to_outcome(two_sample_proj(s1, s2, config.fve, op_seed), cell.alpha);
        } else if (name == "norm_bootstrap" || name == "proj_bootstrap") {
          if (both_bootstrap) {
            if (!boot_done) {
              boot_done = true;
              const std::uint64_t boot_seed = splitmix64(task_seed ^ 0xb00157U);
              try {
                const BootstrapPair pair =
                    bootstrap_two_sample_both(s1, s2, cell.n_boot, config.fve, boot_seed);
                boot_norm = pair.norm;
                boot_proj = pair.proj;
              } catch (...) {
                boot_failed = true;
              }
            }
            if (boot_failed) throw DomainError("bootstrap engine failed for this run");
            row[m] = to_outcome(name == "norm_bootstrap" ? boot_norm : boot_proj, cell.alpha);
          } else {
            const StatKind kind =
                name == "norm_bootstrap" ? StatKind::norm : StatKind::proj;
            row[m] = to_outcome(
                bootstrap_two_sample(s1, s2, cell.n_boot, kind, config.fve, op_seed),
                cell.alpha);
          }
        } else if (name == "extrinsic") {
          row[m] = to_outcome(extrinsic_two_sample(s1, s2, cell.n_boot, op_seed), cell.alpha);
        } else if (name == "flat") {
          row[m] = to_outcome(
              flat_density_two_sample(grid, s1.coefs().cwiseAbs2(), s2.coefs().cwiseAbs2(),
                                      cell.n_boot, op_seed),
              cell.alpha);
        }
      } catch (const ConvergenceError&) {
        row[m] = Outcome::failed;
      } catch (const ConditioningError&) {
        row[m] = Outcome::failed;
      } catch (const DomainError&) {
        row[m] = Outcome::failed;
      }
    }
  });

  PowerTable table;
  for (std::size_t d = 0; d < config.deltas.size(); ++d) {
    for (std::size_t m = 0; m < n_methods; ++m) {
      PowerCell cell;
      cell.delta = config.deltas[d];
      cell.n_g = config.base.n_g;
      cell.K_mu = config.base.K_mu;
      cell.score_dist = to_string(config.base.score_dist);
      cell.method = methods[m];
      for (std::size_t r = 0; r < runs; ++r) {
        const Outcome o = outcomes[d * runs + r][m];
        if (o == Outcome::failed) {
          ++cell.failures;
        } else {
          ++cell.runs;
          if (o == Outcome::reject) ++cell.rejections;
        }
      }
      if (cell.runs > 0) {
        cell.proportion = static_cast<double>(cell.rejections) / static_cast<double>(cell.runs);
        cell.se = std::sqrt(cell.proportion * (1.0 - cell.proportion) /
                            static_cast<double>(cell.runs));
      }
      cell.valid =
          static_cast<double>(cell.failures) < 0.01 * static_cast<double>(config.base.runs);
      table.rows.push_back(std::move(cell));
    }
  }
  return table;
}

std::string power_table_csv(const PowerTable& table) {
  std::string out = "delta,n_g,K_mu,score_dist,method,rejections,runs,proportion,se\n";
  for (const auto& row : table.rows) {
    out += format_double(row.delta);
    out += ',' + std::to_string(row.n_g);
    out += ',' + std::to_string(row.K_mu);
    out += ',' + row.score_dist;
    out += ',' + row.method;
    out += ',' + std::to_string(row.rejections);
    out += ',' + std::to_string(row.runs);
    out += ',' + format_double(row.proportion);
    out += ',' + format_double(row.se);
    out += '\n';
  }
  return out;
}

std::string power_table_json(const PowerTable& table) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : table.rows) {
    rows.push_back({{"delta", row.delta},
                    {"n_g", row.n_g},
                    {"K_mu", row.K_mu},
                    {"score_dist", row.score_dist},
                    {"method", row.method},
                    {"rejections", row.rejections},
                    {"runs", row.runs},
                    {"failures", row.failures},
                    {"proportion", row.proportion},
                    {"se", row.se},
                    {"valid", row.valid}});
  }
  return nlohmann::json{{"rows", rows}}.dump(2) + "\n";
}

}  // namespace hsphere
