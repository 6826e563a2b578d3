#include "hsphere/testing.hpp"

#include <Eigen/Dense>
#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <limits>

#include "hsphere/parallel.hpp"
#include "hsphere/rng.hpp"

namespace hsphere {

namespace {

constexpr std::uint64_t kTagNullDraws = 0x6e756c6cU;
constexpr std::uint64_t kTagBootstrap = 0x626f6f74U;
constexpr double kZeroStatistic = 1e-10;
constexpr double kInf = std::numeric_limits<double>::infinity();

// Eigendata of a null covariance operator, with the exact matrix trace kept
// separately so spectrum truncation can account for the untracked tail.
struct Calibration {
  std::vector<double> values;
  std::vector<Eigen::VectorXd> vectors;  // coefficient-space eigenvectors
  double trace = 0.0;
};

Calibration calibrate(const TangentOperator& op) {
  Calibration out;
  EigenSystem es = eigen(op, op.base.grid->size());
  out.values = std::move(es.values);
  out.vectors.reserve(es.vectors.size());
  for (auto& v : es.vectors) out.vectors.push_back(std::move(v.coef));
  out.trace = op.mat.trace();
  return out;
}

bool degenerate_spectrum(const Calibration& cal) {
  return cal.values.empty() || !(cal.trace > 0.0);
}

// FVE choice validated against the numerical floor of the spectrum.
int choose_K(const Calibration& cal, double r) {
  const int k = select_K(cal.values, r);
  const double floor = cal.values.front() * kEigenvalueFloorRel;
  if (cal.values[static_cast<std::size_t>(k) - 1] <= floor)
    throw ConditioningError("projection test: eigenvalue " + std::to_string(k) +
                                " is below the numerical floor",
                            cal.values[static_cast<std::size_t>(k) - 1]);
  return k;
}

double proj_statistic(const Grid& grid, const Eigen::VectorXd& d, const Calibration& cal,
                      int k, double n_total) {
  double acc = 0.0;
  for (int j = 0; j < k; ++j) {
    const double c = grid.inner(d, cal.vectors[static_cast<std::size_t>(j)]);
    acc += c * c / cal.values[static_cast<std::size_t>(j)];
  }
  return n_total * acc;
}

double add_one_pvalue(long exceed, long total) {
  return static_cast<double>(1 + exceed) / static_cast<double>(total + 1);
}

std::vector<Eigen::Index> draw_indices(Rng& rng, Eigen::Index n) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  for (auto& i : idx)
    i = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n)));
  return idx;
}

// Lexicographic comparison of sample coefficient matrices; two-sample tests
// canonicalize the group order with it so that statistics and p-values are
// exactly invariant under swapping the labels.
bool canonical_swap(const SampleSet& a, const SampleSet& b) {
  if (a.size() != b.size()) return a.size() > b.size();
  const auto& ca = a.coefs();
  const auto& cb = b.coefs();
  for (Eigen::Index j = 0; j < ca.cols(); ++j)
    for (Eigen::Index i = 0; i < ca.rows(); ++i) {
      if (ca(i, j) < cb(i, j)) return false;
      if (ca(i, j) > cb(i, j)) return true;
    }
  return false;
}

struct OneSampleStats {
  FrechetMeanResult mean;
  SupportCheck support;
  Calibration cal;        // T-hat transported to the chart base mu0
  Eigen::VectorXd tau;    // log_{mu0}(mean)
  double t_stat = 0.0;    // n rho^2(mean, mu0)
  bool degenerate = false;
};

OneSampleStats one_sample_stats(const SampleSet& sample, const SpherePoint& mu0) {
  require_same_grid(*sample.grid(), *mu0.grid, "one-sample test");
  OneSampleStats st;
  st.support = check_support(sample);
  st.mean = frechet_mean(sample);
  const double rho = geodesic_distance(st.mean.mean, mu0);
  st.t_stat = static_cast<double>(sample.size()) * rho * rho;
  st.tau = log_map(mu0, st.mean.mean).coef;
  const TangentOperator t_hat = asymptotic_covariance(sample, st.mean.mean);
  st.cal = calibrate(transport_operator(st.mean.mean, mu0, t_hat));
  st.degenerate = degenerate_spectrum(st.cal);
  return st;
}

struct TwoSampleStats {
  SpherePoint base;  // pooled Frechet mean, the chart base
  FrechetMeanResult m1, m2;
  SupportCheck support;  // of the pooled sample
  Calibration cal;       // pooled T-hat at the chart base
  Eigen::VectorXd d;     // tau(m1) - tau(m2)
  double t_stat = 0.0;
  double n_total = 0.0;
  bool degenerate = false;
};

// Per-group sandwich covariance expressed at the chart base.
TangentOperator group_covariance_at(const SampleSet& sample, const FrechetMeanResult& mean,
                                    const SpherePoint& base) {
  return transport_operator(mean.mean, base,
                            asymptotic_covariance(sample, mean.mean));
}

TangentOperator pool_operators(const TangentOperator& t1, const TangentOperator& t2,
                               double n_total, double n1, double n2) {
  Eigen::MatrixXd mat = (n_total / n1) * t1.mat + (n_total / n2) * t2.mat;
  Eigen::MatrixXd factors(t1.factors->rows(), t1.factors->cols() + t2.factors->cols());
  factors << std::sqrt(n_total / n1) * (*t1.factors), std::sqrt(n_total / n2) * (*t2.factors);
  return TangentOperator{t1.base, std::move(mat), std::move(factors)};
}

TwoSampleStats two_sample_stats(const SampleSet& s1, const SampleSet& s2) {
  require_same_grid(*s1.grid(), *s2.grid(), "two-sample test");
  if (s1.size() < 2 || s2.size() < 2)
    throw DomainError("two-sample test: each group needs at least 2 observations");
  TwoSampleStats st;
  const SampleSet pooled = pool_samples(s1, s2);
  st.support = check_support(pooled);
  st.base = frechet_mean(pooled).mean;
  st.m1 = frechet_mean(s1);
  st.m2 = frechet_mean(s2);
  const double n1 = static_cast<double>(s1.size());
  const double n2 = static_cast<double>(s2.size());
  st.n_total = n1 + n2;
  const TangentOperator t1 = group_covariance_at(s1, st.m1, st.base);
  const TangentOperator t2 = group_covariance_at(s2, st.m2, st.base);
  st.cal = calibrate(pool_operators(t1, t2, st.n_total, n1, n2));
  st.d = log_map(st.base, st.m1.mean).coef - log_map(st.base, st.m2.mean).coef;
  st.t_stat = st.n_total * st.base.grid->inner(st.d, st.d);
  st.degenerate = degenerate_spectrum(st.cal);
  return st;
}

void fill_common(TestReport& report, const SupportCheck& support, std::uint64_t seed) {
  report.support_ok = support.satisfied;
  report.support_diameter = support.diameter;
  report.seed = seed;
}

[[noreturn]] void throw_degenerate() {
  throw DomainError("no variation under null");
}

// Shared bootstrap replicate bookkeeping: per-slot statistics, one retry on
// solver failure, failed replicates counted as exceeding (conservative).
struct ReplicateTable {
  std::vector<double> t;
  std::vector<double> s;
  std::vector<unsigned char> failed;

  explicit ReplicateTable(long n_boot)
      : t(static_cast<std::size_t>(n_boot), kInf),
        s(static_cast<std::size_t>(n_boot), kInf),
        failed(static_cast<std::size_t>(n_boot), 0) {}

  long count_exceeding_t(double observed) const {
    long c = 0;
    for (double v : t) c += (v >= observed);
    return c;
  }
  long count_exceeding_s(double observed) const {
    long c = 0;
    for (double v : s) c += (v >= observed);
    return c;
  }
  int failures() const {
    int c = 0;
    for (unsigned char f : failed) c += f;
    return c;
  }
};

template <typename Replicate>
ReplicateTable run_replicates(long n_boot, std::uint64_t seed, Replicate&& replicate) {
  ReplicateTable table(n_boot);
  parallel_for(static_cast<std::size_t>(n_boot), [&](std::size_t b) {
    Rng rng = derive_rng(splitmix64(seed ^ kTagBootstrap), static_cast<std::uint64_t>(b));
    for (int attempt = 0; attempt < 2; ++attempt) {
      try {
        replicate(rng, table.t[b], table.s[b]);
        return;
      } catch (const ConvergenceError&) {
      } catch (const ConditioningError&) {
      } catch (const DomainError&) {
      }
    }
    table.t[b] = kInf;
    table.s[b] = kInf;
    table.failed[b] = 1;
  });
  return table;
}

}  // namespace

SampleSet pool_samples(const SampleSet& sample1, const SampleSet& sample2) {
  require_same_grid(*sample1.grid(), *sample2.grid(), "pool_samples");
  Eigen::MatrixXd coefs(sample1.coefs().rows(), sample1.size() + sample2.size());
  coefs << sample1.coefs(), sample2.coefs();
  return SampleSet(sample1.grid(), std::move(coefs));
}

NullSpectrum truncate_spectrum(const std::vector<double>& values, double full_trace) {
  NullSpectrum out;
  if (values.empty()) return out;
  const double floor = values.front() * kEigenvalueFloorRel;
  double cum = 0.0;
  for (double v : values) {
    if (v <= floor || v <= 0.0) break;
    out.values.push_back(v);
    cum += v;
    if (cum >= kSpectrumTraceKeep * full_trace) break;
  }
  return out;
}

double weighted_chisq_pvalue(const NullSpectrum& spectrum, double observed, long n_draws,
                             std::uint64_t seed) {
  if (spectrum.values.empty())
    throw DomainError("weighted_chisq_pvalue: empty spectrum");
  if (n_draws < 1) throw DomainError("weighted_chisq_pvalue: need at least one draw");

  constexpr long kBlock = 8192;
  const long n_blocks = (n_draws + kBlock - 1) / kBlock;
  std::vector<long> counts(static_cast<std::size_t>(n_blocks), 0);
  parallel_for(static_cast<std::size_t>(n_blocks), [&](std::size_t block) {
    Rng rng = derive_rng(splitmix64(seed ^ kTagNullDraws), static_cast<std::uint64_t>(block));
    const long begin = static_cast<long>(block) * kBlock;
    const long end = std::min(n_draws, begin + kBlock);
    long local = 0;
    for (long i = begin; i < end; ++i) {
      double draw = 0.0;
      for (double lambda : spectrum.values) {
        const double z = rng.normal();
        draw += lambda * z * z;
      }
      local += (draw >= observed);
    }
    counts[block] = local;
  });
  long exceed = 0;
  for (long c : counts) exceed += c;
  return add_one_pvalue(exceed, n_draws);
}

double chisq_upper_tail(int k, double x) {
  if (k < 1) throw DomainError("chisq_upper_tail: degrees of freedom must be positive");
  if (x <= 0.0) return 1.0;
  const boost::math::chi_squared dist(static_cast<double>(k));
  // p-values are never exactly zero; guard against tail underflow.
  return std::max(boost::math::cdf(boost::math::complement(dist, x)),
                  std::numeric_limits<double>::min());
}

TestReport one_sample_norm(const SampleSet& sample, const SpherePoint& mu0, long n_draws,
                           std::uint64_t seed) {
  const OneSampleStats st = one_sample_stats(sample, mu0);
  TestReport report;
  report.method = "norm_asymptotic";
  report.chart = "log_mu0";
  report.statistic = st.t_stat;
  report.n_draws = n_draws;
  fill_common(report, st.support, seed);
  if (st.degenerate) {
    if (st.t_stat > kZeroStatistic) throw_degenerate();
    report.p_value = 1.0;
    return report;
  }
  report.p_value = weighted_chisq_pvalue(truncate_spectrum(st.cal.values, st.cal.trace),
                                         st.t_stat, n_draws, seed);
  return report;
}

TestReport one_sample_proj(const SampleSet& sample, const SpherePoint& mu0, double fve_threshold,
                           std::uint64_t seed) {
  const OneSampleStats st = one_sample_stats(sample, mu0);
  TestReport report;
  report.method = "proj_asymptotic";
  report.chart = "log_mu0";
  report.fve_threshold = fve_threshold;
  fill_common(report, st.support, seed);
  if (st.degenerate) {
    if (st.t_stat > kZeroStatistic) throw_degenerate();
    report.statistic = 0.0;
    report.p_value = 1.0;
    return report;
  }
  report.K = choose_K(st.cal, fve_threshold);
  report.statistic = proj_statistic(*sample.grid(), st.tau, st.cal, report.K,
                                    static_cast<double>(sample.size()));
  report.p_value = chisq_upper_tail(report.K, report.statistic);
  return report;
}

TestReport two_sample_norm(const SampleSet& sample1, const SampleSet& sample2, long n_draws,
                           std::uint64_t seed) {
  const bool swap = canonical_swap(sample1, sample2);
  const TwoSampleStats st = two_sample_stats(swap ? sample2 : sample1, swap ? sample1 : sample2);
  TestReport report;
  report.method = "norm_asymptotic";
  report.chart = "log_pooled_mean";
  report.statistic = st.t_stat;
  report.n_draws = n_draws;
  fill_common(report, st.support, seed);
  if (st.degenerate) {
    if (st.t_stat > kZeroStatistic) throw_degenerate();
    report.p_value = 1.0;
    return report;
  }
  report.p_value = weighted_chisq_pvalue(truncate_spectrum(st.cal.values, st.cal.trace),
                                         st.t_stat, n_draws, seed);
  return report;
}

TestReport two_sample_proj(const SampleSet& sample1, const SampleSet& sample2,
                           double fve_threshold, std::uint64_t seed) {
  const bool swap = canonical_swap(sample1, sample2);
  const TwoSampleStats st = two_sample_stats(swap ? sample2 : sample1, swap ? sample1 : sample2);
  TestReport report;
  report.method = "proj_asymptotic";
  report.chart = "log_pooled_mean";
  report.fve_threshold = fve_threshold;
  fill_common(report, st.support, seed);
  if (st.degenerate) {
    if (st.t_stat > kZeroStatistic) throw_degenerate();
    report.statistic = 0.0;
    report.p_value = 1.0;
    return report;
  }
  report.K = choose_K(st.cal, fve_threshold);
  report.statistic = proj_statistic(*st.base.grid, st.d, st.cal, report.K, st.n_total);
  report.p_value = chisq_upper_tail(report.K, report.statistic);
  return report;
}

namespace {

BootstrapPair bootstrap_one_sample_engine(const SampleSet& sample, const SpherePoint& mu0,
                                          long n_boot, bool want_proj, double fve_threshold,
                                          std::uint64_t seed) {
  if (n_boot < 99) throw DomainError("bootstrap: need at least 99 replicates");
  const OneSampleStats st = one_sample_stats(sample, mu0);
  const Grid& grid = *sample.grid();
  const double n = static_cast<double>(sample.size());

  if (st.degenerate && st.t_stat > kZeroStatistic) throw_degenerate();
  const int k = (want_proj && !st.degenerate) ? choose_K(st.cal, fve_threshold) : 0;
  const double s_obs =
      k > 0 ? proj_statistic(grid, st.tau, st.cal, k, n) : 0.0;

  if (st.degenerate) {
    // No variation in the sample: every resample reproduces it exactly.
    BootstrapPair pair;
    for (TestReport* report : {&pair.norm, &pair.proj}) {
      report->chart = "log_mu0";
      report->n_boot = n_boot;
      report->p_value = 1.0;
      fill_common(*report, st.support, seed);
    }
    pair.norm.method = "norm_bootstrap";
    pair.norm.statistic = st.t_stat;
    pair.proj.method = "proj_bootstrap";
    pair.proj.fve_threshold = fve_threshold;
    return pair;
  }

  ReplicateTable table = run_replicates(n_boot, seed, [&](Rng& rng, double& t_out, double& s_out) {
    const SampleSet bs = sample.resample(draw_indices(rng, sample.size()));
    const FrechetMeanResult mb = frechet_mean(bs);
    const Eigen::VectorXd tau_b = log_map(mu0, mb.mean).coef;
    const Eigen::VectorXd diff = tau_b - st.tau;
    t_out = n * grid.inner(diff, diff);
    if (k > 0) {
      const TangentOperator tb = asymptotic_covariance(bs, mb.mean);
      const Calibration cal_b = calibrate(transport_operator(mb.mean, mu0, tb));
      if (static_cast<int>(cal_b.values.size()) < k)
        throw ConditioningError("bootstrap replicate spectrum too short",
                                cal_b.values.empty() ? 0.0 : cal_b.values.back());
      s_out = proj_statistic(grid, diff, cal_b, k, n);
    } else {
      s_out = 0.0;
    }
  });

  BootstrapPair pair;
  for (TestReport* report : {&pair.norm, &pair.proj}) {
    report->chart = "log_mu0";
    report->n_boot = n_boot;
    report->nonconvergent_replicates = table.failures();
    fill_common(*report, st.support, seed);
  }
  pair.norm.method = "norm_bootstrap";
  pair.norm.statistic = st.t_stat;
  pair.norm.p_value = add_one_pvalue(table.count_exceeding_t(st.t_stat), n_boot);
  pair.proj.method = "proj_bootstrap";
  pair.proj.fve_threshold = fve_threshold;
  pair.proj.K = k;
  pair.proj.statistic = s_obs;
  pair.proj.p_value = add_one_pvalue(table.count_exceeding_s(s_obs), n_boot);
  return pair;
}

BootstrapPair bootstrap_two_sample_engine(const SampleSet& sample1, const SampleSet& sample2,
                                          long n_boot, bool want_proj, double fve_threshold,
                                          std::uint64_t seed) {
  if (n_boot < 99) throw DomainError("bootstrap: need at least 99 replicates");
  const bool swap = canonical_swap(sample1, sample2);
  const SampleSet& g1 = swap ? sample2 : sample1;
  const SampleSet& g2 = swap ? sample1 : sample2;
  const TwoSampleStats st = two_sample_stats(g1, g2);
  const Grid& grid = *st.base.grid;
  const double n1 = static_cast<double>(g1.size());
  const double n2 = static_cast<double>(g2.size());

  if (st.degenerate && st.t_stat > kZeroStatistic) throw_degenerate();
  const int k = (want_proj && !st.degenerate) ? choose_K(st.cal, fve_threshold) : 0;
  const double s_obs = k > 0 ? proj_statistic(grid, st.d, st.cal, k, st.n_total) : 0.0;

  const Eigen::VectorXd tau1 = log_map(st.base, st.m1.mean).coef;
  const Eigen::VectorXd tau2 = log_map(st.base, st.m2.mean).coef;

  ReplicateTable table = run_replicates(n_boot, seed, [&](Rng& rng, double& t_out, double& s_out) {
    const SampleSet b1 = g1.resample(draw_indices(rng, g1.size()));
    const SampleSet b2 = g2.resample(draw_indices(rng, g2.size()));
    const FrechetMeanResult m1b = frechet_mean(b1);
    const FrechetMeanResult m2b = frechet_mean(b2);
    const Eigen::VectorXd diff = (log_map(st.base, m1b.mean).coef - tau1) -
                                 (log_map(st.base, m2b.mean).coef - tau2);
    t_out = st.n_total * grid.inner(diff, diff);
    if (k > 0) {
      const TangentOperator t1b = group_covariance_at(b1, m1b, st.base);
      const TangentOperator t2b = group_covariance_at(b2, m2b, st.base);
      const Calibration cal_b = calibrate(pool_operators(t1b, t2b, st.n_total, n1, n2));
      if (static_cast<int>(cal_b.values.size()) < k)
        throw ConditioningError("bootstrap replicate spectrum too short",
                                cal_b.values.empty() ? 0.0 : cal_b.values.back());
      s_out = proj_statistic(grid, diff, cal_b, k, st.n_total);
    } else {
      s_out = 0.0;
    }
  });

  BootstrapPair pair;
  for (TestReport* report : {&pair.norm, &pair.proj}) {
    report->chart = "log_pooled_mean";
    report->n_boot = n_boot;
    report->nonconvergent_replicates = table.failures();
    fill_common(*report, st.support, seed);
  }
  pair.norm.method = "norm_bootstrap";
  pair.norm.statistic = st.t_stat;
  pair.norm.p_value = add_one_pvalue(table.count_exceeding_t(st.t_stat), n_boot);
  pair.proj.method = "proj_bootstrap";
  pair.proj.fve_threshold = fve_threshold;
  pair.proj.K = k;
  pair.proj.statistic = s_obs;
  pair.proj.p_value = add_one_pvalue(table.count_exceeding_s(s_obs), n_boot);
  return pair;
}

}  // namespace

TestReport bootstrap_one_sample(const SampleSet& sample, const SpherePoint& mu0, long n_boot,
                                StatKind kind, double fve_threshold, std::uint64_t seed) {
  const BootstrapPair pair = bootstrap_one_sample_engine(sample, mu0, n_boot,
                                                         kind == StatKind::proj, fve_threshold,
                                                         seed);
  return kind == StatKind::proj ? pair.proj : pair.norm;
}

BootstrapPair bootstrap_one_sample_both(const SampleSet& sample, const SpherePoint& mu0,
                                        long n_boot, double fve_threshold, std::uint64_t seed) {
  return bootstrap_one_sample_engine(sample, mu0, n_boot, true, fve_threshold, seed);
}

TestReport bootstrap_two_sample(const SampleSet& sample1, const SampleSet& sample2, long n_boot,
                                StatKind kind, double fve_threshold, std::uint64_t seed) {
  const BootstrapPair pair = bootstrap_two_sample_engine(sample1, sample2, n_boot,
                                                         kind == StatKind::proj, fve_threshold,
                                                         seed);
  return kind == StatKind::proj ? pair.proj : pair.norm;
}

BootstrapPair bootstrap_two_sample_both(const SampleSet& sample1, const SampleSet& sample2,
                                        long n_boot, double fve_threshold, std::uint64_t seed) {
  return bootstrap_two_sample_engine(sample1, sample2, n_boot, true, fve_threshold, seed);
}

TestReport extrinsic_two_sample(const SampleSet& sample1, const SampleSet& sample2, long n_boot,
                                std::uint64_t seed) {
  if (n_boot < 99) throw DomainError("bootstrap: need at least 99 replicates");
  const bool swap = canonical_swap(sample1, sample2);
  const SampleSet& g1 = swap ? sample2 : sample1;
  const SampleSet& g2 = swap ? sample1 : sample2;
  require_same_grid(*g1.grid(), *g2.grid(), "extrinsic_two_sample");
  const Grid& grid = *g1.grid();
  const double n_total = static_cast<double>(g1.size() + g2.size());

  const SpherePoint m1 = extrinsic_mean(g1);
  const SpherePoint m2 = extrinsic_mean(g2);
  const Eigen::VectorXd d = m1.coef - m2.coef;
  const double observed = n_total * grid.inner(d, d);

  ReplicateTable table = run_replicates(n_boot, seed, [&](Rng& rng, double& t_out, double& s_out) {
    const SpherePoint m1b = extrinsic_mean(g1.resample(draw_indices(rng, g1.size())));
    const SpherePoint m2b = extrinsic_mean(g2.resample(draw_indices(rng, g2.size())));
    const Eigen::VectorXd diff = (m1b.coef - m1.coef) - (m2b.coef - m2.coef);
    t_out = n_total * grid.inner(diff, diff);
    s_out = 0.0;
  });

  TestReport report;
  report.method = "extrinsic_bootstrap";
  report.chart = "ambient";
  report.statistic = observed;
  report.n_boot = n_boot;
  report.p_value = add_one_pvalue(table.count_exceeding_t(observed), n_boot);
  report.nonconvergent_replicates = table.failures();
  fill_common(report, check_support(pool_samples(g1, g2)), seed);
  return report;
}

TestReport flat_density_two_sample(const GridPtr& grid, const Eigen::MatrixXd& densities1,
                                   const Eigen::MatrixXd& densities2, long n_boot,
                                   std::uint64_t seed) {
  if (n_boot < 99) throw DomainError("bootstrap: need at least 99 replicates");
  if (!grid) throw DimensionError("flat_density_two_sample: null grid");
  for (const Eigen::MatrixXd* densities : {&densities1, &densities2}) {
    if (densities->cols() == 0)
      throw DimensionError("flat_density_two_sample: empty group");
    if (densities->rows() != grid->size())
      throw DimensionError("flat_density_two_sample: density rows do not match grid size");
    for (Eigen::Index j = 0; j < densities->cols(); ++j) {
      if ((densities->col(j).array() < 0.0).any())
        throw ValidationError("flat_density_two_sample: negative density value in column " +
                              std::to_string(j));
      const double mass = grid->inner(densities->col(j), Eigen::VectorXd::Ones(grid->size()));
      if (std::abs(mass - 1.0) > 1e-9)
        throw ValidationError("flat_density_two_sample: column " + std::to_string(j) +
                              " does not integrate to 1");
    }
  }
  const bool swap = [&] {
    if (densities1.cols() != densities2.cols()) return densities1.cols() > densities2.cols();
    for (Eigen::Index j = 0; j < densities1.cols(); ++j)
      for (Eigen::Index i = 0; i < densities1.rows(); ++i) {
        if (densities1(i, j) < densities2(i, j)) return false;
        if (densities1(i, j) > densities2(i, j)) return true;
      }
    return false;
  }();
  const Eigen::MatrixXd& g1 = swap ? densities2 : densities1;
  const Eigen::MatrixXd& g2 = swap ? densities1 : densities2;
  const double n_total = static_cast<double>(g1.cols() + g2.cols());

  const Eigen::VectorXd mean1 = g1.rowwise().mean();
  const Eigen::VectorXd mean2 = g2.rowwise().mean();
  const Eigen::VectorXd d = mean1 - mean2;
  const double observed = n_total * grid->inner(d, d);

  const auto resampled_mean = [](const Eigen::MatrixXd& group, Rng& rng) {
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(group.rows());
    for (Eigen::Index i = 0; i < group.cols(); ++i)
      acc += group.col(static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(group.cols()))));
    return (acc / static_cast<double>(group.cols())).eval();
  };

  ReplicateTable table = run_replicates(n_boot, seed, [&](Rng& rng, double& t_out, double& s_out) {
    const Eigen::VectorXd m1b = resampled_mean(g1, rng);
    const Eigen::VectorXd m2b = resampled_mean(g2, rng);
    const Eigen::VectorXd diff = (m1b - mean1) - (m2b - mean2);
    t_out = n_total * grid->inner(diff, diff);
    s_out = 0.0;
  });

  TestReport report;
  report.method = "flat_density_bootstrap";
  report.chart = "flat";
  report.statistic = observed;
  report.n_boot = n_boot;
  report.p_value = add_one_pvalue(table.count_exceeding_t(observed), n_boot);
  report.nonconvergent_replicates = table.failures();
  // The (A1) flag is reported for the corresponding square-root densities.
  Eigen::MatrixXd sqrt_all(grid->size(), g1.cols() + g2.cols());
  sqrt_all << g1.cwiseSqrt(), g2.cwiseSqrt();
  for (Eigen::Index j = 0; j < sqrt_all.cols(); ++j)
    sqrt_all.col(j) /= grid->norm(sqrt_all.col(j));
  fill_common(report, check_support(SampleSet(grid, std::move(sqrt_all))), seed);
  return report;
}

}  // namespace hsphere
