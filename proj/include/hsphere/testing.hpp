#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hsphere/estimation.hpp"

namespace hsphere {

inline constexpr double kSpectrumTraceKeep = 0.999;

enum class StatKind { norm, proj };

struct TestReport {
  double statistic = 0.0;
  double p_value = 1.0;
  std::string method;  // norm_asymptotic | proj_asymptotic | norm_bootstrap |
                       // proj_bootstrap | extrinsic_bootstrap | flat_density_bootstrap
  int K = 0;           // projections used; 0 for norm-based tests
  std::optional<double> fve_threshold;
  long n_draws = 0;  // Monte Carlo draws for the weighted chi-square law
  long n_boot = 0;   // bootstrap replicates
  bool support_ok = true;
  double support_diameter = 0.0;
  std::uint64_t seed = 0;
  std::string chart;  // log_mu0 | log_pooled_mean | ambient | flat
  int nonconvergent_replicates = 0;
};

// Nonincreasing eigenvalues of the null covariance, truncated for the
// weighted chi-square Monte Carlo.
struct NullSpectrum {
  std::vector<double> values;
};

// Keeps eigenvalues until the cumulative sum reaches 99.9% of the full trace,
// dropping anything below 1e-12 * lambda_1.
NullSpectrum truncate_spectrum(const std::vector<double>& values, double full_trace);

// P(sum_k lambda_k W_k >= observed) by Monte Carlo with the add-one rule,
// W_k iid chi-square(1). Deterministic for a fixed seed.
double weighted_chisq_pvalue(const NullSpectrum& spectrum, double observed, long n_draws,
                             std::uint64_t seed);

// Upper tail of the chi-square distribution with k degrees of freedom.
double chisq_upper_tail(int k, double x);

// --- one-sample tests, H0: mu = mu0, chart tau = log_{mu0} ---

TestReport one_sample_norm(const SampleSet& sample, const SpherePoint& mu0,
                           long n_draws = 100000, std::uint64_t seed = 0);
TestReport one_sample_proj(const SampleSet& sample, const SpherePoint& mu0,
                           double fve_threshold, std::uint64_t seed = 0);
TestReport bootstrap_one_sample(const SampleSet& sample, const SpherePoint& mu0, long n_boot,
                                StatKind kind, double fve_threshold, std::uint64_t seed);

// --- two-sample tests, H0: mu_1 = mu_2, chart at the pooled Frechet mean ---

TestReport two_sample_norm(const SampleSet& sample1, const SampleSet& sample2,
                           long n_draws = 100000, std::uint64_t seed = 0);
TestReport two_sample_proj(const SampleSet& sample1, const SampleSet& sample2,
                           double fve_threshold, std::uint64_t seed = 0);
TestReport bootstrap_two_sample(const SampleSet& sample1, const SampleSet& sample2, long n_boot,
                                StatKind kind, double fve_threshold, std::uint64_t seed);

// Norm-based bootstrap test of the extrinsic (normalized ambient average) means.
TestReport extrinsic_two_sample(const SampleSet& sample1, const SampleSet& sample2, long n_boot,
                                std::uint64_t seed);

// Norm-based bootstrap test on raw densities in the flat function space.
// Columns of the matrices are densities integrating to one on the grid.
TestReport flat_density_two_sample(const GridPtr& grid, const Eigen::MatrixXd& densities1,
                                   const Eigen::MatrixXd& densities2, long n_boot,
                                   std::uint64_t seed);

// Batched engines: one bootstrap replicate pass serves both statistic kinds,
// with identical resamples to the single-kind entry points at the same seed.
struct BootstrapPair {
  TestReport norm;
  TestReport proj;
};
BootstrapPair bootstrap_one_sample_both(const SampleSet& sample, const SpherePoint& mu0,
                                        long n_boot, double fve_threshold, std::uint64_t seed);
BootstrapPair bootstrap_two_sample_both(const SampleSet& sample1, const SampleSet& sample2,
                                        long n_boot, double fve_threshold, std::uint64_t seed);

// Pooled sample helper (columns of sample2 appended to sample1).
SampleSet pool_samples(const SampleSet& sample1, const SampleSet& sample2);

}  // namespace hsphere
