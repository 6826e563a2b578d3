#include <CLI11.hpp>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>

#include "hsphere/density_io.hpp"
#include "hsphere/format.hpp"
#include "hsphere/parallel.hpp"
#include "hsphere/simulation.hpp"

namespace fs = std::filesystem;
using namespace hsphere;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitConvergence = 3;
constexpr int kExitInternal = 4;

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double ms() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

void write_file(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path().empty() ? "." : path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write '" + path.string() + "'");
  out << content;
}

std::string join_args(int argc, char** argv) {
  std::string out;
  for (int i = 0; i < argc; ++i) {
    if (i) out += ' ';
    out += argv[i];
  }
  return out;
}

struct CommonOpts {
  std::string format = "csv_wide";
  std::string out_dir = ".";
  bool strict_positive = false;
  std::uint64_t seed = 42;
  int threads = 0;
};

void add_common(CLI::App* cmd, CommonOpts& opts, bool with_seed = true) {
  cmd->add_option("--format", opts.format, "Input format: csv_wide or csv_long")
      ->check(CLI::IsMember({"csv_wide", "csv_long"}));
  cmd->add_option("--out", opts.out_dir, "Output directory");
  cmd->add_flag("--strict-positive", opts.strict_positive,
                "Reject observations with zero-mass zones");
  if (with_seed) cmd->add_option("--seed", opts.seed, "Master RNG seed");
  cmd->add_option("--threads", opts.threads, "Worker threads (0 = hardware default)");
}

IngestResult load(const std::string& path, const CommonOpts& opts) {
  IngestOptions io;
  io.format = density_format_from_string(opts.format);
  io.strict_positive = opts.strict_positive;
  return ingest_densities(fs::path(path), io);
}

RunManifest make_manifest(const std::string& command, const CommonOpts& opts,
                          const std::map<std::string, std::string>& config,
                          const std::vector<std::string>& inputs) {
  RunManifest m;
  m.command = command;
  m.config = config;
  m.seed = opts.seed;
  m.library_version = kLibraryVersion;
  m.threads = max_threads();
  for (const auto& path : inputs) m.input_digests[path] = fnv1a_digest_file(path);
  return m;
}

std::string mean_csv(const DensityTable& table, const Eigen::VectorXd& mean1,
                     const Eigen::VectorXd* mean2) {
  std::string out = mean2 ? "abscissa,weight,mean1,mean2,density_diff\n"
                          : "abscissa,weight,mean\n";
  for (Eigen::Index j = 0; j < table.grid->size(); ++j) {
    out += table.labels[static_cast<std::size_t>(j)];
    out += ',' + format_double(table.grid->weights()[j]);
    out += ',' + format_double(mean1[j]);
    if (mean2) {
      out += ',' + format_double((*mean2)[j]);
      out += ',' + format_double(mean1[j] * mean1[j] - (*mean2)[j] * (*mean2)[j]);
    }
    out += '\n';
  }
  return out;
}

int cmd_mean(const std::vector<std::string>& inputs, const CommonOpts& opts,
             const std::string& command) {
  Stopwatch watch;
  const fs::path out_dir(opts.out_dir);
  std::vector<IngestResult> data;
  for (const auto& path : inputs) data.push_back(load(path, opts));

  nlohmann::json diagnostics = nlohmann::json::array();
  std::vector<Eigen::VectorXd> means;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const FrechetMeanResult res = frechet_mean(data[i].sample);
    const SupportCheck support = check_support(data[i].sample);
    means.push_back(res.mean.coef);
    diagnostics.push_back({{"input", inputs[i]},
                           {"iterations", res.iterations},
                           {"final_gradient_norm", res.final_gradient_norm},
                           {"functional_value", res.functional_value},
                           {"support_ok", support.satisfied},
                           {"support_diameter", support.diameter}});
  }

  write_file(out_dir / "mean.csv",
             mean_csv(data[0].table, means[0], means.size() > 1 ? &means[1] : nullptr));
  write_file(out_dir / "diagnostics.json", diagnostics.dump(2) + "\n");

  RunManifest manifest = make_manifest(command, opts, {{"format", opts.format}}, inputs);
  manifest.timings_ms["total"] = watch.ms();
  write_file(out_dir / "manifest.json", manifest_json(manifest));
  return kExitOk;
}

struct TestOpts {
  CommonOpts common;
  std::string method = "norm_asymptotic";
  double fve = 0.95;
  long n_boot = 499;
  long n_draws = 100000;
};

TestReport dispatch_one_sample(const std::string& method, const IngestResult& sample,
                               const SpherePoint& mu0, const TestOpts& opts) {
  if (method == "norm_asymptotic")
    return one_sample_norm(sample.sample, mu0, opts.n_draws, opts.common.seed);
  if (method == "proj_asymptotic")
    return one_sample_proj(sample.sample, mu0, opts.fve, opts.common.seed);
  if (method == "norm_bootstrap")
    return bootstrap_one_sample(sample.sample, mu0, opts.n_boot, StatKind::norm, opts.fve,
                                opts.common.seed);
  if (method == "proj_bootstrap")
    return bootstrap_one_sample(sample.sample, mu0, opts.n_boot, StatKind::proj, opts.fve,
                                opts.common.seed);
  throw ValidationError("method '" + method + "' is not available for one-sample tests");
}

TestReport dispatch_two_sample(const std::string& method, const IngestResult& g1,
                               const IngestResult& g2, const TestOpts& opts) {
  if (method == "norm_asymptotic")
    return two_sample_norm(g1.sample, g2.sample, opts.n_draws, opts.common.seed);
  if (method == "proj_asymptotic")
    return two_sample_proj(g1.sample, g2.sample, opts.fve, opts.common.seed);
  if (method == "norm_bootstrap")
    return bootstrap_two_sample(g1.sample, g2.sample, opts.n_boot, StatKind::norm, opts.fve,
                                opts.common.seed);
  if (method == "proj_bootstrap")
    return bootstrap_two_sample(g1.sample, g2.sample, opts.n_boot, StatKind::proj, opts.fve,
                                opts.common.seed);
  if (method == "extrinsic")
    return extrinsic_two_sample(g1.sample, g2.sample, opts.n_boot, opts.common.seed);
  if (method == "flat")
    return flat_density_two_sample(g1.table.grid, g1.table.densities, g2.table.densities,
                                   opts.n_boot, opts.common.seed);
  throw ValidationError("unknown method '" + method + "'");
}

std::map<std::string, std::string> test_config(const TestOpts& opts) {
  return {{"method", opts.method},
          {"fve", format_double(opts.fve)},
          {"boot", std::to_string(opts.n_boot)},
          {"draws", std::to_string(opts.n_draws)},
          {"format", opts.common.format},
          {"strict_positive", opts.common.strict_positive ? "true" : "false"}};
}

int cmd_test(bool two_sample, const std::vector<std::string>& inputs, const TestOpts& opts,
             const std::string& command) {
  Stopwatch watch;
  const fs::path out_dir(opts.common.out_dir);
  const IngestResult first = load(inputs[0], opts.common);
  const IngestResult second = load(inputs[1], opts.common);

  TestReport report;
  if (two_sample) {
    report = dispatch_two_sample(opts.method, first, second, opts);
  } else {
    if (second.sample.size() != 1)
      throw ValidationError("mu0 file must contain exactly one observation, got " +
                            std::to_string(second.sample.size()));
    require_same_grid(*first.sample.grid(), *second.sample.grid(), "test-one");
    report = dispatch_one_sample(opts.method, first, second.sample.point(0), opts);
  }

  write_file(out_dir / "report.json", test_report_json(report));
  RunManifest manifest = make_manifest(command, opts.common, test_config(opts), inputs);
  manifest.timings_ms["total"] = watch.ms();
  write_file(out_dir / "manifest.json", manifest_json(manifest));
  return kExitOk;
}

StudyConfig study_from_kv(const std::map<std::string, std::string>& kv) {
  StudyConfig config;
  auto parse_long_field = [](const std::string& key, const std::string& value) {
    try {
      return std::stol(value);
    } catch (const std::exception&) {
      throw ValidationError("config key '" + key + "': cannot parse '" + value + "'");
    }
  };
  auto parse_double_field = [](const std::string& key, const std::string& value) {
    try {
      return std::stod(value);
    } catch (const std::exception&) {
      throw ValidationError("config key '" + key + "': cannot parse '" + value + "'");
    }
  };
  auto split_list = [](const std::string& value) {
    std::vector<std::string> items;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
      const auto b = item.find_first_not_of(" \t");
      const auto e = item.find_last_not_of(" \t");
      if (b != std::string::npos) items.push_back(item.substr(b, e - b + 1));
    }
    return items;
  };

  for (const auto& [key, value] : kv) {
    if (key == "n_g") config.base.n_g = static_cast<int>(parse_long_field(key, value));
    else if (key == "K_mu") config.base.K_mu = static_cast<int>(parse_long_field(key, value));
    else if (key == "K_X") config.base.K_X = static_cast<int>(parse_long_field(key, value));
    else if (key == "score_dist") config.base.score_dist = score_dist_from_string(value);
    else if (key == "grid_size") config.base.grid_size = parse_long_field(key, value);
    else if (key == "runs") config.base.runs = parse_long_field(key, value);
    else if (key == "boot") config.base.n_boot = parse_long_field(key, value);
    else if (key == "draws") config.base.n_draws = parse_long_field(key, value);
    else if (key == "seed") config.base.seed = static_cast<std::uint64_t>(parse_long_field(key, value));
    else if (key == "alpha") config.base.alpha = parse_double_field(key, value);
    else if (key == "fve") config.fve = parse_double_field(key, value);
    else if (key == "deltas") {
      config.deltas.clear();
      for (const auto& item : split_list(value))
        config.deltas.push_back(parse_double_field(key, item));
    } else if (key == "methods") {
      config.methods = split_list(value);
    } else if (key == "threads") {
      set_max_threads(static_cast<int>(parse_long_field(key, value)));
    } else {
      throw ValidationError("unknown config key '" + key + "'");
    }
  }
  return config;
}

int cmd_simulate(const std::string& config_path, const CommonOpts& opts,
                 Eigen::Index grid_override, const std::string& command) {
  Stopwatch watch;
  const fs::path out_dir(opts.out_dir);
  const auto kv = read_kv_config(fs::path(config_path));
  StudyConfig config = study_from_kv(kv);
  if (grid_override > 0) config.base.grid_size = grid_override;
  if (opts.threads > 0) set_max_threads(opts.threads);
  config.validate();

  const PowerTable table = run_power_study(config);
  write_file(out_dir / "power.csv", power_table_csv(table));
  write_file(out_dir / "power.json", power_table_json(table));

  CommonOpts manifest_opts = opts;
  manifest_opts.seed = config.base.seed;
  RunManifest manifest = make_manifest(command, manifest_opts, kv, {config_path});
  manifest.timings_ms["total"] = watch.ms();
  write_file(out_dir / "manifest.json", manifest_json(manifest));
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Intrinsic statistics on the Hilbert sphere of square-root densities"};
  app.require_subcommand(1);

  // mean
  auto* mean_cmd = app.add_subcommand("mean", "Frechet mean of ingested densities");
  std::vector<std::string> mean_inputs;
  CommonOpts mean_opts;
  mean_cmd->add_option("inputs", mean_inputs, "Density CSV file(s); two files also produce "
                                              "the density-scale mean difference")
      ->expected(1, 2)
      ->required();
  add_common(mean_cmd, mean_opts, false);

  // test-one
  auto* one_cmd = app.add_subcommand("test-one", "One-sample test of H0: mu = mu0");
  std::vector<std::string> one_inputs;
  TestOpts one_opts;
  one_cmd->add_option("inputs", one_inputs, "SAMPLE.csv MU0.csv (mu0: single observation)")
      ->expected(2)
      ->required();
  one_cmd->add_option("--method", one_opts.method, "Test method")
      ->check(CLI::IsMember({"norm_asymptotic", "proj_asymptotic", "norm_bootstrap",
                             "proj_bootstrap"}));
  one_cmd->add_option("--fve", one_opts.fve, "FVE threshold r for projection tests");
  one_cmd->add_option("--boot", one_opts.n_boot, "Bootstrap replicates");
  one_cmd->add_option("--draws", one_opts.n_draws, "Monte Carlo draws for the weighted chi-square");
  add_common(one_cmd, one_opts.common);

  // test-two
  auto* two_cmd = app.add_subcommand("test-two", "Two-sample test of H0: mu_1 = mu_2");
  std::vector<std::string> two_inputs;
  TestOpts two_opts;
  two_cmd->add_option("inputs", two_inputs, "GROUP1.csv GROUP2.csv")->expected(2)->required();
  two_cmd->add_option("--method", two_opts.method, "Test method")
      ->check(CLI::IsMember({"norm_asymptotic", "proj_asymptotic", "norm_bootstrap",
                             "proj_bootstrap", "extrinsic", "flat"}));
  two_cmd->add_option("--fve", two_opts.fve, "FVE threshold r for projection tests");
  two_cmd->add_option("--boot", two_opts.n_boot, "Bootstrap replicates");
  two_cmd->add_option("--draws", two_opts.n_draws, "Monte Carlo draws for the weighted chi-square");
  add_common(two_cmd, two_opts.common);

  // simulate
  auto* sim_cmd = app.add_subcommand("simulate", "Size/power study of the two-sample tests");
  std::string sim_config;
  CommonOpts sim_opts;
  Eigen::Index sim_grid = 0;
  sim_cmd->add_option("--config", sim_config, "key=value study configuration")->required();
  sim_cmd->add_option("--grid", sim_grid, "Override the grid size");
  sim_cmd->add_option("--out", sim_opts.out_dir, "Output directory");
  sim_cmd->add_option("--threads", sim_opts.threads, "Worker threads (0 = hardware default)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  const std::string command = join_args(argc, argv);
  try {
    if (mean_cmd->parsed()) {
      if (mean_opts.threads > 0) set_max_threads(mean_opts.threads);
      return cmd_mean(mean_inputs, mean_opts, command);
    }
    if (one_cmd->parsed()) {
      if (one_opts.common.threads > 0) set_max_threads(one_opts.common.threads);
      return cmd_test(false, one_inputs, one_opts, command);
    }
    if (two_cmd->parsed()) {
      if (two_opts.common.threads > 0) set_max_threads(two_opts.common.threads);
      return cmd_test(true, two_inputs, two_opts, command);
    }
    if (sim_cmd->parsed()) {
      return cmd_simulate(sim_config, sim_opts, sim_grid, command);
    }
  } catch (const ConvergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConvergence;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const DimensionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const ConditioningError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConvergence;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitInternal;
}
