#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "hsphere/estimation.hpp"
#include "hsphere/testing.hpp"

namespace hsphere {

// Structurally malformed input (ragged rows, missing header, bad number).
class FormatError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

enum class DensityFormat { csv_wide, csv_long };

DensityFormat density_format_from_string(const std::string& name);

// Normalized densities over labeled zones/abscissae. Columns of `densities`
// are observations integrating to one against the grid weights.
struct DensityTable {
  std::vector<std::string> labels;
  GridPtr grid;
  Eigen::MatrixXd densities;
};

struct IngestResult {
  SampleSet sample;   // square-root densities (unit quadrature norm)
  DensityTable table; // the densities themselves, for the flat baseline
};

struct IngestOptions {
  DensityFormat format = DensityFormat::csv_wide;
  bool strict_positive = false;  // reject zero-mass zones
};

// csv_wide: line 1 = zone labels, line 2 = positive weights, following lines
// = one observation per line of nonnegative zone masses (counts).
// csv_long: header obs_id,zone,value; zones and observations ordered by first
// appearance; weights default to the uniform measure 1/Z.
// Each row is normalized to a density against the weights (mass_j / (sum *
// w_j)), then square-rooted and renormalized to unit quadrature norm.
IngestResult ingest_densities(std::istream& in, const IngestOptions& options);
IngestResult ingest_densities(const std::filesystem::path& path, const IngestOptions& options);

// Flat key=value configuration file ('#' comments, blank lines ignored).
// Duplicate keys are rejected.
std::map<std::string, std::string> read_kv_config(std::istream& in);
std::map<std::string, std::string> read_kv_config(const std::filesystem::path& path);

// Everything needed to replay a CLI invocation byte-for-byte. Timings are
// informational and excluded from the reproducibility contract.
struct RunManifest {
  std::string command;
  std::map<std::string, std::string> config;
  std::uint64_t seed = 0;
  std::string library_version;
  int threads = 1;
  std::map<std::string, std::string> input_digests;
  std::map<std::string, double> timings_ms;
};

std::string manifest_json(const RunManifest& manifest);
std::string test_report_json(const TestReport& report);

std::string fnv1a_digest(std::string_view bytes);
std::string fnv1a_digest_file(const std::filesystem::path& path);

inline constexpr const char* kLibraryVersion = "0.1.0";

}  // namespace hsphere
