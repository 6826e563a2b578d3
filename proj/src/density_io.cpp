#include "hsphere/density_io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "hsphere/format.hpp"

namespace hsphere {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) {
    // trim surrounding spaces
    const auto b = field.find_first_not_of(" \t\r");
    const auto e = field.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? "" : field.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

bool parse_number(const std::string& field, double& value) {
  const char* begin = field.data();
  const char* end = begin + field.size();
  const auto res = std::from_chars(begin, end, value);
  return res.ec == std::errc() && res.ptr == end && !field.empty();
}

double parse_number_or_throw(const std::string& field, long line_no, std::size_t col) {
  double v = 0.0;
  if (!parse_number(field, v))
    throw FormatError("line " + std::to_string(line_no) + ", column " + std::to_string(col + 1) +
                      ": cannot parse '" + field + "' as a number");
  return v;
}

std::vector<std::string> read_nonempty_lines(std::istream& in, std::vector<long>& line_numbers) {
  std::vector<std::string> lines;
  std::string line;
  long no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const bool blank = line.find_first_not_of(" \t") == std::string::npos;
    if (blank) continue;
    lines.push_back(line);
    line_numbers.push_back(no);
  }
  return lines;
}

GridPtr grid_from_labels(const std::vector<std::string>& labels, Eigen::VectorXd weights) {
  Eigen::VectorXd pts(static_cast<Eigen::Index>(labels.size()));
  bool numeric = true;
  for (std::size_t j = 0; j < labels.size(); ++j) {
    double v = 0.0;
    if (!parse_number(labels[j], v)) {
      numeric = false;
      break;
    }
    pts[static_cast<Eigen::Index>(j)] = v;
  }
  if (numeric)
    for (Eigen::Index j = 1; j < pts.size(); ++j)
      if (!(pts[j] > pts[j - 1])) {
        numeric = false;
        break;
      }
  if (!numeric)
    for (Eigen::Index j = 0; j < pts.size(); ++j) pts[j] = static_cast<double>(j);
  return std::make_shared<const Grid>(std::move(pts), std::move(weights));
}

struct RawTable {
  std::vector<std::string> labels;
  Eigen::VectorXd weights;               // empty -> uniform
  std::vector<Eigen::VectorXd> rows;     // untransformed masses
  std::vector<long> row_lines;           // source line per observation
};

RawTable parse_wide(const std::vector<std::string>& lines, const std::vector<long>& line_nos) {
  if (lines.size() < 3)
    throw FormatError("csv_wide needs a label line, a weight line, and at least one observation");
  RawTable raw;
  raw.labels = split_csv_line(lines[0]);
  if (raw.labels.empty()) throw FormatError("line 1: no zone labels");
  const std::size_t z = raw.labels.size();

  const auto weight_fields = split_csv_line(lines[1]);
  if (weight_fields.size() != z)
    throw FormatError("line " + std::to_string(line_nos[1]) + ": expected " + std::to_string(z) +
                      " weights, got " + std::to_string(weight_fields.size()));
  raw.weights.resize(static_cast<Eigen::Index>(z));
  for (std::size_t j = 0; j < z; ++j)
    raw.weights[static_cast<Eigen::Index>(j)] = parse_number_or_throw(weight_fields[j], line_nos[1], j);
  if ((raw.weights.array() <= 0.0).any())
    throw ValidationError("line " + std::to_string(line_nos[1]) + ": weights must be positive");

  for (std::size_t r = 2; r < lines.size(); ++r) {
    const auto fields = split_csv_line(lines[r]);
    if (fields.size() != z)
      throw FormatError("line " + std::to_string(line_nos[r]) + ": expected " + std::to_string(z) +
                        " values, got " + std::to_string(fields.size()));
    Eigen::VectorXd row(static_cast<Eigen::Index>(z));
    for (std::size_t j = 0; j < z; ++j)
      row[static_cast<Eigen::Index>(j)] = parse_number_or_throw(fields[j], line_nos[r], j);
    raw.rows.push_back(std::move(row));
    raw.row_lines.push_back(line_nos[r]);
  }
  return raw;
}

RawTable parse_long(const std::vector<std::string>& lines, const std::vector<long>& line_nos) {
  if (lines.empty()) throw FormatError("csv_long: empty file");
  const auto header = split_csv_line(lines[0]);
  if (header.size() != 3 || header[0] != "obs_id" || header[1] != "zone" || header[2] != "value")
    throw FormatError("csv_long: header must be exactly 'obs_id,zone,value'");

  std::vector<std::string> obs_order;
  std::vector<std::string> zone_order;
  std::map<std::string, std::size_t> obs_index, zone_index;
  std::vector<std::map<std::size_t, double>> cells;  // per observation: zone -> value
  std::vector<long> obs_line;

  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto fields = split_csv_line(lines[r]);
    if (fields.size() != 3)
      throw FormatError("line " + std::to_string(line_nos[r]) + ": expected 3 fields");
    const double value = parse_number_or_throw(fields[2], line_nos[r], 2);
    auto [oit, onew] = obs_index.emplace(fields[0], obs_order.size());
    if (onew) {
      obs_order.push_back(fields[0]);
      cells.emplace_back();
      obs_line.push_back(line_nos[r]);
    }
    auto [zit, znew] = zone_index.emplace(fields[1], zone_order.size());
    if (znew) zone_order.push_back(fields[1]);
    if (!cells[oit->second].emplace(zit->second, value).second)
      throw FormatError("line " + std::to_string(line_nos[r]) + ": duplicate cell for obs_id '" +
                        fields[0] + "', zone '" + fields[1] + "'");
  }

  RawTable raw;
  raw.labels = zone_order;
  const std::size_t z = zone_order.size();
  for (std::size_t o = 0; o < obs_order.size(); ++o) {
    if (cells[o].size() != z)
      throw FormatError("observation '" + obs_order[o] + "' covers " +
                        std::to_string(cells[o].size()) + " of " + std::to_string(z) + " zones");
    Eigen::VectorXd row(static_cast<Eigen::Index>(z));
    for (const auto& [zi, value] : cells[o]) row[static_cast<Eigen::Index>(zi)] = value;
    raw.rows.push_back(std::move(row));
    raw.row_lines.push_back(obs_line[o]);
  }
  return raw;
}

}  // namespace

DensityFormat density_format_from_string(const std::string& name) {
  if (name == "csv_wide") return DensityFormat::csv_wide;
  if (name == "csv_long") return DensityFormat::csv_long;
  throw ValidationError("unknown density format '" + name + "'");
}

IngestResult ingest_densities(std::istream& in, const IngestOptions& options) {
  std::vector<long> line_nos;
  const auto lines = read_nonempty_lines(in, line_nos);
  RawTable raw = options.format == DensityFormat::csv_wide ? parse_wide(lines, line_nos)
                                                           : parse_long(lines, line_nos);
  const Eigen::Index z = static_cast<Eigen::Index>(raw.labels.size());
  Eigen::VectorXd weights =
      raw.weights.size() == z
          ? raw.weights
          : Eigen::VectorXd::Constant(z, 1.0 / static_cast<double>(z));
  GridPtr grid = grid_from_labels(raw.labels, std::move(weights));

  const Eigen::Index n = static_cast<Eigen::Index>(raw.rows.size());
  if (n == 0) throw FormatError("no observations found");
  Eigen::MatrixXd densities(z, n);
  Eigen::MatrixXd roots(z, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::VectorXd& row = raw.rows[static_cast<std::size_t>(i)];
    const long line_no = raw.row_lines[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < z; ++j) {
      if (row[j] < 0.0)
        throw ValidationError("line " + std::to_string(line_no) + ", column " +
                              std::to_string(j + 1) + ": negative value");
      if (options.strict_positive && row[j] == 0.0)
        throw ValidationError("line " + std::to_string(line_no) + ", column " +
                              std::to_string(j + 1) +
                              ": zero mass rejected under --strict-positive");
    }
    const double total = row.sum();
    if (!(total > 0.0))
      throw ValidationError("line " + std::to_string(line_no) + ": observation has zero mass");
    densities.col(i) = row.cwiseQuotient(grid->weights()) / total;
    Eigen::VectorXd root = densities.col(i).cwiseSqrt();
    roots.col(i) = root / grid->norm(root);
  }
  return IngestResult{SampleSet(grid, std::move(roots)),
                      DensityTable{std::move(raw.labels), grid, std::move(densities)}};
}

IngestResult ingest_densities(const std::filesystem::path& path, const IngestOptions& options) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path.string() + "'");
  return ingest_densities(in, options);
}

std::map<std::string, std::string> read_kv_config(std::istream& in) {
  std::map<std::string, std::string> out;
  std::string line;
  long no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto b = line.find_first_not_of(" \t");
    if (b == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw FormatError("config line " + std::to_string(no) + ": expected key=value");
    auto trim = [](std::string s) {
      const auto x = s.find_first_not_of(" \t");
      const auto y = s.find_last_not_of(" \t");
      return x == std::string::npos ? std::string() : s.substr(x, y - x + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw FormatError("config line " + std::to_string(no) + ": empty key");
    if (!out.emplace(key, value).second)
      throw ValidationError("config line " + std::to_string(no) + ": duplicate key '" + key + "'");
  }
  return out;
}

std::map<std::string, std::string> read_kv_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path.string() + "'");
  return read_kv_config(in);
}

std::string manifest_json(const RunManifest& manifest) {
  nlohmann::json j;
  j["command"] = manifest.command;
  j["config"] = manifest.config;
  j["seed"] = manifest.seed;
  j["library_version"] = manifest.library_version;
  j["threads"] = manifest.threads;
  j["input_digests"] = manifest.input_digests;
  j["timings_ms"] = manifest.timings_ms;
  return j.dump(2) + "\n";
}

std::string test_report_json(const TestReport& report) {
  nlohmann::json j;
  j["statistic"] = report.statistic;
  j["p_value"] = report.p_value;
  j["method"] = report.method;
  j["K"] = report.K;
  if (report.fve_threshold)
    j["fve_threshold"] = *report.fve_threshold;
  else
    j["fve_threshold"] = nullptr;
  j["n_draws"] = report.n_draws;
  j["n_boot"] = report.n_boot;
  j["support_ok"] = report.support_ok;
  j["support_diameter"] = report.support_diameter;
  j["seed"] = report.seed;
  j["chart"] = report.chart;
  j["nonconvergent_replicates"] = report.nonconvergent_replicates;
  return j.dump(2) + "\n";
}

std::string fnv1a_digest(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

std::string fnv1a_digest_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string bytes = ss.str();
  return fnv1a_digest(bytes);
}

}  // namespace hsphere
