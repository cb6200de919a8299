#pragma once
// Plain-text interfaces: round-trip-exact number formatting, key=value run
// configuration (repeated keys form grids), trajectory CSV files, and run
// manifests carrying (master seed, config hash, per-replica seeds) so that
// every output file can be traced and reproduced byte-for-byte.

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include "exclusim/errors.hpp"
#include "exclusim/kernel.hpp"
#include "exclusim/rng.hpp"
#include "exclusim/torus.hpp"
#include "exclusim/version.hpp"
#include "exclusim/world.hpp"

namespace exclusim {

// ---------------------------------------------------------------------------
// Numbers. Doubles are rendered shortest-round-trip via std::to_chars, so
// writing and re-reading is exact and output is byte-stable across runs.

inline std::string format_double(double value) {
  char buf[64];
  const auto result = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, result.ptr);
}

inline double parse_double(std::string_view text, const std::string& what) {
  double value = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  const auto result = std::from_chars(first, last, value);
  if (result.ec != std::errc{} || result.ptr != last) {
    throw ConfigParseError(what + ": '" + std::string(text) +
                           "' is not a number");
  }
  return value;
}

inline long long parse_integer(std::string_view text, const std::string& what) {
  long long value = 0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  const auto result = std::from_chars(first, last, value);
  if (result.ec != std::errc{} || result.ptr != last) {
    throw ConfigParseError(what + ": '" + std::string(text) +
                           "' is not an integer");
  }
  return value;
}

inline std::uint64_t parse_seed(std::string_view text, const std::string& what) {
  std::uint64_t value = 0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  const auto result = std::from_chars(first, last, value);
  if (result.ec != std::errc{} || result.ptr != last) {
    throw ConfigParseError(what + ": '" + std::string(text) +
                           "' is not an unsigned integer");
  }
  return value;
}

inline std::uint64_t fnv1a_hash(std::string_view text) {
  std::uint64_t h = 1469598103934665603ull;
  for (const unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
    s.remove_prefix(1);
  }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' ||
                        s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Run configuration: plain key=value, '#' comments, repeated keys forming
// grids over L, rho, T, and mode; repeated `kernel` lines list the jump table
// ("y_1 .. y_d p" per line, default: uniform on the range-R ball).

struct CampaignConfig {
  int dimension = 0;
  int range = 0;
  std::vector<int> sides;
  std::vector<double> rhos;
  std::vector<double> horizons;
  std::vector<Mode> modes{Mode::coupled};
  int samples = 10;
  std::size_t replicas = 1;
  std::uint64_t master_seed = 0;
  std::vector<std::string> kernel_lines;  // raw entries, validated on build
};

namespace detail {

inline std::vector<std::pair<std::string, std::string>> parse_key_values(
    const std::string& text) {
  std::vector<std::pair<std::string, std::string>> pairs;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view body(line);
    if (const auto hash = body.find('#'); hash != std::string_view::npos) {
      body = body.substr(0, hash);
    }
    body = trim(body);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigParseError("line " + std::to_string(line_no) +
                             ": expected key = value, got '" +
                             std::string(body) + "'");
    }
    const std::string key{trim(body.substr(0, eq))};
    const std::string value{trim(body.substr(eq + 1))};
    if (key.empty() || value.empty()) {
      throw ConfigParseError("line " + std::to_string(line_no) +
                             ": empty key or value");
    }
    pairs.emplace_back(key, value);
  }
  return pairs;
}

}  // namespace detail

// need_simulation: simulate/tagged runs require T; the oracle drive does not.
inline CampaignConfig parse_campaign(const std::string& text,
                                     bool need_simulation = true) {
  CampaignConfig config;
  std::vector<Mode> explicit_modes;
  bool saw_d = false, saw_r = false, saw_samples = false, saw_replicas = false,
       saw_seed = false;
  for (const auto& [key, value] : detail::parse_key_values(text)) {
    if (key == "d") {
      if (saw_d) throw ConfigParseError("key 'd' given more than once");
      config.dimension = static_cast<int>(parse_integer(value, "d"));
      saw_d = true;
    } else if (key == "L") {
      config.sides.push_back(static_cast<int>(parse_integer(value, "L")));
    } else if (key == "R") {
      if (saw_r) throw ConfigParseError("key 'R' given more than once");
      config.range = static_cast<int>(parse_integer(value, "R"));
      saw_r = true;
    } else if (key == "rho") {
      config.rhos.push_back(parse_double(value, "rho"));
    } else if (key == "T") {
      config.horizons.push_back(parse_double(value, "T"));
    } else if (key == "samples") {
      if (saw_samples) {
        throw ConfigParseError("key 'samples' given more than once");
      }
      config.samples = static_cast<int>(parse_integer(value, "samples"));
      saw_samples = true;
    } else if (key == "mode") {
      explicit_modes.push_back(parse_mode(value));
    } else if (key == "replicas") {
      if (saw_replicas) {
        throw ConfigParseError("key 'replicas' given more than once");
      }
      const long long n = parse_integer(value, "replicas");
      if (n < 1) throw ConfigParseError("replicas must be positive");
      config.replicas = static_cast<std::size_t>(n);
      saw_replicas = true;
    } else if (key == "seed") {
      if (saw_seed) throw ConfigParseError("key 'seed' given more than once");
      config.master_seed = parse_seed(value, "seed");
      saw_seed = true;
    } else if (key == "kernel") {
      config.kernel_lines.push_back(value);
    } else {
      throw ConfigParseError("unknown key '" + key + "'");
    }
  }
  if (!saw_d) throw ConfigParseError("missing key 'd'");
  if (config.sides.empty()) throw ConfigParseError("missing key 'L'");
  if (!saw_r) throw ConfigParseError("missing key 'R'");
  if (config.rhos.empty()) throw ConfigParseError("missing key 'rho'");
  if (need_simulation && config.horizons.empty()) {
    throw ConfigParseError("missing key 'T'");
  }
  if (config.horizons.empty()) config.horizons.push_back(0.0);
  if (!explicit_modes.empty()) config.modes = std::move(explicit_modes);
  return config;
}

inline TransitionKernel campaign_kernel(const CampaignConfig& config) {
  if (config.kernel_lines.empty()) {
    return uniform_kernel(config.dimension, config.range);
  }
  std::string table;
  for (const std::string& line : config.kernel_lines) {
    table += line;
    table += '\n';
  }
  return parse_kernel_table(config.dimension, config.range, table);
}

// One simulated grid point: the cartesian product order is L, rho, T, mode
// (rightmost fastest), matching expand_grid below.
struct GridPoint {
  int side = 0;
  double rho = 0.0;
  double horizon = 0.0;
  Mode mode = Mode::coupled;
};

inline std::vector<GridPoint> expand_grid(const CampaignConfig& config) {
  std::vector<GridPoint> points;
  for (const int side : config.sides) {
    for (const double rho : config.rhos) {
      for (const double horizon : config.horizons) {
        for (const Mode mode : config.modes) {
          points.push_back(GridPoint{side, rho, horizon, mode});
        }
      }
    }
  }
  return points;
}

inline SimConfig grid_sim_config(const CampaignConfig& config,
                                 const GridPoint& point) {
  if (point.mode == Mode::tagged && point.rho == 0.0) {
    throw ConfigParseError(
        "mode=tagged with rho=0 rejected: tagged mode requires a particle at "
        "the origin");
  }
  return make_sim_config(Torus(config.dimension, point.side),
                         campaign_kernel(config), point.rho, point.horizon,
                         config.samples, point.mode, config.master_seed);
}

// ---------------------------------------------------------------------------
// Canonical parameter block shared by manifests and the config hash.

inline std::string canonical_parameter_block(const CampaignConfig& config,
                                             const GridPoint& point,
                                             const TransitionKernel& kernel) {
  std::string block;
  block += "d = " + std::to_string(config.dimension) + "\n";
  block += "L = " + std::to_string(point.side) + "\n";
  block += "R = " + std::to_string(config.range) + "\n";
  for (std::size_t k = 0; k < kernel.support().size(); ++k) {
    block += "kernel =";
    for (const int c : kernel.support()[k]) block += " " + std::to_string(c);
    block += " " + format_double(kernel.rates()[k]) + "\n";
  }
  block += "rho = " + format_double(point.rho) + "\n";
  block += "T = " + format_double(point.horizon) + "\n";
  block += "samples = " + std::to_string(config.samples) + "\n";
  block += "mode = " + mode_name(point.mode) + "\n";
  block += "replicas = " + std::to_string(config.replicas) + "\n";
  block += "seed = " + std::to_string(config.master_seed) + "\n";
  return block;
}

struct RunManifest {
  std::string version;
  std::uint64_t config_hash = 0;
  CampaignConfig campaign;  // single-valued grids (this grid point only)
  GridPoint point;
  std::vector<std::uint64_t> replica_seeds;
};

// Replica seeds for one grid point: grid points draw from decorrelated
// streams of the master seed, and every trajectory's seed is listed in the
// manifest, so outputs stay traceable to (master seed, config hash).
inline std::vector<std::uint64_t> grid_replica_seeds(std::uint64_t master_seed,
                                                     std::size_t grid_index,
                                                     std::size_t replicas) {
  const std::uint64_t grid_master = replica_seed(
      master_seed, 0x67726964ull + static_cast<std::uint64_t>(grid_index));
  std::vector<std::uint64_t> seeds(replicas);
  for (std::size_t i = 0; i < replicas; ++i) {
    seeds[i] = replica_seed(grid_master, static_cast<std::uint64_t>(i));
  }
  return seeds;
}

inline std::string render_manifest(const CampaignConfig& config,
                                   const GridPoint& point,
                                   const TransitionKernel& kernel,
                                   const std::vector<std::uint64_t>& seeds) {
  const std::string block = canonical_parameter_block(config, point, kernel);
  std::string out;
  out += "format = exclusim-run-v1\n";
  out += "version = " + std::string(kVersion) + "\n";
  out += "config_hash = " + std::to_string(fnv1a_hash(block)) + "\n";
  out += block;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    out += "seed_replica_" + std::to_string(i) + " = " +
           std::to_string(seeds[i]) + "\n";
  }
  return out;
}

inline RunManifest parse_manifest(const std::string& text) {
  RunManifest manifest;
  manifest.campaign.modes.clear();
  std::map<std::string, std::string> singles;
  for (const auto& [key, value] : detail::parse_key_values(text)) {
    if (key == "kernel") {
      manifest.campaign.kernel_lines.push_back(value);
    } else if (key.rfind("seed_replica_", 0) == 0) {
      const std::size_t index = static_cast<std::size_t>(
          parse_integer(key.substr(13), "replica seed index"));
      if (index != manifest.replica_seeds.size()) {
        throw ConfigParseError("manifest replica seeds out of order at " + key);
      }
      manifest.replica_seeds.push_back(parse_seed(value, key));
    } else if (!singles.emplace(key, value).second) {
      throw ConfigParseError("manifest repeats key '" + key + "'");
    }
  }
  auto need = [&singles](const std::string& key) -> const std::string& {
    const auto it = singles.find(key);
    if (it == singles.end()) {
      throw ConfigParseError("manifest missing key '" + key + "'");
    }
    return it->second;
  };
  if (need("format") != "exclusim-run-v1") {
    throw ConfigParseError("unrecognized manifest format '" + need("format") +
                           "'");
  }
  manifest.version = need("version");
  manifest.config_hash = parse_seed(need("config_hash"), "config_hash");
  manifest.campaign.dimension =
      static_cast<int>(parse_integer(need("d"), "d"));
  manifest.point.side = static_cast<int>(parse_integer(need("L"), "L"));
  manifest.campaign.sides = {manifest.point.side};
  manifest.campaign.range = static_cast<int>(parse_integer(need("R"), "R"));
  manifest.point.rho = parse_double(need("rho"), "rho");
  manifest.campaign.rhos = {manifest.point.rho};
  manifest.point.horizon = parse_double(need("T"), "T");
  manifest.campaign.horizons = {manifest.point.horizon};
  manifest.point.mode = parse_mode(need("mode"));
  manifest.campaign.modes = {manifest.point.mode};
  manifest.campaign.samples =
      static_cast<int>(parse_integer(need("samples"), "samples"));
  manifest.campaign.replicas = static_cast<std::size_t>(
      parse_integer(need("replicas"), "replicas"));
  manifest.campaign.master_seed = parse_seed(need("seed"), "seed");
  if (manifest.replica_seeds.size() != manifest.campaign.replicas) {
    throw ConfigParseError("manifest lists " +
                           std::to_string(manifest.replica_seeds.size()) +
                           " replica seeds for " +
                           std::to_string(manifest.campaign.replicas) +
                           " replicas");
  }
  return manifest;
}

// ---------------------------------------------------------------------------
// Trajectory CSV.  Column order: t, X_1..X_d, A_1..A_d, J_<y> (one per
// support displacement, components joined by '_'), replica, seed.

inline std::string jump_column_name(const Displacement& y) {
  std::string name = "J";
  for (const int c : y) name += "_" + std::to_string(c);
  return name;
}

inline std::string csv_header(int dimension, const TransitionKernel& kernel) {
  std::string header = "t";
  for (int a = 1; a <= dimension; ++a) header += ",X_" + std::to_string(a);
  for (int a = 1; a <= dimension; ++a) header += ",A_" + std::to_string(a);
  for (const Displacement& y : kernel.support()) {
    header += "," + jump_column_name(y);
  }
  header += ",replica,seed";
  return header;
}

inline void append_trajectory_rows(std::string& out, const Trajectory& tr,
                                   std::size_t replica_index) {
  for (const Sample& s : tr.samples) {
    out += format_double(s.time);
    for (const long long x : s.displacement) {
      out += "," + std::to_string(x);
    }
    for (const double a : s.compensator) out += "," + format_double(a);
    for (const std::uint64_t j : s.jump_counts) {
      out += "," + std::to_string(j);
    }
    out += "," + std::to_string(replica_index);
    out += "," + std::to_string(tr.seed);
    out += "\n";
  }
}

inline std::string render_trajectories_csv(const std::vector<Trajectory>& ens,
                                           const TransitionKernel& kernel) {
  if (ens.empty()) throw IoError("cannot render an empty ensemble");
  std::string out = csv_header(ens[0].params.dimension, kernel) + "\n";
  for (std::size_t i = 0; i < ens.size(); ++i) {
    append_trajectory_rows(out, ens[i], i);
  }
  return out;
}

namespace detail {

inline std::vector<std::string_view> split_csv_row(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(trim(line.substr(start)));
      return fields;
    }
    fields.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
}

}  // namespace detail

// Reads a consolidated trajectory CSV back into replica order.  The manifest
// supplies the parameter echo; the header is validated against its kernel.
inline std::vector<Trajectory> parse_trajectories_csv(
    const std::string& text, const RunManifest& manifest) {
  const TransitionKernel kernel = campaign_kernel(manifest.campaign);
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw IoError("trajectory CSV is empty");
  if (std::string_view header = trim(line);
      header != csv_header(manifest.campaign.dimension, kernel)) {
    throw ConfigParseError("trajectory CSV header '" + std::string(header) +
                           "' does not match the manifest");
  }
  const std::size_t d = static_cast<std::size_t>(manifest.campaign.dimension);
  const std::size_t n_jump = kernel.support().size();
  const std::size_t n_fields = 1 + 2 * d + n_jump + 2;

  ParamsEcho echo;
  echo.dimension = manifest.campaign.dimension;
  echo.side = manifest.point.side;
  echo.range = manifest.campaign.range;
  echo.rho = manifest.point.rho;
  echo.horizon = manifest.point.horizon;
  echo.mode = manifest.point.mode;

  std::vector<Trajectory> ens(manifest.campaign.replicas);
  for (std::size_t i = 0; i < ens.size(); ++i) {
    ens[i].params = echo;
    ens[i].seed = manifest.replica_seeds[i];
  }
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view body = trim(line);
    if (body.empty()) continue;
    const auto fields = detail::split_csv_row(body);
    const std::string where = "CSV line " + std::to_string(line_no);
    if (fields.size() != n_fields) {
      throw ConfigParseError(where + ": expected " +
                             std::to_string(n_fields) + " fields, got " +
                             std::to_string(fields.size()));
    }
    Sample sample;
    std::size_t f = 0;
    sample.time = parse_double(fields[f++], where + " t");
    sample.displacement.resize(d);
    for (std::size_t a = 0; a < d; ++a) {
      sample.displacement[a] = parse_integer(fields[f++], where + " X");
    }
    sample.compensator.resize(d);
    for (std::size_t a = 0; a < d; ++a) {
      sample.compensator[a] = parse_double(fields[f++], where + " A");
    }
    sample.jump_counts.resize(n_jump);
    for (std::size_t k = 0; k < n_jump; ++k) {
      sample.jump_counts[k] = parse_seed(fields[f++], where + " J");
    }
    const long long replica = parse_integer(fields[f++], where + " replica");
    const std::uint64_t seed = parse_seed(fields[f++], where + " seed");
    if (replica < 0 || static_cast<std::size_t>(replica) >= ens.size()) {
      throw ConfigParseError(where + ": replica index out of range");
    }
    Trajectory& tr = ens[static_cast<std::size_t>(replica)];
    if (seed != tr.seed) {
      throw ConfigParseError(where + ": seed does not match the manifest");
    }
    if (!tr.samples.empty() && !(sample.time > tr.samples.back().time)) {
      throw ConfigParseError(where + ": sample times not increasing");
    }
    tr.samples.push_back(std::move(sample));
  }
  for (std::size_t i = 0; i < ens.size(); ++i) {
    if (ens[i].samples.empty()) {
      throw ConfigParseError("replica " + std::to_string(i) +
                             " has no samples in the CSV");
    }
  }
  return ens;
}

// ---------------------------------------------------------------------------
// Files.

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  if (!in.good() && !in.eof()) {
    throw IoError("failed reading " + path.string());
  }
  return std::move(buffer).str();
}

inline void write_text_file(const std::filesystem::path& path,
                            const std::string& content) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) {
      throw IoError("cannot create directory " +
                    path.parent_path().string() + ": " + ec.message());
    }
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << content;
  if (!out.good()) throw IoError("failed writing " + path.string());
}

}  // namespace exclusim
