#ifndef ESSM_CLI_IO_HPP
#define ESSM_CLI_IO_HPP

/** @file
 * Files on disk: epoch CSVs and their manifest, run configuration with
 * named presets, and small CSV helpers used by the command layer.
 *
 * Epoch CSV: header of channel names, then T rows of p values.
 * Manifest (INI):
 *     fs = 1000
 *     channels = ch01,ch02
 *     [epochs]
 *     1 = epoch_001.csv
 * Epoch paths are relative to the manifest's directory.
 */

#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <span>
#include <system_error>
#include <type_traits>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <Eigen/Dense>

#include "essm/diagnostics.hpp"
#include "essm/error.hpp"
#include "essm/estimation.hpp"
#include "essm/model_core.hpp"
#include "essm/simulation.hpp"

namespace essm {

namespace fsys = std::filesystem;

// ---------------------------------------------------------------- text

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) {
    return {};
  }
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    const auto next = s.find(sep, pos);
    out.push_back(trim(s.substr(pos, next == std::string_view::npos ? s.npos : next - pos)));
    if (next == std::string_view::npos) {
      return out;
    }
    pos = next + 1;
  }
}

/// Strict decimal parse; the whole (trimmed) field must be consumed.
inline std::optional<double> parse_double(std::string_view text) {
  const std::string t = trim(text);
  if (t.empty()) {
    return std::nullopt;
  }
  double v = 0.0;
  const char* first = t.data();
  const char* last = t.data() + t.size();
  if (*first == '+') {
    ++first;
  }
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) {
    return std::nullopt;
  }
  return v;
}

// ----------------------------------------------------------------- CSV

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name, const std::string& file) const {
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (header[c] == name) {
        return c;
      }
    }
    throw IngestionError(file + ": missing column '" + name + "'");
  }
};

inline CsvTable read_csv(const fsys::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw IngestionError(path.string() + ": cannot open file");
  }
  CsvTable t;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) {
      continue;
    }
    auto fields = split(line, ',');
    if (t.header.empty()) {
      t.header = std::move(fields);
      continue;
    }
    if (fields.size() != t.header.size()) {
      throw IngestionError(path.string() + ": line " + std::to_string(lineno) + " has " +
                           std::to_string(fields.size()) + " fields, header has " +
                           std::to_string(t.header.size()));
    }
    t.rows.push_back(std::move(fields));
  }
  if (t.header.empty()) {
    throw IngestionError(path.string() + ": file is empty");
  }
  return t;
}

/// Numeric cell with a located error message (row counts data rows from 1).
inline double csv_number(const CsvTable& t, std::size_t row, std::size_t col,
                         const std::string& file) {
  const auto v = parse_double(t.rows[row][col]);
  if (!v) {
    throw IngestionError(file + ": row " + std::to_string(row + 1) + ", column " +
                         std::to_string(col + 1) + " ('" + t.header[col] +
                         "'): not a number: '" + t.rows[row][col] + "'");
  }
  if (!std::isfinite(*v)) {
    throw IngestionError(file + ": row " + std::to_string(row + 1) + ", column " +
                         std::to_string(col + 1) + " ('" + t.header[col] +
                         "'): non-finite value");
  }
  return *v;
}

class CsvWriter {
 public:
  CsvWriter(const fsys::path& path, const std::vector<std::string>& header) : out_(path) {
    if (!out_) {
      throw IngestionError(path.string() + ": cannot write file");
    }
    row(header);
  }

  void row(const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      out_ << (i ? "," : "") << fields[i];
    }
    out_ << '\n';
  }

  /// Leading text fields followed by numbers.
  void row(const std::vector<std::string>& labels, const std::vector<double>& values) {
    std::vector<std::string> f = labels;
    for (double v : values) {
      f.push_back(format_double(v));
    }
    row(f);
  }

 private:
  std::ofstream out_;
};

// ------------------------------------------------------------- dataset

struct DatasetManifest {
  std::vector<fsys::path> epoch_files;
  double fs = 1.0;
  std::vector<std::string> channel_names;
};

struct Dataset {
  DatasetManifest manifest;
  std::vector<EpochSeries> epochs;
};

inline DatasetManifest read_manifest(const fsys::path& path) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(path.string(), tree);
  } catch (const pt::ini_parser_error& e) {
    throw IngestionError("manifest " + path.string() + ": " + e.message() + " (line " +
                         std::to_string(e.line()) + ")");
  }
  DatasetManifest m;
  const auto fs_text = tree.get_optional<std::string>("fs");
  if (!fs_text) {
    throw IngestionError("manifest " + path.string() + ": missing 'fs'");
  }
  const auto fs_value = parse_double(*fs_text);
  if (!fs_value || !(*fs_value > 0.0)) {
    throw IngestionError("manifest " + path.string() + ": 'fs' must be a positive number");
  }
  m.fs = *fs_value;
  if (const auto ch = tree.get_optional<std::string>("channels")) {
    m.channel_names = split(*ch, ',');
  }
  const auto epochs = tree.get_child_optional("epochs");
  if (!epochs || epochs->empty()) {
    throw IngestionError("manifest " + path.string() + ": no [epochs] entries");
  }
  const fsys::path base = path.parent_path();
  for (const auto& [key, value] : *epochs) {
    const fsys::path file = value.get_value<std::string>();
    m.epoch_files.push_back(file.is_absolute() ? file : base / file);
  }
  return m;
}

inline EpochSeries read_epoch_csv(const fsys::path& path, double fs,
                                  std::vector<std::string>* header = nullptr) {
  if (!fsys::exists(path)) {
    throw IngestionError(path.string() + ": epoch file does not exist");
  }
  const CsvTable t = read_csv(path);
  const std::string name = path.string();
  if (t.rows.empty()) {
    throw IngestionError(name + ": no data rows");
  }
  const auto p = static_cast<Eigen::Index>(t.header.size());
  const auto T = static_cast<Eigen::Index>(t.rows.size());
  EpochSeries e{Eigen::MatrixXd(p, T), fs};
  for (Eigen::Index t_ = 0; t_ < T; ++t_) {
    for (Eigen::Index i = 0; i < p; ++i) {
      e.values(i, t_) =
          csv_number(t, static_cast<std::size_t>(t_), static_cast<std::size_t>(i), name);
    }
  }
  if (header) {
    *header = t.header;
  }
  return e;
}

inline Dataset load_dataset(const fsys::path& manifest_path) {
  if (!fsys::exists(manifest_path)) {
    throw IngestionError("manifest " + manifest_path.string() + " does not exist");
  }
  Dataset d;
  d.manifest = read_manifest(manifest_path);
  for (const auto& file : d.manifest.epoch_files) {
    std::vector<std::string> header;
    EpochSeries e = read_epoch_csv(file, d.manifest.fs, &header);
    if (d.manifest.channel_names.empty()) {
      d.manifest.channel_names = header;
    }
    if (header.size() != d.manifest.channel_names.size()) {
      throw IngestionError(file.string() + ": " + std::to_string(header.size()) +
                           " channels, manifest declares " +
                           std::to_string(d.manifest.channel_names.size()));
    }
    if (!d.epochs.empty() && e.T() != d.epochs.front().T()) {
      throw IngestionError(file.string() + ": " + std::to_string(e.T()) +
                           " rows, first epoch has " + std::to_string(d.epochs.front().T()));
    }
    d.epochs.push_back(std::move(e));
  }
  return d;
}

inline std::vector<std::string> default_channel_names(std::size_t p) {
  std::vector<std::string> names;
  const int width = p >= 100 ? 3 : 2;
  for (std::size_t i = 1; i <= p; ++i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "ch%0*zu", width, i);
    names.emplace_back(buf);
  }
  return names;
}

inline std::string epoch_file_name(std::size_t r) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "epoch_%03zu.csv", r);
  return buf;
}

/// Writes one CSV per epoch and a manifest; returns the manifest path.
inline fsys::path save_dataset(const fsys::path& dir, std::span<const EpochSeries> epochs,
                             std::vector<std::string> channel_names = {}) {
  if (epochs.empty()) {
    throw ShapeError("no epochs to save");
  }
  const auto p = static_cast<std::size_t>(epochs.front().p());
  if (channel_names.empty()) {
    channel_names = default_channel_names(p);
  }
  if (channel_names.size() != p) {
    throw ShapeError("channel name count does not match the data");
  }
  fsys::create_directories(dir);
  std::ostringstream manifest;
  manifest << "fs = " << format_double(epochs.front().fs) << "\n";
  manifest << "channels = ";
  for (std::size_t i = 0; i < p; ++i) {
    manifest << (i ? "," : "") << channel_names[i];
  }
  manifest << "\n\n[epochs]\n";
  for (std::size_t r = 0; r < epochs.size(); ++r) {
    const auto& e = epochs[r];
    if (static_cast<std::size_t>(e.p()) != p) {
      throw ShapeError("epochs differ in channel count");
    }
    const std::string name = epoch_file_name(r + 1);
    CsvWriter w(dir / name, channel_names);
    std::vector<double> row(p);
    for (Eigen::Index t = 0; t < e.T(); ++t) {
      for (std::size_t i = 0; i < p; ++i) {
        row[i] = e.values(static_cast<Eigen::Index>(i), t);
      }
      w.row({}, row);
    }
    manifest << r + 1 << " = " << name << "\n";
  }
  const fsys::path path = dir / "manifest.ini";
  std::ofstream(path) << manifest.str();
  return path;
}

/// Matrix with a leading label column, as written by write_labeled_matrix.
inline Eigen::MatrixXd read_labeled_matrix(const fsys::path& path, std::vector<std::string>* labels,
                                           std::vector<std::string>* columns) {
  const CsvTable t = read_csv(path);
  const std::string name = path.string();
  if (t.header.size() < 2 || t.rows.empty()) {
    throw IngestionError(name + ": expected a label column and at least one value column");
  }
  Eigen::MatrixXd m(static_cast<Eigen::Index>(t.rows.size()),
                    static_cast<Eigen::Index>(t.header.size() - 1));
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    if (labels) {
      labels->push_back(t.rows[r][0]);
    }
    for (std::size_t c = 1; c < t.header.size(); ++c) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c - 1)) =
          csv_number(t, r, c, name);
    }
  }
  if (columns) {
    columns->assign(t.header.begin() + 1, t.header.end());
  }
  return m;
}

inline void write_labeled_matrix(const fsys::path& path, const std::string& corner,
                                 const std::vector<std::string>& row_labels,
                                 const std::vector<std::string>& col_labels,
                                 const Eigen::Ref<const Eigen::MatrixXd>& m) {
  std::vector<std::string> header{corner};
  header.insert(header.end(), col_labels.begin(), col_labels.end());
  CsvWriter w(path, header);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::vector<double> row(m.cols());
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      row[static_cast<std::size_t>(j)] = m(i, j);
    }
    w.row({row_labels[static_cast<std::size_t>(i)]}, row);
  }
}

inline std::vector<std::string> param_columns(std::span<const BandSpec> bands) {
  std::vector<std::string> cols{"epoch"};
  for (const auto& b : bands) {
    cols.push_back("rho_" + b.name);
  }
  cols.emplace_back("sigma2");
  cols.emplace_back("tau2");
  return cols;
}

inline void write_params(const fsys::path& path, std::span<const BandSpec> bands,
                         std::span<const EpochParams> params,
                         std::span<const std::pair<std::string, std::vector<double>>> extra = {}) {
  auto header = param_columns(bands);
  for (const auto& [name, values] : extra) {
    header.push_back(name);
  }
  CsvWriter w(path, header);
  for (std::size_t r = 0; r < params.size(); ++r) {
    std::vector<double> row(params[r].rho.data(), params[r].rho.data() + params[r].rho.size());
    row.push_back(params[r].sigma2);
    row.push_back(params[r].tau2);
    for (const auto& [name, values] : extra) {
      row.push_back(values.at(r));
    }
    w.row({std::to_string(r + 1)}, row);
  }
}

inline std::vector<EpochParams> read_params(const fsys::path& path, std::span<const BandSpec> bands) {
  const CsvTable t = read_csv(path);
  const std::string name = path.string();
  std::vector<std::size_t> rho_cols;
  for (const auto& b : bands) {
    rho_cols.push_back(t.column("rho_" + b.name, name));
  }
  const std::size_t s2 = t.column("sigma2", name);
  const std::size_t t2 = t.column("tau2", name);
  std::vector<EpochParams> out(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    out[r].rho.resize(static_cast<Eigen::Index>(bands.size()));
    for (std::size_t l = 0; l < bands.size(); ++l) {
      out[r].rho[static_cast<Eigen::Index>(l)] = csv_number(t, r, rho_cols[l], name);
    }
    out[r].sigma2 = csv_number(t, r, s2, name);
    out[r].tau2 = csv_number(t, r, t2, name);
  }
  return out;
}

// -------------------------------------------------------------- config

struct DiagnosticsConfig {
  StateEstimate residuals = StateEstimate::filtered;
  std::size_t lags = 20;
  /// Clusters per band; 0 picks the largest linkage gap.
  std::size_t clusters = 0;
  double alpha = 0.05;
};

struct RunConfig {
  std::string preset;
  BandSpecs bands;
  FitConfig fit;
  SimSpec simulation;
  DiagnosticsConfig diagnostics;
  /// Default phase partition for `spectrum` when none is given.
  std::string phases;
};

/// Center frequencies 2/8/15 Hz (delta, alpha, beta).
inline BandSpecs delta_alpha_beta_bands(double rho_min, double rho_max) {
  return {{"delta", 2.0, rho_min, rho_max},
          {"alpha", 8.0, rho_min, rho_max},
          {"beta", 15.0, rho_min, rho_max}};
}

/// Center frequencies 2/10/32 Hz (delta, alpha, gamma).
inline BandSpecs delta_alpha_gamma_bands(double rho_min, double rho_max) {
  return {{"delta", 2.0, rho_min, rho_max},
          {"alpha", 10.0, rho_min, rho_max},
          {"gamma", 32.0, rho_min, rho_max}};
}

inline std::vector<std::string> preset_names() {
  return {"single-epoch", "evolving", "benchmark", "benchmark-scaled"};
}

/**
 * single-epoch      p=20, T=1000, one epoch, every modulus 1.0012.
 * evolving          as single-epoch over 100 epochs, moduli rising from
 *                   1.001 by 0.00005 per epoch.
 * benchmark         p=12, 247 epochs, 2/10/32 Hz bands, same evolution.
 * benchmark-scaled  benchmark cut to 50 epochs of 500 samples.
 */
inline RunConfig preset(const std::string& name) {
  RunConfig c;
  c.preset = name;
  SimSpec& s = c.simulation;
  s.fs = 1000.0;
  s.sigma2 = 0.1;
  s.tau2 = 1.0;
  s.rng_seed = 1;
  if (name == "single-epoch" || name == "evolving") {
    c.bands = delta_alpha_beta_bands(1.0002, 1.01);
    s.p = 20;
    s.T = 1000;
    if (name == "single-epoch") {
      s.R = 1;
      s.rho_start = Eigen::VectorXd::Constant(3, 1.0012);
      s.rho_increment = 0.0;
      c.fit.block_length = 1;
      c.fit.n_blocks = 1;
    } else {
      s.R = 100;
      s.rho_start = Eigen::VectorXd::Constant(3, 1.001);
      s.rho_increment = 0.00005;
      c.phases = "1-33,34-66,67-100";
    }
  } else if (name == "benchmark" || name == "benchmark-scaled") {
    c.bands = delta_alpha_gamma_bands(1.0002, 1.02);
    s.p = 12;
    s.rho_start = Eigen::VectorXd::Constant(3, 1.001);
    s.rho_increment = 0.00005;
    if (name == "benchmark") {
      s.T = 1000;
      s.R = 247;
      c.phases = "1-80,81-160,161-247";
    } else {
      s.T = 500;
      s.R = 50;
      c.phases = "1-16,17-33,34-50";
    }
  } else {
    std::string known;
    for (const auto& n : preset_names()) {
      known += (known.empty() ? "" : ", ") + n;
    }
    throw ConfigError("unknown preset '" + name + "' (known: " + known + ")");
  }
  c.simulation.bands = c.bands;
  return c;
}

namespace detail {

template <class T>
T config_number(const std::string& where, const std::string& text) {
  const auto v = parse_double(text);
  if (!v) {
    throw ConfigError(where + ": not a number: '" + text + "'");
  }
  if constexpr (std::is_integral_v<T>) {
    if (*v < 0.0 || std::floor(*v) != *v) {
      throw ConfigError(where + ": expected a nonnegative integer, got '" + text + "'");
    }
  }
  return static_cast<T>(*v);
}

inline bool config_bool(const std::string& where, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") {
    return true;
  }
  if (text == "false" || text == "0" || text == "no") {
    return false;
  }
  throw ConfigError(where + ": expected true or false, got '" + text + "'");
}

}  // namespace detail

/**
 * Reads a configuration file. `preset` (default single-epoch) fixes every
 * default; `bands` picks either built-in band set; [fit], [simulation] and
 * [diagnostics] override single values; [band:NAME] sections replace the
 * band list in file order. Unknown keys are errors.
 */
inline RunConfig load_config(const fsys::path& path) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  if (!fsys::exists(path)) {
    throw ConfigError("config " + path.string() + " does not exist");
  }
  try {
    pt::read_ini(path.string(), tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("config " + path.string() + ": " + e.message() + " (line " +
                      std::to_string(e.line()) + ")");
  }
  using detail::config_bool;
  using detail::config_number;
  const std::string file = path.string();
  RunConfig c = preset(tree.get<std::string>("preset", "single-epoch"));
  BandSpecs custom_bands;

  for (const auto& [section, child] : tree) {
    const std::string where = file + " [" + section + "]";
    if (child.empty()) {
      const std::string value = child.get_value<std::string>();
      if (section == "preset") {
        continue;
      }
      if (section == "bands") {
        const double lo = c.bands.front().rho_min;
        const double hi = c.bands.front().rho_max;
        if (value == "delta-alpha-beta") {
          c.bands = delta_alpha_beta_bands(lo, hi);
        } else if (value == "delta-alpha-gamma") {
          c.bands = delta_alpha_gamma_bands(lo, hi);
        } else {
          throw ConfigError(file + ": unknown band set '" + value + "'");
        }
        continue;
      }
      if (section == "phases") {
        c.phases = value;
        continue;
      }
      throw ConfigError(file + ": unknown top-level key '" + section + "'");
    }
    if (section == "fit") {
      for (const auto& [key, v] : child) {
        const std::string text = v.get_value<std::string>();
        const std::string at = where + " " + key;
        FitConfig& f = c.fit;
        if (key == "max_outer_iters") {
          f.max_outer_iters = config_number<std::size_t>(at, text);
        } else if (key == "outer_tol") {
          f.outer_tol = config_number<double>(at, text);
        } else if (key == "optimizer_max_evals") {
          f.optimizer_max_evals = config_number<std::size_t>(at, text);
        } else if (key == "optimizer_tol") {
          f.optimizer_tol = config_number<double>(at, text);
        } else if (key == "seed") {
          f.rng_seed = config_number<std::uint64_t>(at, text);
        } else if (key == "block_length") {
          f.block_length = config_number<std::size_t>(at, text);
        } else if (key == "n_blocks") {
          f.n_blocks = config_number<std::size_t>(at, text);
        } else if (key == "max_workers") {
          f.max_workers = config_number<std::size_t>(at, text);
        } else if (key == "refine_initial_mixing") {
          f.refine_initial_mixing = config_bool(at, text);
        } else {
          throw ConfigError(where + ": unknown key '" + key + "'");
        }
      }
    } else if (section == "simulation") {
      for (const auto& [key, v] : child) {
        const std::string text = v.get_value<std::string>();
        const std::string at = where + " " + key;
        SimSpec& s = c.simulation;
        if (key == "p") {
          s.p = config_number<std::size_t>(at, text);
        } else if (key == "T") {
          s.T = config_number<std::size_t>(at, text);
        } else if (key == "R") {
          s.R = config_number<std::size_t>(at, text);
        } else if (key == "fs") {
          s.fs = config_number<double>(at, text);
        } else if (key == "rho_start") {
          const auto parts = split(text, ',');
          s.rho_start.resize(static_cast<Eigen::Index>(parts.size()));
          for (std::size_t i = 0; i < parts.size(); ++i) {
            s.rho_start[static_cast<Eigen::Index>(i)] = config_number<double>(at, parts[i]);
          }
        } else if (key == "rho_increment") {
          s.rho_increment = config_number<double>(at, text);
        } else if (key == "sigma2") {
          s.sigma2 = config_number<double>(at, text);
        } else if (key == "tau2") {
          s.tau2 = config_number<double>(at, text);
        } else if (key == "seed") {
          s.rng_seed = config_number<std::uint64_t>(at, text);
        } else {
          throw ConfigError(where + ": unknown key '" + key + "'");
        }
      }
    } else if (section == "diagnostics") {
      for (const auto& [key, v] : child) {
        const std::string text = v.get_value<std::string>();
        const std::string at = where + " " + key;
        DiagnosticsConfig& d = c.diagnostics;
        if (key == "residuals") {
          if (text == "filtered") {
            d.residuals = StateEstimate::filtered;
          } else if (text == "smoothed") {
            d.residuals = StateEstimate::smoothed;
          } else {
            throw ConfigError(at + ": expected filtered or smoothed");
          }
        } else if (key == "lags") {
          d.lags = config_number<std::size_t>(at, text);
        } else if (key == "clusters") {
          d.clusters = config_number<std::size_t>(at, text);
        } else if (key == "alpha") {
          d.alpha = config_number<double>(at, text);
        } else {
          throw ConfigError(where + ": unknown key '" + key + "'");
        }
      }
    } else if (section.rfind("band:", 0) == 0) {
      BandSpec b;
      b.name = section.substr(5);
      if (b.name.empty()) {
        throw ConfigError(where + ": band name is empty");
      }
      bool has_freq = false;
      bool has_min = false;
      bool has_max = false;
      for (const auto& [key, v] : child) {
        const std::string text = v.get_value<std::string>();
        const std::string at = where + " " + key;
        if (key == "center_freq_hz") {
          b.center_freq_hz = config_number<double>(at, text);
          has_freq = true;
        } else if (key == "rho_min") {
          b.rho_min = config_number<double>(at, text);
          has_min = true;
        } else if (key == "rho_max") {
          b.rho_max = config_number<double>(at, text);
          has_max = true;
        } else {
          throw ConfigError(where + ": unknown key '" + key + "'");
        }
      }
      if (!has_freq || !has_min || !has_max) {
        throw ConfigError(where + ": needs center_freq_hz, rho_min and rho_max");
      }
      custom_bands.push_back(std::move(b));
    } else {
      throw ConfigError(file + ": unknown section [" + section + "]");
    }
  }
  if (!custom_bands.empty()) {
    c.bands = std::move(custom_bands);
  }
  c.simulation.bands = c.bands;
  if (static_cast<std::size_t>(c.simulation.rho_start.size()) != c.bands.size() &&
      c.simulation.rho_start.size() > 0 &&
      (c.simulation.rho_start.array() == c.simulation.rho_start[0]).all()) {
    // A single value, or a preset's uniform start, applies to every band.
    c.simulation.rho_start = Eigen::VectorXd::Constant(
        static_cast<Eigen::Index>(c.bands.size()), c.simulation.rho_start[0]);
  }
  validate_bands(c.bands, c.simulation.fs);
  c.fit.validate();
  return c;
}

}  // namespace essm

#endif  // ESSM_CLI_IO_HPP
