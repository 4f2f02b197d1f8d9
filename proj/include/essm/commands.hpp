#ifndef ESSM_COMMANDS_HPP
#define ESSM_COMMANDS_HPP

/** @file
 * The `essm` command line: simulate, fit, benchmark, spectrum, diagnose.
 * run_command is the whole program minus process plumbing, so tests drive
 * it directly.
 */

#include <algorithm>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "CLI11.hpp"
#include "json.hpp"

#include "essm/cli_io.hpp"
#include "essm/diagnostics.hpp"
#include "essm/error.hpp"
#include "essm/estimation.hpp"
#include "essm/kalman.hpp"
#include "essm/model_core.hpp"
#include "essm/parallel.hpp"
#include "essm/simulation.hpp"
#include "essm/spectral.hpp"

namespace essm {

using json = nlohmann::ordered_json;

// ------------------------------------------------------------ json echo

inline json to_json(const BandSpec& b) {
  return {{"name", b.name},
          {"center_freq_hz", b.center_freq_hz},
          {"rho_min", b.rho_min},
          {"rho_max", b.rho_max}};
}

inline json to_json(const FitConfig& f) {
  return {{"max_outer_iters", f.max_outer_iters},
          {"outer_tol", f.outer_tol},
          {"optimizer_max_evals", f.optimizer_max_evals},
          {"optimizer_tol", f.optimizer_tol},
          {"seed", f.rng_seed},
          {"block_length", f.block_length},
          {"n_blocks", f.n_blocks},
          {"max_workers", f.max_workers},
          {"refine_initial_mixing", f.refine_initial_mixing}};
}

inline json to_json(const SimSpec& s) {
  return {{"p", s.p},
          {"T", s.T},
          {"R", s.R},
          {"fs", s.fs},
          {"rho_start", std::vector<double>(s.rho_start.data(),
                                            s.rho_start.data() + s.rho_start.size())},
          {"rho_increment", s.rho_increment},
          {"sigma2", s.sigma2},
          {"tau2", s.tau2},
          {"seed", s.rng_seed}};
}

inline json to_json(const DiagnosticsConfig& d) {
  return {{"residuals", d.residuals == StateEstimate::filtered ? "filtered" : "smoothed"},
          {"lags", d.lags},
          {"clusters", d.clusters},
          {"alpha", d.alpha}};
}

inline json to_json(const RunConfig& c) {
  json bands = json::array();
  for (const auto& b : c.bands) {
    bands.push_back(to_json(b));
  }
  return {{"preset", c.preset},
          {"bands", bands},
          {"fit", to_json(c.fit)},
          {"simulation", to_json(c.simulation)},
          {"diagnostics", to_json(c.diagnostics)},
          {"phases", c.phases}};
}

inline json to_json(const EpochParams& p, std::span<const BandSpec> bands) {
  json j;
  for (std::size_t l = 0; l < bands.size(); ++l) {
    j["rho_" + bands[l].name] = p.rho[static_cast<Eigen::Index>(l)];
  }
  j["sigma2"] = p.sigma2;
  j["tau2"] = p.tau2;
  return j;
}

inline json matrix_json(const Eigen::Ref<const Eigen::MatrixXd>& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::vector<double> r(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      r[static_cast<std::size_t>(j)] = m(i, j);
    }
    rows.push_back(r);
  }
  return rows;
}

inline BandSpecs bands_from_json(const json& arr) {
  BandSpecs bands;
  for (const auto& b : arr) {
    bands.push_back({b.at("name").get<std::string>(), b.at("center_freq_hz").get<double>(),
                     b.at("rho_min").get<double>(), b.at("rho_max").get<double>()});
  }
  return bands;
}

inline void write_json(const fsys::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) {
    throw IngestionError(path.string() + ": cannot write file");
  }
  out << std::setw(2) << j << "\n";
}

inline json read_json(const fsys::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw IngestionError(path.string() + ": cannot open file");
  }
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw IngestionError(path.string() + ": " + e.what());
  }
}

// -------------------------------------------------------------- pieces

inline std::vector<std::string> band_names(std::span<const BandSpec> bands) {
  std::vector<std::string> n;
  for (const auto& b : bands) {
    n.push_back(b.name);
  }
  return n;
}

inline void check_data_against_bands(const Dataset& d, std::span<const BandSpec> bands) {
  if (d.epochs.empty()) {
    throw IngestionError("dataset has no epochs");
  }
  validate_bands(bands, d.manifest.fs);
}

inline void write_evolutionary_spectrum(const fsys::path& path, std::span<const EpochParams> params,
                                        std::span<const BandSpec> bands, double fs,
                                        std::size_t T) {
  const auto grid = fourier_grid_hz(T, fs);
  const EvolutionarySpectrum spec = evolutionary_spectrum(params, bands, fs, grid);
  std::vector<std::string> header{"epoch", "freq_hz"};
  for (const auto& b : bands) {
    header.push_back(b.name);
  }
  CsvWriter w(path, header);
  for (std::size_t r = 0; r < spec.epochs(); ++r) {
    for (std::size_t j = 0; j < grid.size(); ++j) {
      std::vector<double> row{grid[j]};
      for (std::size_t l = 0; l < bands.size(); ++l) {
        row.push_back(spec.at(r, j, l));
      }
      w.row({std::to_string(r + 1)}, row);
    }
  }
}

struct ResidualTable {
  /// [epoch][channel]
  std::vector<std::vector<ResidualReport>> reports;
  std::size_t passed = 0;
  std::size_t total = 0;
};

inline ResidualTable residual_table(std::span<const EpochSeries> epochs, const MixingMatrix& mixing,
                                    std::span<const EpochParams> params,
                                    std::span<const BandSpec> bands, const DiagnosticsConfig& d,
                                    std::size_t workers) {
  if (params.size() != epochs.size()) {
    throw ShapeError("parameter rows (" + std::to_string(params.size()) +
                     ") do not match epochs (" + std::to_string(epochs.size()) + ")");
  }
  ResidualTable tab;
  tab.reports.resize(epochs.size());
  parallel_for(
      epochs.size(),
      [&](std::size_t r) {
        const Eigen::MatrixXd res =
            residuals(epochs[r], mixing.matrix(), params[r], bands, d.residuals);
        for (Eigen::Index i = 0; i < res.rows(); ++i) {
          const Eigen::VectorXd x = res.row(i).transpose();
          tab.reports[r].push_back(
              residual_report(std::span<const double>(x.data(), x.size()), d.lags));
        }
      },
      workers);
  for (const auto& row : tab.reports) {
    for (const auto& rep : row) {
      ++tab.total;
      tab.passed += rep.ljung_box_pvalue >= d.alpha ? 1 : 0;
    }
  }
  return tab;
}

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ------------------------------------------------------------ commands

struct CommonFlags {
  std::string config;
  std::string data;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  bool timings = false;
};

inline RunConfig effective_config(const CommonFlags& f, bool seed_is_simulation) {
  RunConfig c = f.config.empty() ? preset("single-epoch") : load_config(f.config);
  if (f.seed) {
    if (seed_is_simulation) {
      c.simulation.rng_seed = *f.seed;
    } else {
      c.fit.rng_seed = *f.seed;
    }
  }
  if (f.workers) {
    c.fit.max_workers = *f.workers;
  }
  return c;
}

inline int cmd_simulate(const CommonFlags& f, bool write_sources, std::ostream& out) {
  const RunConfig c = effective_config(f, true);
  const SimulatedData data = simulate_epochs(c.simulation);
  const fsys::path dir = f.out;
  const fsys::path manifest = save_dataset(dir, data.epochs);
  const auto channels = default_channel_names(c.simulation.p);
  const auto names = band_names(c.bands);
  write_labeled_matrix(dir / "truth_mixing.csv", "channel", channels, names, data.truth.mixing);
  write_params(dir / "truth_params.csv", c.bands, data.truth.params);
  if (write_sources) {
    for (std::size_t r = 0; r < data.sources.size(); ++r) {
      const Eigen::MatrixXd st = data.sources[r].transpose();
      std::vector<std::string> rows;
      for (Eigen::Index t = 0; t < st.rows(); ++t) {
        rows.push_back(std::to_string(t + 1));
      }
      char name[32];
      std::snprintf(name, sizeof name, "sources_%03zu.csv", r + 1);
      write_labeled_matrix(dir / name, "t", rows, names, st);
    }
  }
  json summary = {{"command", "simulate"}, {"config", to_json(c)}};
  write_json(dir / "simulation.json", summary);
  out << "wrote " << data.epochs.size() << " epochs to " << manifest.string() << "\n";
  return 0;
}

inline int cmd_fit(const CommonFlags& f, bool smoothed_sources, std::ostream& out) {
  const auto t0 = std::chrono::steady_clock::now();
  RunConfig c = effective_config(f, false);
  const Dataset d = load_dataset(f.data);
  check_data_against_bands(d, c.bands);
  if (c.fit.block_length > d.epochs.size()) {
    throw ConfigError("block_length " + std::to_string(c.fit.block_length) +
                      " exceeds the dataset's " + std::to_string(d.epochs.size()) + " epochs");
  }
  const double t_load = seconds_since(t0);
  const MultiEpochFit fit = fit_multi_epoch(d.epochs, c.bands, c.fit);
  const double t_fit = seconds_since(t0) - t_load;

  const fsys::path dir = f.out;
  fsys::create_directories(dir);
  const auto names = band_names(c.bands);
  const auto& channels = d.manifest.channel_names;
  write_labeled_matrix(dir / "mixing.csv", "channel", channels, names,
                       fit.global_mixing.matrix());
  {
    std::vector<std::string> header{"block", "start_epoch", "channel"};
    header.insert(header.end(), names.begin(), names.end());
    CsvWriter w(dir / "block_mixings.csv", header);
    for (std::size_t b = 0; b < fit.block_mixings.size(); ++b) {
      const auto& m = fit.block_mixings[b].matrix();
      for (Eigen::Index i = 0; i < m.rows(); ++i) {
        std::vector<double> row;
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
          row.push_back(m(i, j));
        }
        w.row({std::to_string(b + 1), std::to_string(fit.block_starts[b]),
               channels[static_cast<std::size_t>(i)]},
              row);
      }
    }
  }
  const std::vector<std::pair<std::string, std::vector<double>>> extra{
      {"neg_loglik", fit.objectives}};
  write_params(dir / "params.csv", c.bands, fit.params_by_epoch, extra);
  write_evolutionary_spectrum(dir / "evolutionary_spectrum.csv", fit.params_by_epoch, c.bands,
                              d.manifest.fs, static_cast<std::size_t>(d.epochs.front().T()));

  if (smoothed_sources) {
    for (std::size_t r = 0; r < d.epochs.size(); ++r) {
      const CompanionSystem sys = build_companion(c.bands, fit.params_by_epoch[r], d.manifest.fs);
      const FilterOutput fo =
          kalman_filter(d.epochs[r].values, fit.global_mixing.matrix(), sys,
                        fit.params_by_epoch[r].sigma2, fit.params_by_epoch[r].tau2, {});
      const SmootherOutput sm = rts_smooth(fo, sys);
      const Eigen::MatrixXd st =
          sm.means.topRows(static_cast<Eigen::Index>(c.bands.size())).transpose();
      std::vector<std::string> rows;
      for (Eigen::Index t = 0; t < st.rows(); ++t) {
        rows.push_back(std::to_string(t + 1));
      }
      char name[40];
      std::snprintf(name, sizeof name, "smoothed_sources_%03zu.csv", r + 1);
      write_labeled_matrix(dir / name, "t", rows, names, st);
    }
  }

  const ResidualTable res =
      residual_table(d.epochs, fit.global_mixing, fit.params_by_epoch, c.bands, c.diagnostics,
                     c.fit.max_workers);

  json params = json::array();
  for (std::size_t r = 0; r < fit.params_by_epoch.size(); ++r) {
    json p = to_json(fit.params_by_epoch[r], c.bands);
    p["neg_loglik"] = fit.objectives[r];
    params.push_back(p);
  }
  json blocks = json::array();
  for (std::size_t b = 0; b < fit.block_starts.size(); ++b) {
    blocks.push_back({{"start_epoch", fit.block_starts[b]},
                      {"converged_epochs", fit.block_converged[b]},
                      {"retried", fit.block_retries[b] != 0}});
  }
  json summary = {
      {"command", "fit"},
      {"data", {{"manifest", f.data},
                {"epochs", d.epochs.size()},
                {"channels", channels},
                {"samples_per_epoch", d.epochs.front().T()},
                {"fs", d.manifest.fs}}},
      {"config", to_json(c)},
      {"bands", names},
      {"global_mixing", matrix_json(fit.global_mixing.matrix())},
      {"blocks", blocks},
      {"params_by_epoch", params},
      {"diagnostics",
       {{"residuals", c.diagnostics.residuals == StateEstimate::filtered ? "filtered" : "smoothed"},
        {"ljung_box_lags", c.diagnostics.lags},
        {"alpha", c.diagnostics.alpha},
        {"series_tested", res.total},
        {"series_passed", res.passed}}}};
  if (f.timings) {
    summary["timings_seconds"] = {{"load", t_load}, {"fit", t_fit}, {"total", seconds_since(t0)}};
  }
  write_json(dir / "run_summary.json", summary);
  out << "fit " << d.epochs.size() << " epochs x " << channels.size() << " channels; "
      << res.passed << "/" << res.total << " residual series pass Ljung-Box at alpha "
      << c.diagnostics.alpha << "\n";
  return 0;
}

inline int cmd_benchmark(const CommonFlags& f, std::ostream& out) {
  const auto t0 = std::chrono::steady_clock::now();
  RunConfig c = effective_config(f, true);
  const SimulatedData data = simulate_epochs(c.simulation);
  const MultiEpochFit essm_fit = fit_multi_epoch(data.epochs, c.bands, c.fit);
  const double t_essm = seconds_since(t0);
  const BenchmarkFit ssm = fit_benchmark_ssm(data.epochs, c.bands, c.fit);
  const double t_ssm = seconds_since(t0) - t_essm;

  const MseReport a = mse_report(essm_fit.params_by_epoch, data.truth, c.bands, c.simulation.fs);
  const std::vector<EpochParams> avg{ssm.params};
  const MseReport b = mse_report(avg, data.truth, c.bands, c.simulation.fs);

  const fsys::path dir = f.out;
  fsys::create_directories(dir);
  {
    CsvWriter w(dir / "mse_table.csv", {"parameter", "essm", "ssm"});
    const auto labels = a.row_labels();
    const auto va = a.row_values();
    const auto vb = b.row_values();
    for (std::size_t i = 0; i < labels.size(); ++i) {
      w.row({labels[i]}, {va[i], vb[i]});
    }
  }
  write_params(dir / "params_essm.csv", c.bands, essm_fit.params_by_epoch);
  std::vector<EpochParams> per_epoch;
  for (const auto& fe : ssm.per_epoch) {
    per_epoch.push_back(fe.params);
  }
  write_params(dir / "params_ssm_per_epoch.csv", c.bands, per_epoch);
  const auto names = band_names(c.bands);
  const auto channels = default_channel_names(c.simulation.p);
  write_labeled_matrix(dir / "mixing_essm.csv", "channel", channels, names,
                       essm_fit.global_mixing.matrix());
  write_labeled_matrix(dir / "mixing_ssm.csv", "channel", channels, names, ssm.mixing.matrix());
  write_labeled_matrix(dir / "truth_mixing.csv", "channel", channels, names, data.truth.mixing);

  json rows = json::array();
  const auto labels = a.row_labels();
  for (std::size_t i = 0; i < labels.size(); ++i) {
    rows.push_back({{"parameter", labels[i]},
                    {"essm", a.row_values()[i]},
                    {"ssm", b.row_values()[i]}});
  }
  json summary = {{"command", "benchmark"},
                  {"config", to_json(c)},
                  {"mse", rows},
                  {"ssm_average", to_json(ssm.params, c.bands)}};
  if (f.timings) {
    summary["timings_seconds"] = {{"essm", t_essm}, {"ssm", t_ssm}, {"total", seconds_since(t0)}};
  }
  write_json(dir / "benchmark_summary.json", summary);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    out << std::left << std::setw(20) << labels[i] << " essm " << std::setw(14)
        << a.row_values()[i] << " ssm " << b.row_values()[i] << "\n";
  }
  return 0;
}

inline int cmd_spectrum(const CommonFlags& f, const std::string& phase_text, std::ostream& out) {
  const Dataset d = load_dataset(f.data);
  const auto phases = parse_phases(phase_text);
  validate_partition(phases, d.epochs.size());
  const std::size_t p = d.manifest.channel_names.size();
  const std::size_t R = d.epochs.size();
  // [channel][epoch]
  std::vector<std::vector<Periodogram>> pg(p, std::vector<Periodogram>(R));
  parallel_for(
      R,
      [&](std::size_t r) {
    for (std::size_t i = 0; i < p; ++i) {
      const Eigen::VectorXd x = d.epochs[r].values.row(static_cast<Eigen::Index>(i)).transpose();
      pg[i][r] = periodogram(x, d.manifest.fs);
    }
  }, f.workers.value_or(0));
  const fsys::path dir = f.out;
  fsys::create_directories(dir);
  const auto& freqs = pg.front().front().freqs_hz;
  {
    CsvWriter w(dir / "periodograms.csv", {"epoch", "channel", "freq_hz", "power"});
    for (std::size_t r = 0; r < R; ++r) {
      for (std::size_t i = 0; i < p; ++i) {
        for (std::size_t j = 0; j < freqs.size(); ++j) {
          w.row({std::to_string(r + 1), d.manifest.channel_names[i]},
                {freqs[j], pg[i][r].power[j]});
        }
      }
    }
  }
  CsvWriter avg(dir / "phase_average.csv", {"phase", "channel", "freq_hz", "power"});
  CsvWriter rel(dir / "relative_periodogram.csv", {"phase", "channel", "freq_hz", "relative"});
  std::size_t flagged = 0;
  for (std::size_t i = 0; i < p; ++i) {
    const auto per_phase = phase_average(pg[i], phases);
    const RelativePeriodogram rp = relative_periodogram(per_phase);
    flagged += rp.flagged.size();
    for (std::size_t k = 0; k < phases.size(); ++k) {
      const std::string label =
          std::to_string(phases[k].first) + "-" + std::to_string(phases[k].last);
      for (std::size_t j = 0; j < freqs.size(); ++j) {
        avg.row({label, d.manifest.channel_names[i]}, {freqs[j], per_phase[k][j]});
        rel.row({label, d.manifest.channel_names[i]}, {freqs[j], rp.values[k][j]});
      }
    }
  }
  out << "periodograms for " << R << " epochs x " << p << " channels over " << phases.size()
      << " phases";
  if (flagged > 0) {
    out << "; " << flagged << " channel-frequency cells had zero power in every phase";
  }
  out << "\n";
  return 0;
}

struct DiagnoseFlags {
  std::string fit_dir;
  std::optional<std::string> residuals;
  std::optional<std::size_t> lags;
  std::optional<std::size_t> clusters;
};

inline int cmd_diagnose(const CommonFlags& f, const DiagnoseFlags& g, std::ostream& out) {
  const Dataset d = load_dataset(f.data);
  const fsys::path fit_dir = g.fit_dir;
  const json summary = read_json(fit_dir / "run_summary.json");
  RunConfig c;
  try {
    c.bands = bands_from_json(summary.at("config").at("bands"));
    const auto& dj = summary.at("config").at("diagnostics");
    c.diagnostics.residuals = dj.at("residuals").get<std::string>() == "smoothed"
                                  ? StateEstimate::smoothed
                                  : StateEstimate::filtered;
    c.diagnostics.lags = dj.at("lags").get<std::size_t>();
    c.diagnostics.clusters = dj.at("clusters").get<std::size_t>();
    c.diagnostics.alpha = dj.at("alpha").get<double>();
    c.fit.max_workers = summary.at("config").at("fit").at("max_workers").get<std::size_t>();
  } catch (const json::exception& e) {
    throw IngestionError((fit_dir / "run_summary.json").string() + ": " + e.what());
  }
  if (!f.config.empty()) {
    const RunConfig over = load_config(f.config);
    c.diagnostics = over.diagnostics;
  }
  if (g.residuals) {
    if (*g.residuals != "filtered" && *g.residuals != "smoothed") {
      throw ConfigError("--residuals must be filtered or smoothed");
    }
    c.diagnostics.residuals =
        *g.residuals == "smoothed" ? StateEstimate::smoothed : StateEstimate::filtered;
  }
  if (g.lags) {
    c.diagnostics.lags = *g.lags;
  }
  if (g.clusters) {
    c.diagnostics.clusters = *g.clusters;
  }
  if (f.workers) {
    c.fit.max_workers = *f.workers;
  }
  check_data_against_bands(d, c.bands);

  std::vector<std::string> mix_cols;
  const MixingMatrix mixing(read_labeled_matrix(fit_dir / "mixing.csv", nullptr, &mix_cols));
  if (mix_cols != band_names(c.bands) ||
      static_cast<std::size_t>(mixing.p()) != d.manifest.channel_names.size()) {
    throw ShapeError("mixing.csv does not match the dataset channels or fitted bands");
  }
  const auto params = read_params(fit_dir / "params.csv", c.bands);
  const ResidualTable res =
      residual_table(d.epochs, mixing, params, c.bands, c.diagnostics, c.fit.max_workers);

  const fsys::path dir = f.out;
  fsys::create_directories(dir);
  const auto& channels = d.manifest.channel_names;
  {
    CsvWriter lb(dir / "ljung_box.csv", {"epoch", "channel", "statistic", "pvalue"});
    CsvWriter ap(dir / "acf_pacf.csv", {"epoch", "channel", "lag", "acf", "pacf"});
    for (std::size_t r = 0; r < res.reports.size(); ++r) {
      for (std::size_t i = 0; i < res.reports[r].size(); ++i) {
        const auto& rep = res.reports[r][i];
        lb.row({std::to_string(r + 1), channels[i]}, {rep.ljung_box_stat, rep.ljung_box_pvalue});
        for (std::size_t h = 1; h <= rep.n_lags; ++h) {
          const double pa = h <= rep.pacf.size() ? rep.pacf[h - 1] : std::nan("");
          ap.row({std::to_string(r + 1), channels[i], std::to_string(h)}, {rep.acf[h], pa});
        }
      }
    }
  }
  json clusters = json::array();
  {
    CsvWriter cl(dir / "clusters.csv", {"band", "channel", "loading", "cluster"});
    CsvWriter lk(dir / "linkage.csv", {"band", "merge", "height"});
    for (std::size_t l = 0; l < c.bands.size(); ++l) {
      const ClusterResult cr = cluster_mixing(mixing, l, c.diagnostics.clusters, c.bands[l].name);
      for (std::size_t i = 0; i < cr.assignments.size(); ++i) {
        const double loading =
            mixing.matrix()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(l));
        cl.row({cr.band, channels[i], format_double(loading),
                std::to_string(cr.assignments[i] + 1)});
      }
      for (std::size_t k = 0; k < cr.linkage_heights.size(); ++k) {
        lk.row({cr.band, std::to_string(k + 1)}, {cr.linkage_heights[k]});
      }
      clusters.push_back({{"band", cr.band},
                          {"n_clusters", cr.n_clusters},
                          {"assignments", cr.assignments}});
    }
  }
  json digest = {{"command", "diagnose"},
                 {"fit", fit_dir.string()},
                 {"diagnostics", to_json(c.diagnostics)},
                 {"series_tested", res.total},
                 {"series_passed", res.passed},
                 {"clusters", clusters}};
  write_json(dir / "diagnose_summary.json", digest);
  out << res.passed << "/" << res.total << " residual series pass Ljung-Box at alpha "
      << c.diagnostics.alpha << "\n";
  return 0;
}

/// Runs one invocation; args excludes the program name. Returns the exit
/// status: 0 on success, 2 on usage errors, 1 on computational failures.
inline int run_command(const std::vector<std::string>& args, std::ostream& out,
                       std::ostream& err) {
  CLI::App app{"Evolutionary state-space model toolkit", "essm"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every command");

  CommonFlags f;
  bool write_sources = false;
  bool smoothed = false;
  std::string phases;
  DiagnoseFlags g;
  auto add_seed = [&](CLI::App* sub, const char* what) {
    sub->add_option("--seed", f.seed, what);
    sub->add_option("--workers", f.workers, "Worker threads, 0 for all cores");
  };

  CLI::App* sim = app.add_subcommand("simulate", "Generate synthetic epochs and ground truth");
  sim->add_option("--config", f.config, "Config file")->check(CLI::ExistingFile);
  sim->add_option("--out", f.out, "Output directory")->required();
  sim->add_flag("--sources", write_sources, "Also write the latent sources");
  add_seed(sim, "Override the simulation seed");

  CLI::App* fit = app.add_subcommand("fit", "Fit the model to a dataset");
  fit->add_option("--data", f.data, "Dataset manifest")->required()->check(CLI::ExistingFile);
  fit->add_option("--config", f.config, "Config file")->check(CLI::ExistingFile);
  fit->add_option("--out", f.out, "Output directory")->required();
  fit->add_flag("--smoothed-sources", smoothed, "Write smoothed source estimates per epoch");
  fit->add_flag("--timings", f.timings, "Record wall-clock timings in the run summary");
  add_seed(fit, "Override the fit seed");

  CLI::App* bench = app.add_subcommand("benchmark", "Compare against the per-epoch baseline");
  bench->add_option("--config", f.config, "Config file")->check(CLI::ExistingFile);
  bench->add_option("--out", f.out, "Output directory")->required();
  bench->add_flag("--timings", f.timings, "Record wall-clock timings in the summary");
  add_seed(bench, "Override the simulation seed");

  CLI::App* spec = app.add_subcommand("spectrum", "Periodograms and phase summaries");
  spec->add_option("--data", f.data, "Dataset manifest")->required()->check(CLI::ExistingFile);
  spec->add_option("--phases", phases, "Phase partition, e.g. 1-80,81-160,161-247")->required();
  spec->add_option("--out", f.out, "Output directory")->required();
  spec->add_option("--workers", f.workers, "Worker threads, 0 for all cores");

  CLI::App* diag = app.add_subcommand("diagnose", "Residual checks and loading clusters");
  diag->add_option("--data", f.data, "Dataset manifest")->required()->check(CLI::ExistingFile);
  diag->add_option("--fit", g.fit_dir, "Output directory of a fit")
      ->required()
      ->check(CLI::ExistingDirectory);
  diag->add_option("--out", f.out, "Output directory")->required();
  diag->add_option("--config", f.config, "Config file with a [diagnostics] section")
      ->check(CLI::ExistingFile);
  diag->add_option("--residuals", g.residuals, "filtered or smoothed states");
  diag->add_option("--lags", g.lags, "Ljung-Box lags");
  diag->add_option("--clusters", g.clusters, "Clusters per band, 0 for automatic");
  diag->add_option("--workers", f.workers, "Worker threads, 0 for all cores");

  std::vector<const char*> argv{"essm"};
  for (const auto& a : args) {
    argv.push_back(a.c_str());
  }
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*sim) {
      return cmd_simulate(f, write_sources, out);
    }
    if (*fit) {
      return cmd_fit(f, smoothed, out);
    }
    if (*bench) {
      return cmd_benchmark(f, out);
    }
    if (*spec) {
      return cmd_spectrum(f, phases, out);
    }
    return cmd_diagnose(f, g, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace essm

#endif  // ESSM_COMMANDS_HPP
