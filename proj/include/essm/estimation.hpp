#ifndef ESSM_ESTIMATION_HPP
#define ESSM_ESTIMATION_HPP

/** @file
 * Parameter estimation for single epochs and for multi-epoch experiments
 * with a shared mixing matrix.
 *
 * Single epoch: alternate
 *   (a) innovations maximum likelihood for (rho, sigma2, tau2) given M, with
 *       every rho_l confined to its band box, and
 *   (b) least squares for M given filtered sources rescaled to unit standard
 *       deviation, projected onto the nonnegative orthant,
 * until the parameters stop moving.
 *
 * Multiple epochs: draw contiguous blocks of epochs, carry the mixing
 * estimate forward through each block, average the block-final estimates
 * into a global M, then re-fit (rho, sigma2, tau2) for every epoch with the
 * global M held fixed.
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "essm/error.hpp"
#include "essm/kalman.hpp"
#include "essm/model_core.hpp"
#include "essm/optimize.hpp"
#include "essm/parallel.hpp"
#include "essm/random.hpp"

namespace essm {

struct FitConfig {
  std::size_t max_outer_iters = 50;
  double outer_tol = 1e-4;
  std::size_t optimizer_max_evals = 2000;
  double optimizer_tol = 1e-9;
  std::uint64_t rng_seed = 1;
  std::size_t block_length = 10;
  std::size_t n_blocks = 30;
  /// Worker threads for blocks and per-epoch maps; 0 uses all cores.
  std::size_t max_workers = 0;
  /// Re-estimate the mixing once from the starting parameters before the
  /// first likelihood step.
  bool refine_initial_mixing = true;

  void validate() const {
    if (max_outer_iters < 1 || optimizer_max_evals < 1 || block_length < 1 || n_blocks < 1) {
      throw ConfigError("fit counts must be at least 1");
    }
    if (!(outer_tol > 0.0) || !(optimizer_tol > 0.0)) {
      throw ConfigError("fit tolerances must be positive");
    }
  }

  void validate(std::size_t epochs) const {
    validate();
    if (block_length > epochs) {
      throw ConfigError("block_length " + std::to_string(block_length) + " exceeds epoch count " +
                        std::to_string(epochs));
    }
  }
};

struct ParamEstimate {
  EpochParams params;
  double objective = 0.0;
  double start_objective = 0.0;
  std::size_t evals = 0;
};

struct SingleEpochFit {
  EpochParams params;
  MixingMatrix mixing;
  /// Objective after the likelihood step of each accepted outer iteration.
  std::vector<double> trace;
  bool converged = false;
  std::size_t iterations = 0;
  std::size_t rejected_iterations = 0;
  double objective = 0.0;
};

struct MultiEpochFit {
  MixingMatrix global_mixing;
  std::vector<MixingMatrix> block_mixings;
  std::vector<EpochParams> params_by_epoch;
  std::vector<double> objectives;
  /// 1-based first epoch of each block.
  std::vector<std::size_t> block_starts;
  /// Epochs within each block whose alternation met the tolerance.
  std::vector<std::size_t> block_converged;
  /// 0 if the block's first draw succeeded, 1 if it needed the retry.
  std::vector<std::size_t> block_retries;
};

struct BenchmarkFit {
  EpochParams params;
  MixingMatrix mixing;
  std::vector<SingleEpochFit> per_epoch;
};

namespace detail {

/// Optimiser coordinates: logistic-box rho for bands with a non-degenerate
/// box, then log sigma2, log tau2.
class ParamCoordinates {
 public:
  explicit ParamCoordinates(std::span<const BandSpec> bands) {
    for (std::size_t l = 0; l < bands.size(); ++l) {
      boxes_.push_back({bands[l].rho_min, bands[l].rho_max});
      if (bands[l].rho_min < bands[l].rho_max) {
        free_.push_back(l);
      }
    }
  }

  Eigen::Index size() const { return static_cast<Eigen::Index>(free_.size()) + 2; }

  Eigen::VectorXd encode(const EpochParams& p) const {
    Eigen::VectorXd u(size());
    for (std::size_t k = 0; k < free_.size(); ++k) {
      const auto l = free_[k];
      u[static_cast<Eigen::Index>(k)] = boxes_[l].from_box(p.rho[static_cast<Eigen::Index>(l)]);
    }
    u[size() - 2] = std::log(p.sigma2);
    u[size() - 1] = std::log(p.tau2);
    return u;
  }

  EpochParams decode(const Eigen::VectorXd& u) const {
    EpochParams p;
    p.rho.resize(static_cast<Eigen::Index>(boxes_.size()));
    for (std::size_t l = 0; l < boxes_.size(); ++l) {
      p.rho[static_cast<Eigen::Index>(l)] = boxes_[l].lo;
    }
    for (std::size_t k = 0; k < free_.size(); ++k) {
      const auto l = free_[k];
      p.rho[static_cast<Eigen::Index>(l)] = boxes_[l].to_box(u[static_cast<Eigen::Index>(k)]);
    }
    p.sigma2 = std::exp(u[size() - 2]);
    p.tau2 = std::exp(u[size() - 1]);
    return p;
  }

 private:
  std::vector<BoxTransform> boxes_;
  std::vector<std::size_t> free_;
};

inline void check_epoch(const EpochSeries& epoch, const MixingMatrix& mixing,
                        std::span<const BandSpec> bands) {
  if (epoch.T() < 2) {
    throw ShapeError("epoch needs at least two samples");
  }
  if (mixing.p() != epoch.p() || static_cast<std::size_t>(mixing.q()) != bands.size()) {
    throw ShapeError("mixing matrix is " + std::to_string(mixing.p()) + "x" +
                     std::to_string(mixing.q()) + " for " + std::to_string(epoch.p()) +
                     " channels and " + std::to_string(bands.size()) + " bands");
  }
  validate_bands(bands, epoch.fs);
}

inline double relative_change(const EpochParams& a, const EpochParams& b) {
  auto rel = [](double x, double y) {
    return std::abs(x - y) / std::max(std::abs(y), std::numeric_limits<double>::min());
  };
  double worst = std::max(rel(a.sigma2, b.sigma2), rel(a.tau2, b.tau2));
  for (Eigen::Index l = 0; l < a.rho.size(); ++l) {
    worst = std::max(worst, rel(a.rho[l], b.rho[l]));
  }
  return worst;
}

inline void check_multi(std::span<const EpochSeries> epochs) {
  if (epochs.empty()) {
    throw ShapeError("at least one epoch is required");
  }
  for (const auto& e : epochs) {
    if (e.p() != epochs[0].p() || e.T() != epochs[0].T() || e.fs != epochs[0].fs) {
      throw ShapeError("epochs must share channel count, length and sampling rate");
    }
  }
}

}  // namespace detail

/// Minimises the innovations negative log-likelihood over (rho, sigma2,
/// tau2) with the mixing matrix held fixed.
inline ParamEstimate optimize_epoch_params(const EpochSeries& epoch, const MixingMatrix& mixing,
                                           std::span<const BandSpec> bands,
                                           const EpochParams& start, const FitConfig& config,
                                           const FilterInit& init = {}) {
  detail::check_epoch(epoch, mixing, bands);
  start.validate(bands);
  const InnovationsLikelihood likelihood(epoch, mixing.matrix(), init);
  const detail::ParamCoordinates coords(bands);

  auto objective = [&](const Eigen::VectorXd& u) {
    const EpochParams p = coords.decode(u);
    if (!(p.sigma2 > 0.0) || !(p.tau2 > 0.0) || !std::isfinite(p.sigma2) ||
        !std::isfinite(p.tau2)) {
      return std::numeric_limits<double>::infinity();
    }
    try {
      return likelihood(p, bands);
    } catch (const ConditioningError&) {
      return std::numeric_limits<double>::infinity();
    } catch (const CausalityError&) {
      return std::numeric_limits<double>::infinity();
    }
  };

  ParamEstimate est;
  try {
    est.start_objective = likelihood(start, bands);
  } catch (const ConditioningError& e) {
    throw InitializationError(std::string("objective undefined at start: ") + e.what());
  }
  if (!std::isfinite(est.start_objective)) {
    throw InitializationError("objective is not finite at the starting parameters");
  }

  SimplexOptions opts;
  opts.max_evals = config.optimizer_max_evals;
  opts.ftol = config.optimizer_tol;
  const Eigen::VectorXd u0 = coords.encode(start);
  const SimplexResult res = nelder_mead(objective, u0, opts);
  if (!std::isfinite(res.value)) {
    throw OptimizationError("every trial point failed filter conditioning");
  }
  est.evals = res.evals;
  if (res.value <= est.start_objective) {
    est.params = coords.decode(res.x);
    est.objective = res.value;
  } else {
    est.params = start;
    est.objective = est.start_objective;
  }
  // The logistic map stays strictly inside the box up to rounding.
  for (std::size_t l = 0; l < bands.size(); ++l) {
    auto& r = est.params.rho[static_cast<Eigen::Index>(l)];
    r = std::clamp(r, bands[l].rho_min, bands[l].rho_max);
  }
  return est;
}

/// Divides each row by its sample standard deviation (n - 1 denominator).
inline Eigen::MatrixXd standardize_rows(const Eigen::Ref<const Eigen::MatrixXd>& x) {
  Eigen::MatrixXd out = x;
  const double n = static_cast<double>(x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double mean = x.row(i).mean();
    const double var = (x.row(i).array() - mean).square().sum() / (n - 1.0);
    if (!(var > 0.0)) {
      throw CollinearityError("filtered source " + std::to_string(i) + " has zero variance");
    }
    out.row(i) /= std::sqrt(var);
  }
  return out;
}

/// Row-wise least squares Y ~ M X for M (p x q), negatives clipped to zero.
inline MixingMatrix least_squares_mixing(const Eigen::Ref<const Eigen::MatrixXd>& y,
                                         const Eigen::Ref<const Eigen::MatrixXd>& sources) {
  if (y.cols() != sources.cols()) {
    throw ShapeError("observation and source lengths differ");
  }
  const Eigen::MatrixXd gram = sources * sources.transpose();
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(gram);
  qr.setThreshold(1e-12);
  if (qr.rank() < gram.rows()) {
    throw CollinearityError("source matrix is rank deficient");
  }
  // M' = (X X')^{-1} X Y'
  Eigen::MatrixXd m = qr.solve(sources * y.transpose()).transpose();
  m = m.cwiseMax(0.0);
  return MixingMatrix(std::move(m));
}

/// Filter under the current mixing, standardise the filtered sources, then
/// re-estimate the mixing matrix by least squares.
inline MixingMatrix estimate_mixing(const EpochSeries& epoch, const MixingMatrix& current,
                                    const EpochParams& params, std::span<const BandSpec> bands,
                                    const FilterInit& init = {}) {
  detail::check_epoch(epoch, current, bands);
  const FilterOutput out = kalman_filter(epoch, current.matrix(), params, bands, init);
  const auto q = static_cast<Eigen::Index>(bands.size());
  const Eigen::MatrixXd sources = standardize_rows(out.filtered_means.topRows(q));
  return least_squares_mixing(epoch.values, sources);
}

inline SingleEpochFit fit_single_epoch(const EpochSeries& epoch, std::span<const BandSpec> bands,
                                       const MixingMatrix& m0, const FitConfig& config,
                                       std::optional<EpochParams> start = std::nullopt,
                                       const FilterInit& init = {}) {
  config.validate();
  detail::check_epoch(epoch, m0, bands);
  SingleEpochFit fit;
  EpochParams params = start ? *start : narrowband_start(bands);
  MixingMatrix mixing =
      config.refine_initial_mixing ? estimate_mixing(epoch, m0, params, bands, init) : m0;
  double best = std::numeric_limits<double>::infinity();

  for (std::size_t it = 0; it < config.max_outer_iters; ++it) {
    const ParamEstimate est = optimize_epoch_params(epoch, mixing, bands, params, config, init);
    ++fit.iterations;
    if (est.objective <= best) {
      best = est.objective;
      fit.trace.push_back(est.objective);
    } else {
      ++fit.rejected_iterations;
    }
    fit.objective = est.objective;
    MixingMatrix next = estimate_mixing(epoch, mixing, est.params, bands, init);
    const double change = detail::relative_change(est.params, params);
    params = est.params;
    mixing = std::move(next);
    if (change < config.outer_tol) {
      fit.converged = true;
      break;
    }
  }
  fit.params = std::move(params);
  fit.mixing = std::move(mixing);
  return fit;
}

/// Random positive starting mixing matrix, entries uniform on [0.1, 1).
inline MixingMatrix random_mixing(Rng& rng, Eigen::Index p, Eigen::Index q) {
  return MixingMatrix(uniform_matrix(rng, p, q, 0.1, 1.0));
}

inline MultiEpochFit fit_multi_epoch(std::span<const EpochSeries> epochs,
                                     std::span<const BandSpec> bands, const FitConfig& config,
                                     const FilterInit& init = {}) {
  detail::check_multi(epochs);
  const std::size_t R = epochs.size();
  config.validate(R);
  validate_bands(bands, epochs[0].fs);
  const std::size_t l = config.block_length;
  const Eigen::Index p = epochs[0].p();
  const auto q = static_cast<Eigen::Index>(bands.size());

  std::vector<std::optional<MixingMatrix>> block_final(config.n_blocks);
  std::vector<std::size_t> starts(config.n_blocks, 0);
  std::vector<std::size_t> converged(config.n_blocks, 0);
  std::vector<std::size_t> retries(config.n_blocks, 0);

  parallel_for(
      config.n_blocks,
      [&](std::size_t b) {
        for (std::uint64_t attempt = 0; attempt < 2; ++attempt) {
          Rng rng = make_rng(config.rng_seed, {1, b, attempt});
          std::uniform_int_distribution<std::size_t> pick(0, R - l);
          const std::size_t s = pick(rng);
          MixingMatrix mixing = random_mixing(rng, p, q);
          try {
            std::size_t ok = 0;
            for (std::size_t r = s; r < s + l; ++r) {
              SingleEpochFit f = fit_single_epoch(epochs[r], bands, mixing, config, std::nullopt, init);
              ok += f.converged ? 1 : 0;
              mixing = std::move(f.mixing);
            }
            starts[b] = s + 1;
            converged[b] = ok;
            retries[b] = attempt;
            block_final[b] = std::move(mixing);
            return;
          } catch (const Error& e) {
            if (attempt == 1) {
              throw OptimizationError("block " + std::to_string(b) +
                                      " failed after one retry: " + e.what());
            }
          }
        }
      },
      config.max_workers);

  MultiEpochFit fit;
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(p, q);
  for (auto& m : block_final) {
    sum += m->matrix();
    fit.block_mixings.push_back(std::move(*m));
  }
  fit.global_mixing = MixingMatrix(sum / static_cast<double>(config.n_blocks));
  fit.block_starts = std::move(starts);
  fit.block_converged = std::move(converged);
  fit.block_retries = std::move(retries);

  fit.params_by_epoch.resize(R);
  fit.objectives.resize(R);
  const EpochParams start = default_start(bands);
  parallel_for(
      R,
      [&](std::size_t r) {
        const ParamEstimate est =
            optimize_epoch_params(epochs[r], fit.global_mixing, bands, start, config, init);
        fit.params_by_epoch[r] = est.params;
        fit.objectives[r] = est.objective;
      },
      config.max_workers);
  return fit;
}

/// Classical single-epoch baseline: fit every epoch independently from a
/// fresh random mixing matrix and average the estimates.
inline BenchmarkFit fit_benchmark_ssm(std::span<const EpochSeries> epochs,
                                      std::span<const BandSpec> bands, const FitConfig& config,
                                      const FilterInit& init = {}) {
  detail::check_multi(epochs);
  config.validate();
  validate_bands(bands, epochs[0].fs);
  const std::size_t R = epochs.size();
  const Eigen::Index p = epochs[0].p();
  const auto q = static_cast<Eigen::Index>(bands.size());

  BenchmarkFit out;
  out.per_epoch.resize(R);
  parallel_for(
      R,
      [&](std::size_t r) {
        Rng rng = make_rng(config.rng_seed, {2, r});
        const MixingMatrix m0 = random_mixing(rng, p, q);
        out.per_epoch[r] = fit_single_epoch(epochs[r], bands, m0, config, std::nullopt, init);
      },
      config.max_workers);

  Eigen::VectorXd rho = Eigen::VectorXd::Zero(q);
  Eigen::MatrixXd mix = Eigen::MatrixXd::Zero(p, q);
  double sigma2 = 0.0;
  double tau2 = 0.0;
  for (const auto& f : out.per_epoch) {
    rho += f.params.rho;
    mix += f.mixing.matrix();
    sigma2 += f.params.sigma2;
    tau2 += f.params.tau2;
  }
  const double n = static_cast<double>(R);
  out.params.rho = rho / n;
  out.params.sigma2 = sigma2 / n;
  out.params.tau2 = tau2 / n;
  out.mixing = MixingMatrix(mix / n);
  return out;
}

}  // namespace essm

#endif  // ESSM_ESTIMATION_HPP
