#ifndef ESSM_SIMULATION_HPP
#define ESSM_SIMULATION_HPP

/** @file
 * Synthetic multi-epoch data: q independent standardised AR(2) sources per
 * epoch mixed into p channels with white observation noise, moduli drifting
 * linearly across epochs.
 */

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "essm/error.hpp"
#include "essm/model_core.hpp"
#include "essm/parallel.hpp"
#include "essm/random.hpp"

namespace essm {

inline constexpr std::size_t kBurnIn = 500;

struct SimSpec {
  std::size_t p = 20;
  std::size_t T = 1000;
  double fs = 1000.0;
  std::size_t R = 1;
  BandSpecs bands;
  Eigen::VectorXd rho_start;
  double rho_increment = 0.0;
  /// Innovation variance of the raw AR(2) recursion; it drops out once the
  /// sources are standardised.
  double sigma2 = 0.1;
  double tau2 = 1.0;
  std::uint64_t rng_seed = 1;
  std::optional<Eigen::MatrixXd> mixing;

  std::size_t q() const { return bands.size(); }

  double rho(std::size_t epoch, std::size_t band) const {
    return rho_start[static_cast<Eigen::Index>(band)] +
           static_cast<double>(epoch) * rho_increment;
  }

  void validate() const {
    if (p < 1 || T < 2 || R < 1) {
      throw ConfigError("simulation needs p >= 1, T >= 2, R >= 1");
    }
    validate_bands(bands, fs);
    if (static_cast<std::size_t>(rho_start.size()) != bands.size()) {
      throw ConfigError("rho_start has " + std::to_string(rho_start.size()) + " entries for " +
                        std::to_string(bands.size()) + " bands");
    }
    for (std::size_t l = 0; l < bands.size(); ++l) {
      const double first = rho(0, l);
      const double last = rho(R - 1, l);
      if (!(first > 1.0)) {
        throw CausalityError("rho_start for band '" + bands[l].name + "' must exceed 1");
      }
      if (!bands[l].contains(first) || !bands[l].contains(last)) {
        throw ConfigError("simulated moduli for band '" + bands[l].name +
                          "' leave the band box");
      }
    }
    if (!(sigma2 > 0.0) || !(tau2 >= 0.0)) {
      throw ConfigError("simulation variances must be positive");
    }
    if (mixing) {
      if (mixing->rows() != static_cast<Eigen::Index>(p) ||
          mixing->cols() != static_cast<Eigen::Index>(bands.size())) {
        throw ConfigError("fixed mixing matrix has the wrong shape");
      }
      if ((mixing->array() < 0.0).any()) {
        throw ConfigError("fixed mixing matrix must be nonnegative");
      }
    }
  }
};

struct GroundTruth {
  Eigen::MatrixXd mixing;
  std::vector<EpochParams> params;
};

struct SimulatedData {
  std::vector<EpochSeries> epochs;
  /// q x T standardised sources of each epoch.
  std::vector<Eigen::MatrixXd> sources;
  GroundTruth truth;
};

/// Standardised AR(2) path of length T after discarding kBurnIn samples.
inline Eigen::VectorXd simulate_ar2(Ar2Coeffs c, double sigma_w2, std::size_t T, Rng& rng) {
  if (!is_causal(c)) {
    throw CausalityError("cannot simulate a non-causal AR(2) process");
  }
  if (T < 2) {
    throw LengthError("AR(2) simulation needs T >= 2");
  }
  std::normal_distribution<double> noise(0.0, std::sqrt(sigma_w2));
  double x1 = 0.0;
  double x2 = 0.0;
  for (std::size_t t = 0; t < kBurnIn; ++t) {
    const double x = c.phi1 * x1 + c.phi2 * x2 + noise(rng);
    x2 = x1;
    x1 = x;
  }
  Eigen::VectorXd out(static_cast<Eigen::Index>(T));
  for (Eigen::Index t = 0; t < out.size(); ++t) {
    const double x = c.phi1 * x1 + c.phi2 * x2 + noise(rng);
    x2 = x1;
    x1 = x;
    out[t] = x;
  }
  out.array() -= out.mean();
  const double sd = std::sqrt(out.squaredNorm() / static_cast<double>(T - 1));
  out /= sd;
  return out;
}

inline Eigen::VectorXd simulate_ar2(Ar2Coeffs c, double sigma_w2, std::size_t T,
                                    std::uint64_t seed) {
  Rng rng = make_rng(seed);
  return simulate_ar2(c, sigma_w2, T, rng);
}

inline SimulatedData simulate_epochs(const SimSpec& spec) {
  spec.validate();
  const auto p = static_cast<Eigen::Index>(spec.p);
  const auto q = static_cast<Eigen::Index>(spec.q());
  const auto T = static_cast<Eigen::Index>(spec.T);

  SimulatedData data;
  if (spec.mixing) {
    data.truth.mixing = *spec.mixing;
  } else {
    Rng rng = make_rng(spec.rng_seed, {0});
    data.truth.mixing = uniform_matrix(rng, p, q, 0.1, 1.0);
  }
  data.epochs.resize(spec.R);
  data.sources.resize(spec.R);
  data.truth.params.resize(spec.R);

  parallel_for(spec.R, [&](std::size_t r) {
    EpochParams truth;
    truth.rho.resize(q);
    for (Eigen::Index l = 0; l < q; ++l) {
      truth.rho[l] = spec.rho(r, static_cast<std::size_t>(l));
    }
    // Sources are rescaled to unit variance, which is the marginal source
    // variance under the default noise scaling.
    truth.sigma2 = 1.0;
    truth.tau2 = spec.tau2;
    const auto coeffs = band_coefficients(spec.bands, truth.rho, spec.fs);

    Eigen::MatrixXd sources(q, T);
    for (Eigen::Index l = 0; l < q; ++l) {
      Rng rng = make_rng(spec.rng_seed, {10, r, static_cast<std::uint64_t>(l)});
      sources.row(l) =
          simulate_ar2(coeffs[static_cast<std::size_t>(l)], spec.sigma2, spec.T, rng).transpose();
    }
    Eigen::MatrixXd y = data.truth.mixing * sources;
    if (spec.tau2 > 0.0) {
      Rng rng = make_rng(spec.rng_seed, {11, r});
      std::normal_distribution<double> noise(0.0, std::sqrt(spec.tau2));
      for (Eigen::Index t = 0; t < T; ++t) {
        for (Eigen::Index i = 0; i < p; ++i) {
          y(i, t) += noise(rng);
        }
      }
    }
    data.epochs[r] = EpochSeries{std::move(y), spec.fs};
    data.sources[r] = std::move(sources);
    data.truth.params[r] = std::move(truth);
  });
  return data;
}

/// Mean squared errors in the row layout of the comparison table: one row
/// per band for the companion coefficients, then tau2, then sigma2.
struct MseReport {
  std::vector<std::string> band_names;
  std::vector<double> phi;
  double tau2 = 0.0;
  double sigma2 = 0.0;

  std::vector<std::string> row_labels() const {
    std::vector<std::string> rows;
    for (const auto& n : band_names) {
      rows.push_back("Phi (" + n + " band)");
    }
    rows.emplace_back("tau2");
    rows.emplace_back("sigma2");
    return rows;
  }

  std::vector<double> row_values() const {
    std::vector<double> v = phi;
    v.push_back(tau2);
    v.push_back(sigma2);
    return v;
  }
};

/// Mean of the squared errors of the two free companion entries.
inline double companion_squared_error(Ar2Coeffs estimate, Ar2Coeffs truth) {
  const double d1 = estimate.phi1 - truth.phi1;
  const double d2 = estimate.phi2 - truth.phi2;
  return 0.5 * (d1 * d1 + d2 * d2);
}

/**
 * For each band, the mean over epochs and over the two free companion
 * entries (phi1, phi2) of the squared error; for tau2 and sigma2, the mean
 * over epochs of the squared error. @p estimates holds either one entry per
 * epoch or a single entry compared against every epoch.
 */
inline MseReport mse_report(std::span<const EpochParams> estimates, const GroundTruth& truth,
                            std::span<const BandSpec> bands, double fs) {
  const std::size_t R = truth.params.size();
  if (estimates.size() != R && estimates.size() != 1) {
    throw ShapeError("estimates must cover every epoch or be a single average");
  }
  MseReport rep;
  for (const auto& b : bands) {
    rep.band_names.push_back(b.name);
  }
  rep.phi.assign(bands.size(), 0.0);
  for (std::size_t r = 0; r < R; ++r) {
    const EpochParams& est = estimates.size() == 1 ? estimates[0] : estimates[r];
    const EpochParams& tru = truth.params[r];
    const auto ce = band_coefficients(bands, est.rho, fs);
    const auto ct = band_coefficients(bands, tru.rho, fs);
    for (std::size_t l = 0; l < bands.size(); ++l) {
      rep.phi[l] += companion_squared_error(ce[l], ct[l]);
    }
    rep.tau2 += (est.tau2 - tru.tau2) * (est.tau2 - tru.tau2);
    rep.sigma2 += (est.sigma2 - tru.sigma2) * (est.sigma2 - tru.sigma2);
  }
  for (auto& v : rep.phi) {
    v /= static_cast<double>(R);
  }
  rep.tau2 /= static_cast<double>(R);
  rep.sigma2 /= static_cast<double>(R);
  return rep;
}

}  // namespace essm

#endif  // ESSM_SIMULATION_HPP
