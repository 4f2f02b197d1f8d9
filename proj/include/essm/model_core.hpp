#ifndef ESSM_MODEL_CORE_HPP
#define ESSM_MODEL_CORE_HPP

/** @file
 * Domain types and AR(2) / companion-form mathematics.
 *
 * Each latent source is an AR(2) process
 *   x_t = phi1 x_{t-1} + phi2 x_{t-2} + w_t,
 * parameterised by the polar coordinates of the roots of 1 - phi1 z - phi2 z^2:
 * modulus rho > 1 (causality) and phase psi in (0, pi). The phase pins the
 * source to a frequency band; the modulus controls how concentrated the
 * spectral peak is and is the quantity allowed to evolve across epochs.
 */

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "essm/error.hpp"

namespace essm {

/// Fixed frequency band of one latent source plus the box on its modulus.
struct BandSpec {
  std::string name;
  double center_freq_hz = 0.0;
  double rho_min = 1.0;
  double rho_max = 1.0;

  /// Root phase in radians at sampling rate @p fs.
  double phase(double fs) const {
    if (!(center_freq_hz > 0.0) || !(center_freq_hz < fs / 2.0)) {
      throw DomainError("band '" + name + "': center frequency " + std::to_string(center_freq_hz) +
                        " Hz outside (0, fs/2) for fs=" + std::to_string(fs));
    }
    return 2.0 * std::numbers::pi * center_freq_hz / fs;
  }

  void validate() const {
    if (!(rho_min > 1.0)) {
      throw CausalityError("band '" + name + "': rho_min must exceed 1");
    }
    if (!(rho_min <= rho_max)) {
      throw DomainError("band '" + name + "': rho_min > rho_max");
    }
  }

  void validate(double fs) const {
    validate();
    (void)phase(fs);
  }

  bool contains(double rho) const { return rho >= rho_min && rho <= rho_max; }
  double midpoint() const { return 0.5 * (rho_min + rho_max); }
};

using BandSpecs = std::vector<BandSpec>;

inline void validate_bands(std::span<const BandSpec> bands, double fs) {
  if (bands.empty()) {
    throw ShapeError("at least one band is required");
  }
  for (const auto& b : bands) {
    b.validate(fs);
  }
}

struct Ar2Coeffs {
  double phi1 = 0.0;
  double phi2 = 0.0;
};

struct Polar {
  double modulus = 0.0;
  double phase = 0.0;
};

/// (phi1, phi2) = (2 cos(psi) / rho, -1 / rho^2).
inline Ar2Coeffs ar2_from_polar(double rho, double psi) {
  if (!(rho > 1.0)) {
    throw CausalityError("AR(2) modulus must exceed 1, got " + std::to_string(rho));
  }
  if (!(psi > 0.0) || !(psi < std::numbers::pi)) {
    throw DomainError("AR(2) phase must lie in (0, pi), got " + std::to_string(psi));
  }
  return {2.0 * std::cos(psi) / rho, -1.0 / (rho * rho)};
}

inline Polar polar_from_ar2(Ar2Coeffs c) {
  if (!(c.phi2 < 0.0)) {
    throw DomainError("phi2 must be negative for complex roots");
  }
  if (c.phi1 * c.phi1 + 4.0 * c.phi2 >= 0.0) {
    throw NoOscillationError("AR(2) polynomial has real roots");
  }
  const double rho = 1.0 / std::sqrt(-c.phi2);
  if (!(rho > 1.0)) {
    throw CausalityError("AR(2) roots lie on or inside the unit circle");
  }
  return {rho, std::acos(c.phi1 * rho / 2.0)};
}

/// Roots of 1 - phi1 z - phi2 z^2 (phi2 != 0).
inline std::pair<std::complex<double>, std::complex<double>> ar2_roots(Ar2Coeffs c) {
  if (c.phi2 == 0.0) {
    throw DomainError("phi2 = 0: polynomial is not quadratic");
  }
  // -phi2 z^2 - phi1 z + 1 = 0
  const std::complex<double> a = -c.phi2;
  const std::complex<double> b = -c.phi1;
  const std::complex<double> disc = std::sqrt(b * b - 4.0 * a);
  return {(-b + disc) / (2.0 * a), (-b - disc) / (2.0 * a)};
}

/// Causal iff both roots lie strictly outside the unit circle.
inline bool is_causal(Ar2Coeffs c) {
  // Stationarity triangle of the AR(2) model.
  return c.phi2 + c.phi1 < 1.0 && c.phi2 - c.phi1 < 1.0 && std::abs(c.phi2) < 1.0;
}

/// Spectral density sigma_w2 / |1 - phi1 e^{-2 pi i w} - phi2 e^{-4 pi i w}|^2,
/// with @p omega in cycles per sample.
inline double ar2_spectrum(Ar2Coeffs c, double sigma_w2, double omega) {
  if (!(omega >= -0.5 && omega <= 0.5)) {
    throw DomainError("frequency must lie in [-1/2, 1/2] cycles per sample");
  }
  if (!(sigma_w2 > 0.0)) {
    throw DomainError("innovation variance must be positive");
  }
  const double a = 2.0 * std::numbers::pi * omega;
  const double re = 1.0 - c.phi1 * std::cos(a) - c.phi2 * std::cos(2.0 * a);
  const double im = c.phi1 * std::sin(a) + c.phi2 * std::sin(2.0 * a);
  return sigma_w2 / (re * re + im * im);
}

/// gamma(0) / sigma_w2 of a causal AR(2) process (Yule-Walker).
inline double ar2_variance_gain(Ar2Coeffs c) {
  if (!is_causal(c)) {
    throw CausalityError("variance gain undefined for non-causal AR(2) coefficients");
  }
  const double a = 1.0 - c.phi2;
  return a / ((1.0 + c.phi2) * (a * a - c.phi1 * c.phi1));
}

/// How the state-noise variance is split across sources.
enum class NoiseScaling {
  /// Every source has innovation variance sigma2.
  innovation,
  /// Source l has innovation variance sigma2 / gain_l, so every source has
  /// marginal variance sigma2.
  unit_variance,
};

/// Parameters of one epoch: per-band moduli and the two noise variances.
struct EpochParams {
  Eigen::VectorXd rho;
  double sigma2 = 1.0;
  double tau2 = 1.0;

  std::size_t q() const { return static_cast<std::size_t>(rho.size()); }

  void validate(std::span<const BandSpec> bands) const {
    if (static_cast<std::size_t>(rho.size()) != bands.size()) {
      throw ShapeError("EpochParams has " + std::to_string(rho.size()) + " moduli for " +
                       std::to_string(bands.size()) + " bands");
    }
    for (std::size_t l = 0; l < bands.size(); ++l) {
      if (!bands[l].contains(rho[static_cast<Eigen::Index>(l)])) {
        throw DomainError("rho for band '" + bands[l].name + "' outside its box");
      }
    }
    if (!(sigma2 > 0.0) || !(tau2 > 0.0)) {
      throw DomainError("noise variances must be positive");
    }
  }
};

/// Box midpoints with unit noise variances.
inline EpochParams default_start(std::span<const BandSpec> bands) {
  EpochParams p;
  p.rho.resize(static_cast<Eigen::Index>(bands.size()));
  for (std::size_t l = 0; l < bands.size(); ++l) {
    p.rho[static_cast<Eigen::Index>(l)] = bands[l].midpoint();
  }
  p.sigma2 = 1.0;
  p.tau2 = 1.0;
  return p;
}

/// Start with every modulus near the bottom of its box (sharpest peaks), so
/// that a first filtering pass separates the sources by frequency even under
/// a poor mixing matrix.
inline EpochParams narrowband_start(std::span<const BandSpec> bands, double fraction = 0.05) {
  EpochParams p = default_start(bands);
  for (std::size_t l = 0; l < bands.size(); ++l) {
    p.rho[static_cast<Eigen::Index>(l)] =
        bands[l].rho_min + fraction * (bands[l].rho_max - bands[l].rho_min);
  }
  return p;
}

/// One epoch of observations stored channel-by-time (p x T).
struct EpochSeries {
  Eigen::MatrixXd values;
  double fs = 1.0;

  Eigen::Index p() const { return values.rows(); }
  Eigen::Index T() const { return values.cols(); }
};

/// Nonnegative p x q loading matrix with no all-zero column.
class MixingMatrix {
 public:
  MixingMatrix() = default;

  explicit MixingMatrix(Eigen::MatrixXd entries) : entries_(std::move(entries)) {
    if (entries_.size() == 0) {
      throw ShapeError("mixing matrix must be non-empty");
    }
    if (!entries_.allFinite()) {
      throw DomainError("mixing matrix has non-finite entries");
    }
    if ((entries_.array() < 0.0).any()) {
      throw DomainError("mixing matrix entries must be nonnegative");
    }
    for (Eigen::Index j = 0; j < entries_.cols(); ++j) {
      if ((entries_.col(j).array() == 0.0).all()) {
        throw CollinearityError("mixing matrix column " + std::to_string(j) + " is all zero");
      }
    }
  }

  const Eigen::MatrixXd& matrix() const { return entries_; }
  Eigen::Index p() const { return entries_.rows(); }
  Eigen::Index q() const { return entries_.cols(); }

  /// (M, 0): the p x 2q loading of the companion state.
  Eigen::MatrixXd augmented() const { return augment(entries_); }

  static Eigen::MatrixXd augment(const Eigen::Ref<const Eigen::MatrixXd>& m) {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(m.rows(), 2 * m.cols());
    out.leftCols(m.cols()) = m;
    return out;
  }

 private:
  Eigen::MatrixXd entries_;
};

/// First-order form of q independent AR(2) sources, state X_t = (S_t, S_{t-1}).
struct CompanionSystem {
  Eigen::MatrixXd phi_tilde;          // 2q x 2q
  Eigen::MatrixXd state_noise_embed;  // diag(c_1..c_q, 0), see NoiseScaling
  Eigen::VectorXd phi1;               // diagonal of the first block
  Eigen::VectorXd phi2;               // diagonal of the second block

  Eigen::Index q() const { return phi1.size(); }
  Eigen::Index dim() const { return 2 * phi1.size(); }
};

inline CompanionSystem build_companion(std::span<const Ar2Coeffs> coeffs,
                                       NoiseScaling scaling = NoiseScaling::innovation) {
  const auto q = static_cast<Eigen::Index>(coeffs.size());
  if (q < 1) {
    throw ShapeError("companion system needs at least one source");
  }
  CompanionSystem sys;
  sys.phi1.resize(q);
  sys.phi2.resize(q);
  for (Eigen::Index l = 0; l < q; ++l) {
    const auto& c = coeffs[static_cast<std::size_t>(l)];
    if (!is_causal(c)) {
      throw CausalityError("source " + std::to_string(l) + " has non-causal AR(2) coefficients");
    }
    sys.phi1[l] = c.phi1;
    sys.phi2[l] = c.phi2;
  }
  sys.phi_tilde = Eigen::MatrixXd::Zero(2 * q, 2 * q);
  sys.phi_tilde.topLeftCorner(q, q).diagonal() = sys.phi1;
  sys.phi_tilde.topRightCorner(q, q).diagonal() = sys.phi2;
  sys.phi_tilde.bottomLeftCorner(q, q).setIdentity();
  sys.state_noise_embed = Eigen::MatrixXd::Zero(2 * q, 2 * q);
  for (Eigen::Index l = 0; l < q; ++l) {
    sys.state_noise_embed(l, l) =
        scaling == NoiseScaling::innovation
            ? 1.0
            : 1.0 / ar2_variance_gain(coeffs[static_cast<std::size_t>(l)]);
  }
  return sys;
}

/// AR(2) coefficients of every band given its modulus and the sampling rate.
inline std::vector<Ar2Coeffs> band_coefficients(std::span<const BandSpec> bands,
                                                const Eigen::Ref<const Eigen::VectorXd>& rho,
                                                double fs) {
  if (static_cast<std::size_t>(rho.size()) != bands.size()) {
    throw ShapeError("modulus vector does not match band count");
  }
  std::vector<Ar2Coeffs> out;
  out.reserve(bands.size());
  for (std::size_t l = 0; l < bands.size(); ++l) {
    out.push_back(ar2_from_polar(rho[static_cast<Eigen::Index>(l)], bands[l].phase(fs)));
  }
  return out;
}

/// Epoch-level system. The default scaling makes sigma2 the marginal
/// variance of every source, matching unit-variance standardised sources.
inline CompanionSystem build_companion(std::span<const BandSpec> bands, const EpochParams& params,
                                       double fs,
                                       NoiseScaling scaling = NoiseScaling::unit_variance) {
  const auto coeffs = band_coefficients(bands, params.rho, fs);
  return build_companion(coeffs, scaling);
}

/// Innovation variance of each source under @p scaling.
inline std::vector<double> innovation_variances(std::span<const Ar2Coeffs> coeffs, double sigma2,
                                                NoiseScaling scaling) {
  std::vector<double> out;
  out.reserve(coeffs.size());
  for (const auto& c : coeffs) {
    out.push_back(scaling == NoiseScaling::innovation ? sigma2 : sigma2 / ar2_variance_gain(c));
  }
  return out;
}

/// Theoretical spectra indexed as (epoch, frequency, band).
class EvolutionarySpectrum {
 public:
  EvolutionarySpectrum(std::size_t epochs, std::vector<double> freqs_hz, std::size_t bands)
      : epochs_(epochs),
        bands_(bands),
        freqs_hz_(std::move(freqs_hz)),
        values_(epochs_ * freqs_hz_.size() * bands_, 0.0) {}

  std::size_t epochs() const { return epochs_; }
  std::size_t bands() const { return bands_; }
  const std::vector<double>& freqs_hz() const { return freqs_hz_; }

  double& at(std::size_t r, std::size_t j, std::size_t l) { return values_[index(r, j, l)]; }
  double at(std::size_t r, std::size_t j, std::size_t l) const { return values_[index(r, j, l)]; }

 private:
  std::size_t index(std::size_t r, std::size_t j, std::size_t l) const {
    return (r * freqs_hz_.size() + j) * bands_ + l;
  }

  std::size_t epochs_;
  std::size_t bands_;
  std::vector<double> freqs_hz_;
  std::vector<double> values_;
};

inline EvolutionarySpectrum evolutionary_spectrum(std::span<const EpochParams> params_by_epoch,
                                                  std::span<const BandSpec> bands, double fs,
                                                  std::span<const double> freq_grid_hz,
                                                  NoiseScaling scaling = NoiseScaling::unit_variance) {
  EvolutionarySpectrum out(params_by_epoch.size(),
                           std::vector<double>(freq_grid_hz.begin(), freq_grid_hz.end()),
                           bands.size());
  for (double f : freq_grid_hz) {
    if (!(f > 0.0) || !(f < fs / 2.0)) {
      throw DomainError("spectrum grid frequency " + std::to_string(f) + " outside (0, fs/2)");
    }
  }
  for (std::size_t r = 0; r < params_by_epoch.size(); ++r) {
    const auto& ep = params_by_epoch[r];
    const auto coeffs = band_coefficients(bands, ep.rho, fs);
    const auto noise = innovation_variances(coeffs, ep.sigma2, scaling);
    for (std::size_t j = 0; j < freq_grid_hz.size(); ++j) {
      const double omega = freq_grid_hz[j] / fs;
      for (std::size_t l = 0; l < bands.size(); ++l) {
        out.at(r, j, l) = ar2_spectrum(coeffs[l], noise[l], omega);
      }
    }
  }
  return out;
}

/// Fourier frequencies j/T * fs for j = 1 .. floor(T/2), dropping fs/2 itself.
inline std::vector<double> fourier_grid_hz(std::size_t T, double fs) {
  std::vector<double> grid;
  for (std::size_t j = 1; j <= T / 2; ++j) {
    const double f = static_cast<double>(j) * fs / static_cast<double>(T);
    if (f < fs / 2.0) {
      grid.push_back(f);
    }
  }
  return grid;
}

}  // namespace essm

#endif  // ESSM_MODEL_CORE_HPP
