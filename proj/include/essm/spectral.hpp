#ifndef ESSM_SPECTRAL_HPP
#define ESSM_SPECTRAL_HPP

/** @file
 * Periodograms and their phase summaries.
 */

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include "essm/error.hpp"

namespace essm {

inline constexpr double kLogFloor = 1e-300;

struct Periodogram {
  std::vector<double> freqs_hz;
  std::vector<double> power;
  std::size_t T = 0;
  double fs = 1.0;
};

/// |DFT|^2 / T of the demeaned series at the Fourier frequencies
/// j = 0 .. T-1 (two-sided, unnormalised frequency index).
inline std::vector<double> full_periodogram(std::span<const double> x) {
  const std::size_t T = x.size();
  double mean = 0.0;
  for (double v : x) {
    mean += v;
  }
  mean /= static_cast<double>(T);
  std::vector<double> centered(T);
  for (std::size_t t = 0; t < T; ++t) {
    centered[t] = x[t] - mean;
  }
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> spec;
  fft.fwd(spec, centered);
  std::vector<double> out(T);
  for (std::size_t j = 0; j < T; ++j) {
    out[j] = std::norm(spec[j]) / static_cast<double>(T);
  }
  // The real-input transform returns only half the spectrum for some
  // backends; rebuild the rest by conjugate symmetry.
  if (spec.size() < T) {
    for (std::size_t j = spec.size(); j < T; ++j) {
      out[j] = out[T - j];
    }
  }
  return out;
}

/// One-sided periodogram I(j/T) for j = 1 .. floor(T/2).
inline Periodogram periodogram(std::span<const double> x, double fs) {
  const std::size_t T = x.size();
  if (T < 4) {
    throw LengthError("periodogram needs at least 4 samples, got " + std::to_string(T));
  }
  const auto full = full_periodogram(x);
  Periodogram pg;
  pg.T = T;
  pg.fs = fs;
  for (std::size_t j = 1; j <= T / 2; ++j) {
    pg.freqs_hz.push_back(static_cast<double>(j) * fs / static_cast<double>(T));
    pg.power.push_back(full[j]);
  }
  return pg;
}

inline Periodogram periodogram(const Eigen::Ref<const Eigen::VectorXd>& x, double fs) {
  std::vector<double> v(x.data(), x.data() + x.size());
  return periodogram(std::span<const double>(v), fs);
}

/// Sum of the ordinates over all T Fourier frequencies, reconstructed from
/// the one-sided ordinates (the zero frequency vanishes after demeaning).
inline double two_sided_total(const Periodogram& pg) {
  double total = 0.0;
  for (std::size_t k = 0; k < pg.power.size(); ++k) {
    const std::size_t j = k + 1;
    const bool nyquist = (pg.T % 2 == 0) && j == pg.T / 2;
    total += nyquist ? pg.power[k] : 2.0 * pg.power[k];
  }
  return total;
}

inline std::vector<double> log_power(const Periodogram& pg) {
  std::vector<double> out(pg.power.size());
  std::transform(pg.power.begin(), pg.power.end(), out.begin(),
                 [](double v) { return std::log(std::max(v, kLogFloor)); });
  return out;
}

/// Centred moving average of width @p width (odd), truncated at the ends.
inline std::vector<double> smooth(std::span<const double> power, std::size_t width) {
  if (width % 2 == 0) {
    throw DomainError("smoothing width must be odd");
  }
  const std::size_t n = power.size();
  const std::size_t half = width / 2;
  std::vector<double> out(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t lo = j >= half ? j - half : 0;
    const std::size_t hi = std::min(n - 1, j + half);
    double s = 0.0;
    for (std::size_t k = lo; k <= hi; ++k) {
      s += power[k];
    }
    out[j] = s / static_cast<double>(hi - lo + 1);
  }
  return out;
}

/// Inclusive 1-based epoch range.
struct EpochRange {
  std::size_t first = 1;
  std::size_t last = 1;
};

/// Parses "1-80,81-160,161-247"; a bare number is a one-epoch phase.
inline std::vector<EpochRange> parse_phases(const std::string& text) {
  std::vector<EpochRange> phases;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = text.find(',', pos);
    const std::string item =
        text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    if (item.empty()) {
      throw PartitionError("empty phase in '" + text + "'");
    }
    try {
      const std::size_t dash = item.find('-');
      EpochRange r;
      if (dash == std::string::npos) {
        r.first = r.last = std::stoul(item);
      } else {
        r.first = std::stoul(item.substr(0, dash));
        r.last = std::stoul(item.substr(dash + 1));
      }
      phases.push_back(r);
    } catch (const std::logic_error&) {
      throw PartitionError("cannot parse phase '" + item + "'");
    }
    if (comma == std::string::npos) {
      break;
    }
    pos = comma + 1;
  }
  return phases;
}

inline void validate_partition(std::span<const EpochRange> phases, std::size_t R) {
  std::size_t expected = 1;
  for (const auto& ph : phases) {
    if (ph.last < ph.first) {
      throw PartitionError("empty phase " + std::to_string(ph.first) + "-" +
                           std::to_string(ph.last));
    }
    if (ph.first != expected) {
      throw PartitionError("phases must cover epochs 1.." + std::to_string(R) +
                           " contiguously without overlap");
    }
    expected = ph.last + 1;
  }
  if (expected != R + 1) {
    throw PartitionError("phases must cover epochs 1.." + std::to_string(R));
  }
}

/// Entrywise mean of the ordinates within each phase; rows are phases.
inline std::vector<std::vector<double>> phase_average(std::span<const Periodogram> periodograms,
                                                      std::span<const EpochRange> phases) {
  validate_partition(phases, periodograms.size());
  const std::size_t n = periodograms.front().power.size();
  std::vector<std::vector<double>> out;
  for (const auto& ph : phases) {
    std::vector<double> avg(n, 0.0);
    for (std::size_t r = ph.first; r <= ph.last; ++r) {
      const auto& pw = periodograms[r - 1].power;
      if (pw.size() != n) {
        throw ShapeError("periodograms differ in length");
      }
      for (std::size_t j = 0; j < n; ++j) {
        avg[j] += pw[j];
      }
    }
    const double count = static_cast<double>(ph.last - ph.first + 1);
    for (double& v : avg) {
      v /= count;
    }
    out.push_back(std::move(avg));
  }
  return out;
}

struct RelativePeriodogram {
  std::vector<std::vector<double>> values;  // phase x frequency
  /// Frequencies where every phase had zero power; those columns are uniform.
  std::vector<std::size_t> flagged;
};

inline RelativePeriodogram relative_periodogram(const std::vector<std::vector<double>>& per_phase) {
  if (per_phase.empty()) {
    throw PartitionError("no phases to normalise");
  }
  const std::size_t n = per_phase.front().size();
  const double k = static_cast<double>(per_phase.size());
  RelativePeriodogram rel;
  rel.values.assign(per_phase.size(), std::vector<double>(n, 0.0));
  for (std::size_t j = 0; j < n; ++j) {
    double total = 0.0;
    for (const auto& ph : per_phase) {
      total += ph.at(j);
    }
    if (!(total > 0.0)) {
      rel.flagged.push_back(j);
      for (auto& row : rel.values) {
        row[j] = 1.0 / k;
      }
      continue;
    }
    for (std::size_t i = 0; i < per_phase.size(); ++i) {
      rel.values[i][j] = per_phase[i][j] / total;
    }
  }
  return rel;
}

}  // namespace essm

#endif  // ESSM_SPECTRAL_HPP
