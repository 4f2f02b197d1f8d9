#ifndef ESSM_DIAGNOSTICS_HPP
#define ESSM_DIAGNOSTICS_HPP

/** @file
 * Residual checks (ACF, PACF, Ljung-Box) and per-band clustering of the
 * channel loadings.
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>
#include <Eigen/Dense>

#include "essm/error.hpp"
#include "essm/kalman.hpp"
#include "essm/model_core.hpp"

namespace essm {

struct ResidualReport {
  std::vector<double> acf;
  std::vector<double> pacf;  // pacf[0] is lag 1
  double ljung_box_stat = 0.0;
  double ljung_box_pvalue = 1.0;
  std::size_t n_lags = 0;
};

struct ClusterResult {
  std::string band;
  /// Cluster label of each channel, labels numbered by first appearance.
  std::vector<std::size_t> assignments;
  /// Height of each merge in order.
  std::vector<double> linkage_heights;
  std::size_t n_clusters = 0;
};

/// Which state estimate the residuals are formed from.
enum class StateEstimate { filtered, smoothed };

/// Y_t - (M, 0) X_t for every t, as a p x T matrix.
inline Eigen::MatrixXd residuals(const EpochSeries& epoch,
                                 const Eigen::Ref<const Eigen::MatrixXd>& mixing,
                                 const EpochParams& params, std::span<const BandSpec> bands,
                                 StateEstimate which = StateEstimate::filtered,
                                 const FilterInit& init = {}) {
  const CompanionSystem sys = build_companion(bands, params, epoch.fs);
  const FilterOutput out =
      kalman_filter(epoch.values, mixing, sys, params.sigma2, params.tau2, init);
  const auto q = static_cast<Eigen::Index>(bands.size());
  if (which == StateEstimate::smoothed) {
    const SmootherOutput sm = rts_smooth(out, sys);
    return epoch.values - mixing * sm.means.topRows(q);
  }
  return epoch.values - mixing * out.filtered_means.topRows(q);
}

/// Sample autocorrelations rho(0..max_lag) with the 1/T autocovariance.
inline std::vector<double> acf(std::span<const double> x, std::size_t max_lag) {
  const std::size_t T = x.size();
  if (max_lag >= T) {
    throw DomainError("max_lag must be smaller than the series length");
  }
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(T);
  auto gamma = [&](std::size_t h) {
    double s = 0.0;
    for (std::size_t t = 0; t + h < T; ++t) {
      s += (x[t + h] - mean) * (x[t] - mean);
    }
    return s / static_cast<double>(T);
  };
  const double g0 = gamma(0);
  if (!(g0 > 0.0)) {
    throw DomainError("autocorrelation undefined for a constant series");
  }
  std::vector<double> out(max_lag + 1);
  out[0] = 1.0;
  for (std::size_t h = 1; h <= max_lag; ++h) {
    out[h] = gamma(h) / g0;
  }
  return out;
}

/// Partial autocorrelations at lags 1..max_lag by the Durbin-Levinson
/// recursion on the sample ACF.
inline std::vector<double> pacf(std::span<const double> x, std::size_t max_lag) {
  if (max_lag < 1 || 2 * max_lag >= x.size()) {
    throw DomainError("pacf needs 1 <= max_lag < T/2");
  }
  const auto r = acf(x, max_lag);
  std::vector<double> out(max_lag);
  std::vector<double> phi(max_lag + 1, 0.0);
  std::vector<double> prev(max_lag + 1, 0.0);
  double v = 1.0;
  for (std::size_t k = 1; k <= max_lag; ++k) {
    double num = r[k];
    for (std::size_t j = 1; j < k; ++j) {
      num -= prev[j] * r[k - j];
    }
    const double kk = num / v;
    phi[k] = kk;
    for (std::size_t j = 1; j < k; ++j) {
      phi[j] = prev[j] - kk * prev[k - j];
    }
    v *= (1.0 - kk * kk);
    out[k - 1] = kk;
    prev = phi;
  }
  return out;
}

struct LjungBox {
  double statistic = 0.0;
  double pvalue = 1.0;
};

/// Q = T(T+2) sum_{h=1}^{n_lags} rho(h)^2 / (T-h), referred to chi-square
/// with n_lags degrees of freedom.
inline LjungBox ljung_box(std::span<const double> x, std::size_t n_lags) {
  const std::size_t T = x.size();
  if (n_lags < 1 || 4 * n_lags >= T) {
    throw DomainError("ljung_box needs 1 <= n_lags < T/4");
  }
  const auto r = acf(x, n_lags);
  const double n = static_cast<double>(T);
  double q = 0.0;
  for (std::size_t h = 1; h <= n_lags; ++h) {
    q += r[h] * r[h] / (n - static_cast<double>(h));
  }
  q *= n * (n + 2.0);
  LjungBox lb;
  lb.statistic = q;
  lb.pvalue = q > 0.0 ? boost::math::gamma_q(0.5 * static_cast<double>(n_lags), 0.5 * q) : 1.0;
  return lb;
}

inline ResidualReport residual_report(std::span<const double> x, std::size_t n_lags) {
  ResidualReport rep;
  rep.n_lags = n_lags;
  rep.acf = acf(x, n_lags);
  rep.pacf = pacf(x, std::min(n_lags, (x.size() - 1) / 2));
  const LjungBox lb = ljung_box(x, n_lags);
  rep.ljung_box_stat = lb.statistic;
  rep.ljung_box_pvalue = lb.pvalue;
  return rep;
}

struct Dendrogram {
  /// Cluster memberships after each merge; state[0] is all singletons.
  std::vector<std::vector<std::size_t>> labels_after_merge;
  std::vector<double> heights;
};

/**
 * Complete-linkage agglomeration of scalar values under absolute
 * difference. Ties go to the pair with the smallest (first, second) cluster
 * representative, so the result is deterministic.
 */
inline Dendrogram complete_linkage(std::span<const double> values) {
  const std::size_t n = values.size();
  Dendrogram d;
  std::vector<std::vector<std::size_t>> clusters(n);
  for (std::size_t i = 0; i < n; ++i) {
    clusters[i] = {i};
  }
  auto labels = [&] {
    std::vector<std::size_t> lab(n, 0);
    std::vector<std::pair<std::size_t, std::size_t>> firsts;
    for (std::size_t c = 0; c < clusters.size(); ++c) {
      firsts.emplace_back(*std::min_element(clusters[c].begin(), clusters[c].end()), c);
    }
    std::sort(firsts.begin(), firsts.end());
    for (std::size_t k = 0; k < firsts.size(); ++k) {
      for (auto member : clusters[firsts[k].second]) {
        lab[member] = k;
      }
    }
    return lab;
  };
  auto diameter = [&](const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
    double m = 0.0;
    for (auto i : a) {
      for (auto j : b) {
        m = std::max(m, std::abs(values[i] - values[j]));
      }
    }
    return m;
  };
  d.labels_after_merge.push_back(labels());
  while (clusters.size() > 1) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t bi = 0;
    std::size_t bj = 1;
    for (std::size_t i = 0; i < clusters.size(); ++i) {
      for (std::size_t j = i + 1; j < clusters.size(); ++j) {
        const double h = diameter(clusters[i], clusters[j]);
        if (h < best) {
          best = h;
          bi = i;
          bj = j;
        }
      }
    }
    clusters[bi].insert(clusters[bi].end(), clusters[bj].begin(), clusters[bj].end());
    std::sort(clusters[bi].begin(), clusters[bi].end());
    clusters.erase(clusters.begin() + static_cast<std::ptrdiff_t>(bj));
    // Keep clusters ordered by smallest member for the tie rule.
    std::sort(clusters.begin(), clusters.end(),
              [](const auto& a, const auto& b) { return a.front() < b.front(); });
    d.heights.push_back(best);
    d.labels_after_merge.push_back(labels());
  }
  return d;
}

/// Cluster count at the largest gap between consecutive merge heights,
/// counting the gap between 0 and the first merge.
inline std::size_t largest_gap_k(std::span<const double> heights) {
  const std::size_t n = heights.size() + 1;
  if (n == 1) {
    return 1;
  }
  std::size_t best_k = n;
  double best_gap = -1.0;
  double prev = 0.0;
  for (std::size_t i = 0; i < heights.size(); ++i) {
    const double gap = heights[i] - prev;
    if (gap > best_gap) {
      best_gap = gap;
      best_k = n - i;
    }
    prev = heights[i];
  }
  return best_k;
}

/// Clusters the channel loadings of one band into @p k groups; k = 0 picks
/// the count at the largest linkage gap.
inline ClusterResult cluster_mixing(const MixingMatrix& mixing, std::size_t band, std::size_t k,
                                    const std::string& band_name = {}) {
  if (band >= static_cast<std::size_t>(mixing.q())) {
    throw DomainError("band index out of range");
  }
  const auto p = static_cast<std::size_t>(mixing.p());
  if (k > p) {
    throw DomainError("cluster count exceeds channel count");
  }
  std::vector<double> loadings(p);
  for (std::size_t i = 0; i < p; ++i) {
    loadings[i] = mixing.matrix()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(band));
  }
  const Dendrogram d = complete_linkage(loadings);
  if (k == 0) {
    k = largest_gap_k(d.heights);
  }
  ClusterResult res;
  res.band = band_name.empty() ? std::to_string(band) : band_name;
  res.linkage_heights = d.heights;
  res.assignments = d.labels_after_merge[p - k];
  res.n_clusters = k;
  return res;
}

}  // namespace essm

#endif  // ESSM_DIAGNOSTICS_HPP
