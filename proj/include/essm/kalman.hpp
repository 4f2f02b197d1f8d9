#ifndef ESSM_KALMAN_HPP
#define ESSM_KALMAN_HPP

/** @file
 * Kalman filter, innovations likelihood and fixed-interval smoother for the
 * companion-form source model
 *   Y_t = (M, 0) X_t + e_t,      e_t ~ N(0, tau2 I_p)
 *   X_t = Phi X_{t-1} + eta_t,   eta_t ~ N(0, sigma2 diag(c, 0)),
 * where c is the per-source noise embedding of the CompanionSystem.
 */

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "essm/error.hpp"
#include "essm/model_core.hpp"

namespace essm {

struct FilterInit {
  Eigen::VectorXd x0;
  Eigen::MatrixXd p0;

  /// Zero mean, identity covariance.
  static FilterInit standard(Eigen::Index state_dim) {
    return {Eigen::VectorXd::Zero(state_dim), Eigen::MatrixXd::Identity(state_dim, state_dim)};
  }
};

/// Per-step filter quantities; index t = 0 .. T-1 corresponds to time t+1.
struct FilterOutput {
  Eigen::MatrixXd predicted_means;  // 2q x T
  Eigen::MatrixXd filtered_means;   // 2q x T
  std::vector<Eigen::MatrixXd> predicted_covs;
  std::vector<Eigen::MatrixXd> filtered_covs;
  std::vector<Eigen::MatrixXd> gains;  // 2q x p
  Eigen::MatrixXd innovations;         // p x T
  std::vector<Eigen::MatrixXd> innovation_covs;
  double neg_loglik = 0.0;

  Eigen::Index T() const { return predicted_means.cols(); }
};

struct SmootherOutput {
  Eigen::MatrixXd means;  // 2q x T
  std::vector<Eigen::MatrixXd> covs;
};

namespace detail {

inline void symmetrize(Eigen::MatrixXd& m) { m = 0.5 * (m + m.transpose()).eval(); }

inline FilterInit resolve_init(const FilterInit& init, Eigen::Index dim) {
  if (init.x0.size() == 0 && init.p0.size() == 0) {
    return FilterInit::standard(dim);
  }
  if (init.x0.size() != dim || init.p0.rows() != dim || init.p0.cols() != dim) {
    throw ShapeError("filter initialisation has wrong state dimension");
  }
  return init;
}

inline void check_shapes(const Eigen::Ref<const Eigen::MatrixXd>& y,
                         const Eigen::Ref<const Eigen::MatrixXd>& mixing,
                         const CompanionSystem& sys) {
  if (mixing.rows() != y.rows()) {
    throw ShapeError("mixing has " + std::to_string(mixing.rows()) + " rows for " +
                     std::to_string(y.rows()) + " channels");
  }
  if (mixing.cols() != sys.q()) {
    throw ShapeError("mixing has " + std::to_string(mixing.cols()) + " columns for " +
                     std::to_string(sys.q()) + " sources");
  }
  if (y.cols() < 1) {
    throw ShapeError("epoch has no samples");
  }
}

}  // namespace detail

/// Full filter pass recording every intermediate quantity.
inline FilterOutput kalman_filter(const Eigen::Ref<const Eigen::MatrixXd>& y,
                                  const Eigen::Ref<const Eigen::MatrixXd>& mixing,
                                  const CompanionSystem& sys, double sigma2, double tau2,
                                  const FilterInit& init = {}) {
  detail::check_shapes(y, mixing, sys);
  const Eigen::Index p = y.rows();
  const Eigen::Index T = y.cols();
  const Eigen::Index n = sys.dim();
  const FilterInit start = detail::resolve_init(init, n);
  const Eigen::MatrixXd H = MixingMatrix::augment(mixing);
  const Eigen::MatrixXd& Phi = sys.phi_tilde;
  const Eigen::MatrixXd Q = sigma2 * sys.state_noise_embed;
  const Eigen::MatrixXd obs_noise = tau2 * Eigen::MatrixXd::Identity(p, p);

  FilterOutput out;
  out.predicted_means.resize(n, T);
  out.filtered_means.resize(n, T);
  out.innovations.resize(p, T);
  out.predicted_covs.reserve(static_cast<std::size_t>(T));
  out.filtered_covs.reserve(static_cast<std::size_t>(T));
  out.gains.reserve(static_cast<std::size_t>(T));
  out.innovation_covs.reserve(static_cast<std::size_t>(T));

  Eigen::VectorXd x = start.x0;
  Eigen::MatrixXd P = start.p0;
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
  double nll = 0.0;

  for (Eigen::Index t = 0; t < T; ++t) {
    Eigen::VectorXd x_pred = Phi * x;
    Eigen::MatrixXd P_pred = Phi * P * Phi.transpose() + Q;
    detail::symmetrize(P_pred);

    Eigen::MatrixXd S = H * P_pred * H.transpose() + obs_noise;
    detail::symmetrize(S);
    Eigen::LLT<Eigen::MatrixXd> llt(S);
    if (llt.info() != Eigen::Success || !S.allFinite()) {
      throw ConditioningError("innovation covariance is not positive definite",
                              static_cast<std::size_t>(t + 1));
    }
    Eigen::VectorXd eps = y.col(t) - H * x_pred;
    Eigen::MatrixXd K = llt.solve(H * P_pred).transpose();

    x = x_pred + K * eps;
    P = (I - K * H) * P_pred;
    detail::symmetrize(P);

    const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    const double quad = eps.dot(llt.solve(eps));
    nll += 0.5 * (logdet + quad);

    out.predicted_means.col(t) = x_pred;
    out.filtered_means.col(t) = x;
    out.innovations.col(t) = eps;
    out.predicted_covs.push_back(std::move(P_pred));
    out.filtered_covs.push_back(P);
    out.gains.push_back(std::move(K));
    out.innovation_covs.push_back(std::move(S));
  }
  out.neg_loglik = nll;
  return out;
}

inline FilterOutput kalman_filter(const EpochSeries& epoch,
                                  const Eigen::Ref<const Eigen::MatrixXd>& mixing,
                                  const EpochParams& params, std::span<const BandSpec> bands,
                                  const FilterInit& init = {}) {
  if (epoch.T() < 2) {
    throw ShapeError("epoch needs at least two samples");
  }
  if (params.q() != bands.size()) {
    throw ShapeError("parameter/band count mismatch");
  }
  const CompanionSystem sys = build_companion(bands, params, epoch.fs);
  return kalman_filter(epoch.values, mixing, sys, params.sigma2, params.tau2, init);
}

/// 0.5 * sum_t (log|Sigma_t| + eps_t' Sigma_t^{-1} eps_t), recomputed from the
/// stored innovations.
inline double neg_loglik(const FilterOutput& out) {
  double total = 0.0;
  for (Eigen::Index t = 0; t < out.T(); ++t) {
    const auto& S = out.innovation_covs[static_cast<std::size_t>(t)];
    Eigen::LLT<Eigen::MatrixXd> llt(S);
    if (llt.info() != Eigen::Success) {
      throw ConditioningError("innovation covariance is not positive definite",
                              static_cast<std::size_t>(t + 1));
    }
    const Eigen::VectorXd eps = out.innovations.col(t);
    const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    total += 0.5 * (logdet + eps.dot(llt.solve(eps)));
  }
  return total;
}

/// Rauch-Tung-Striebel backward pass over a stored filter run.
inline SmootherOutput rts_smooth(const FilterOutput& out, const CompanionSystem& sys) {
  const Eigen::Index T = out.T();
  SmootherOutput sm;
  sm.means = out.filtered_means;
  sm.covs = out.filtered_covs;
  const Eigen::MatrixXd& Phi = sys.phi_tilde;
  if (Phi.rows() != out.filtered_means.rows()) {
    throw ShapeError("companion system does not match filter state dimension");
  }
  for (Eigen::Index t = T - 2; t >= 0; --t) {
    const auto& P_next_pred = out.predicted_covs[static_cast<std::size_t>(t + 1)];
    const auto& P_filt = out.filtered_covs[static_cast<std::size_t>(t)];
    Eigen::LLT<Eigen::MatrixXd> llt(P_next_pred);
    if (llt.info() != Eigen::Success) {
      throw ConditioningError("predicted covariance is singular in smoother",
                              static_cast<std::size_t>(t + 2));
    }
    // J = P_t^t Phi' (P_{t+1}^t)^{-1}
    const Eigen::MatrixXd J = llt.solve(Phi * P_filt).transpose();
    sm.means.col(t) = out.filtered_means.col(t) +
                      J * (sm.means.col(t + 1) - out.predicted_means.col(t + 1));
    Eigen::MatrixXd P = P_filt + J * (sm.covs[static_cast<std::size_t>(t + 1)] - P_next_pred) *
                                     J.transpose();
    detail::symmetrize(P);
    sm.covs[static_cast<std::size_t>(t)] = std::move(P);
  }
  return sm;
}

/**
 * Innovations negative log-likelihood of one epoch under a fixed mixing
 * matrix, evaluated without storing the filter trajectory.
 *
 * The observation noise is isotropic, so when the mixing matrix has full
 * column rank the channels split into the q-dimensional column space of M
 * (M = QR) and its orthogonal complement, which carries pure noise. The
 * filter then runs on Q'Y_t with loading (R, 0), and the complement adds
 * T(p-q)/2 log tau2 + |(I-QQ')Y|^2 / (2 tau2). Once the predicted covariance
 * stops changing (relative change below steady_tol) the gain is frozen and
 * only the mean recursion continues. The value agrees with
 * kalman_filter(...).neg_loglik to rounding.
 */
class InnovationsLikelihood {
 public:
  InnovationsLikelihood(const EpochSeries& epoch, const Eigen::Ref<const Eigen::MatrixXd>& mixing,
                        FilterInit init = {}, double steady_tol = 1e-13)
      : y_(epoch.values), mixing_(mixing), fs_(epoch.fs), init_(std::move(init)),
        steady_tol_(steady_tol) {
    if (mixing_.rows() != y_.rows()) {
      throw ShapeError("mixing/channel count mismatch");
    }
    const Eigen::Index p = mixing_.rows();
    const Eigen::Index q = mixing_.cols();
    if (p > q) {
      Eigen::ColPivHouseholderQR<Eigen::MatrixXd> rank_check(mixing_);
      if (rank_check.rank() == q) {
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(mixing_);
        const Eigen::MatrixXd Qthin = qr.householderQ() * Eigen::MatrixXd::Identity(p, q);
        reduced_loading_ = Qthin.transpose() * mixing_;
        reduced_obs_ = Qthin.transpose() * y_;
        residual_ss_ = (y_ - Qthin * reduced_obs_).squaredNorm();
        reduced_ = true;
      }
    }
  }

  bool reduced() const { return reduced_; }

  double operator()(const EpochParams& params, std::span<const BandSpec> bands) const {
    const CompanionSystem sys = build_companion(bands, params, fs_);
    return (*this)(sys, params.sigma2, params.tau2);
  }

  double operator()(const CompanionSystem& sys, double sigma2, double tau2) const {
    if (sys.q() != mixing_.cols()) {
      throw ShapeError("companion system does not match mixing columns");
    }
    if (!reduced_) {
      return kalman_filter(y_, mixing_, sys, sigma2, tau2, init_).neg_loglik;
    }
    const Eigen::Index p = mixing_.rows();
    const Eigen::Index q = mixing_.cols();
    const double T = static_cast<double>(y_.cols());
    return reduced_nll(sys, sigma2, tau2) +
           0.5 * (T * static_cast<double>(p - q) * std::log(tau2) + residual_ss_ / tau2);
  }

 private:
  double reduced_nll(const CompanionSystem& sys, double sigma2, double tau2) const {
    const Eigen::Index q = sys.q();
    const Eigen::Index n = sys.dim();
    const Eigen::Index T = reduced_obs_.cols();
    const FilterInit start = detail::resolve_init(init_, n);
    const Eigen::MatrixXd& Phi = sys.phi_tilde;
    const Eigen::MatrixXd& R = reduced_loading_;  // loading on S_t only

    Eigen::VectorXd x = start.x0;
    Eigen::MatrixXd P = start.p0;
    Eigen::MatrixXd P_pred(n, n), P_pred_prev(n, n), S(q, q), K(n, q), RP(q, n);
    Eigen::VectorXd x_pred(n), eps(q), w(q);
    Eigen::LLT<Eigen::MatrixXd> llt(q);
    double nll = 0.0;
    double logdet = 0.0;
    bool frozen = false;

    for (Eigen::Index t = 0; t < T; ++t) {
      x_pred.noalias() = Phi * x;
      if (!frozen) {
        P_pred.noalias() = Phi * P * Phi.transpose();
        P_pred.topLeftCorner(q, q).diagonal() += sigma2 * sys.state_noise_embed.diagonal().head(q);
        detail::symmetrize(P_pred);
        if (t > 0) {
          const double scale = P_pred.cwiseAbs().maxCoeff();
          const double change = (P_pred - P_pred_prev).cwiseAbs().maxCoeff();
          frozen = change <= steady_tol_ * scale;
        }
        P_pred_prev = P_pred;

        RP.noalias() = R * P_pred.topRows(q);
        S.noalias() = RP.leftCols(q) * R.transpose();
        S.diagonal().array() += tau2;
        detail::symmetrize(S);
        llt.compute(S);
        if (llt.info() != Eigen::Success || !S.allFinite()) {
          throw ConditioningError("innovation covariance is not positive definite",
                                  static_cast<std::size_t>(t + 1));
        }
        K = llt.solve(RP).transpose();
        P = P_pred;
        P.noalias() -= K * RP;
        detail::symmetrize(P);
        logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
      }
      eps = reduced_obs_.col(t);
      eps.noalias() -= R * x_pred.head(q);
      w = llt.matrixL().solve(eps);
      nll += 0.5 * (logdet + w.squaredNorm());
      x = x_pred;
      x.noalias() += K * eps;
    }
    return nll;
  }

  Eigen::MatrixXd y_;
  Eigen::MatrixXd mixing_;
  double fs_;
  FilterInit init_;
  double steady_tol_;
  bool reduced_ = false;
  Eigen::MatrixXd reduced_loading_;
  Eigen::MatrixXd reduced_obs_;
  double residual_ss_ = 0.0;
};

}  // namespace essm

#endif  // ESSM_KALMAN_HPP
