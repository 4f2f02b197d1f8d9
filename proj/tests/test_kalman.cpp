#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "essm/kalman.hpp"
#include "essm/model_core.hpp"
#include "essm/random.hpp"
#include "oracles.hpp"

using namespace essm;

namespace {

struct Instance {
  CompanionSystem sys;
  Eigen::MatrixXd mixing;
  Eigen::MatrixXd y;
  double sigma2;
  double tau2;
  FilterInit init;
};

Instance random_instance(std::uint64_t seed, int p, int q, int T, NoiseScaling scaling) {
  std::mt19937_64 rng(seed);
  std::vector<Ar2Coeffs> c;
  for (int l = 0; l < q; ++l) {
    c.push_back(oracle::random_oscillator(rng));
  }
  Instance in;
  in.sys = build_companion(c, scaling);
  std::uniform_real_distribution<double> u(0.1, 1.0);
  std::normal_distribution<double> z(0.0, 1.0);
  in.mixing.resize(p, q);
  for (int i = 0; i < p; ++i) {
    for (int j = 0; j < q; ++j) {
      in.mixing(i, j) = u(rng);
    }
  }
  in.y.resize(p, T);
  for (int i = 0; i < p; ++i) {
    for (int t = 0; t < T; ++t) {
      in.y(i, t) = 2.0 * z(rng);
    }
  }
  in.sigma2 = 0.2 + u(rng);
  in.tau2 = 0.2 + u(rng);
  const int n = 2 * q;
  in.init.x0 = Eigen::VectorXd::NullaryExpr(n, [&] { return z(rng); });
  Eigen::MatrixXd A = Eigen::MatrixXd::NullaryExpr(n, n, [&] { return z(rng); });
  in.init.p0 = A * A.transpose() + Eigen::MatrixXd::Identity(n, n);
  return in;
}

oracle::JointGaussian joint(const Instance& in) {
  const Eigen::Index p = in.mixing.rows();
  return oracle::joint_gaussian(in.sys.phi_tilde, in.sigma2 * in.sys.state_noise_embed,
                                MixingMatrix::augment(in.mixing),
                                in.tau2 * Eigen::MatrixXd::Identity(p, p), in.init.x0, in.init.p0,
                                static_cast<int>(in.y.cols()));
}

}  // namespace

TEST(KalmanFilter, MatchesJointGaussianDensity) {
  const Instance in = random_instance(1, 2, 1, 4, NoiseScaling::innovation);
  const FilterOutput out = kalman_filter(in.y, in.mixing, in.sys, in.sigma2, in.tau2, in.init);
  const auto g = joint(in);
  const double ref = oracle::gaussian_nll(oracle::stack_columns(in.y), g.y_mean, g.y_cov);
  EXPECT_NEAR(out.neg_loglik / ref, 1.0, 1e-8);
  EXPECT_NEAR(neg_loglik(out) / ref, 1.0, 1e-12);
}

TEST(KalmanFilter, MatchesJointGaussianAcrossShapes) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const int p = 1 + static_cast<int>(s % 3);
    const int q = 1 + static_cast<int>(s % 2);
    const int T = 2 + static_cast<int>(s % 5);
    const Instance in = random_instance(100 + s, p, q, T, NoiseScaling::unit_variance);
    const FilterOutput out = kalman_filter(in.y, in.mixing, in.sys, in.sigma2, in.tau2, in.init);
    const auto g = joint(in);
    const double ref = oracle::gaussian_nll(oracle::stack_columns(in.y), g.y_mean, g.y_cov);
    EXPECT_NEAR(out.neg_loglik, ref, 1e-8 * std::abs(ref)) << "seed " << s;
  }
}

TEST(KalmanFilter, ZeroStateDegenerateCase) {
  Instance in = random_instance(2, 3, 2, 5, NoiseScaling::innovation);
  in.init.x0.setZero();
  in.init.p0.setZero();
  const FilterOutput out = kalman_filter(in.y, in.mixing, in.sys, 0.0, in.tau2, in.init);
  EXPECT_TRUE(out.predicted_means.isZero());
  EXPECT_TRUE(out.innovations.isApprox(in.y));
  for (const auto& S : out.innovation_covs) {
    EXPECT_TRUE(S.isApprox(in.tau2 * Eigen::MatrixXd::Identity(3, 3)));
  }
}

TEST(KalmanFilter, ScalarRiccatiFixedPoint) {
  // One source seen through one channel: after a long run the predicted
  // covariance sits at the fixed point of the Riccati map.
  const std::vector<Ar2Coeffs> c{{0.6, -0.3}};
  const CompanionSystem sys = build_companion(c);
  const Eigen::MatrixXd M = Eigen::MatrixXd::Ones(1, 1);
  const double s2 = 0.8;
  const double t2 = 0.5;
  const Eigen::MatrixXd y = Eigen::MatrixXd::Zero(1, 400);
  const FilterOutput out = kalman_filter(y, M, sys, s2, t2);

  // Fixed point of P = F (P - P H'(H P H' + R)^{-1} H P) F' + Q by iteration.
  const Eigen::MatrixXd F = sys.phi_tilde;
  const Eigen::MatrixXd Q = s2 * sys.state_noise_embed;
  Eigen::RowVector2d H(1.0, 0.0);
  Eigen::MatrixXd P = Eigen::MatrixXd::Identity(2, 2);
  for (int k = 0; k < 5000; ++k) {
    const double S = (H * P * H.transpose())(0, 0) + t2;
    const Eigen::MatrixXd filt = P - P * H.transpose() * H * P / S;
    P = F * filt * F.transpose() + Q;
  }
  EXPECT_TRUE(out.predicted_covs.back().isApprox(P, 1e-10));
}

TEST(KalmanFilter, RejectsShapeMismatch) {
  const Instance in = random_instance(3, 3, 2, 5, NoiseScaling::innovation);
  EXPECT_THROW(kalman_filter(in.y.topRows(2), in.mixing, in.sys, 1.0, 1.0), ShapeError);
  EXPECT_THROW(kalman_filter(in.y, in.mixing.leftCols(1), in.sys, 1.0, 1.0), ShapeError);
}

TEST(KalmanFilter, ConditioningFailureNamesStep) {
  const Instance in = random_instance(4, 2, 1, 5, NoiseScaling::innovation);
  FilterInit zero{Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Zero(2, 2)};
  try {
    kalman_filter(in.y, in.mixing, in.sys, 0.0, 0.0, zero);
    FAIL() << "expected ConditioningError";
  } catch (const ConditioningError& e) {
    EXPECT_EQ(e.step(), 1u);
  }
}

TEST(NegLoglik, TrivialCases) {
  FilterOutput out;
  out.predicted_means = Eigen::MatrixXd::Zero(2, 3);
  out.innovations = Eigen::MatrixXd::Zero(2, 3);
  out.innovation_covs.assign(3, Eigen::MatrixXd::Identity(2, 2));
  EXPECT_DOUBLE_EQ(neg_loglik(out), 0.0);
  out.innovations << 1.0, 2.0, 0.0, -1.0, 0.5, 3.0;
  EXPECT_DOUBLE_EQ(neg_loglik(out), 0.5 * out.innovations.squaredNorm());
}

TEST(RtsSmooth, SingleStepEqualsFiltered) {
  const Instance in = random_instance(5, 2, 2, 1, NoiseScaling::innovation);
  const FilterOutput out = kalman_filter(in.y, in.mixing, in.sys, in.sigma2, in.tau2, in.init);
  const SmootherOutput sm = rts_smooth(out, in.sys);
  EXPECT_TRUE(sm.means.isApprox(out.filtered_means));
  EXPECT_TRUE(sm.covs[0].isApprox(out.filtered_covs[0]));
}

TEST(RtsSmooth, NoiselessDynamicsAreExact) {
  const Instance in = random_instance(6, 3, 2, 12, NoiseScaling::innovation);
  const FilterOutput out = kalman_filter(in.y, in.mixing, in.sys, 0.0, in.tau2, in.init);
  const SmootherOutput sm = rts_smooth(out, in.sys);
  for (Eigen::Index t = 1; t < sm.means.cols(); ++t) {
    const Eigen::VectorXd step = in.sys.phi_tilde * sm.means.col(t - 1);
    EXPECT_LT((sm.means.col(t) - step).norm(), 1e-8 * (1.0 + step.norm()));
  }
}

TEST(RtsSmooth, MatchesJointGaussianConditionalMean) {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const Instance in = random_instance(200 + s, 2, 2, 5, NoiseScaling::unit_variance);
    const FilterOutput out =
        kalman_filter(in.y, in.mixing, in.sys, in.sigma2, in.tau2, in.init);
    const SmootherOutput sm = rts_smooth(out, in.sys);
    const auto g = joint(in);
    const Eigen::MatrixXd ref = oracle::conditional_state_mean(g, in.y, 4);
    EXPECT_LT((sm.means - ref).cwiseAbs().maxCoeff(), 1e-8 * (1.0 + ref.cwiseAbs().maxCoeff()));
  }
}

TEST(InnovationsLikelihood, ReducedFormMatchesFullFilter) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const Instance in = random_instance(300 + s, 6, 2, 60, NoiseScaling::unit_variance);
    const EpochSeries epoch{in.y, 1000.0};
    const InnovationsLikelihood lik(epoch, in.mixing, in.init);
    EXPECT_TRUE(lik.reduced());
    const double full =
        kalman_filter(in.y, in.mixing, in.sys, in.sigma2, in.tau2, in.init).neg_loglik;
    EXPECT_NEAR(lik(in.sys, in.sigma2, in.tau2), full, 1e-9 * std::abs(full));
  }
}

TEST(InnovationsLikelihood, FallsBackWhenNotReducible) {
  const Instance in = random_instance(7, 2, 2, 30, NoiseScaling::innovation);
  const EpochSeries epoch{in.y, 1000.0};
  const InnovationsLikelihood lik(epoch, in.mixing);
  EXPECT_FALSE(lik.reduced());
  const double full = kalman_filter(in.y, in.mixing, in.sys, in.sigma2, in.tau2).neg_loglik;
  EXPECT_DOUBLE_EQ(lik(in.sys, in.sigma2, in.tau2), full);
}

TEST(InnovationsLikelihood, SteadyStateFreezeIsAccurateOnLongRuns) {
  const Instance in = random_instance(8, 10, 3, 2000, NoiseScaling::unit_variance);
  const EpochSeries epoch{in.y, 1000.0};
  const InnovationsLikelihood lik(epoch, in.mixing);
  const double full = kalman_filter(in.y, in.mixing, in.sys, in.sigma2, in.tau2).neg_loglik;
  EXPECT_NEAR(lik(in.sys, in.sigma2, in.tau2), full, 1e-8 * std::abs(full));
}
