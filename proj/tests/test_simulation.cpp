#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "essm/simulation.hpp"
#include "essm/spectral.hpp"
#include "oracles.hpp"

using namespace essm;

namespace {

std::vector<double> to_vec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

SimSpec single_epoch_spec() {
  SimSpec s;
  s.bands = {{"delta", 2.0, 1.0002, 1.01}, {"alpha", 8.0, 1.0002, 1.01}, {"beta", 15.0, 1.0002, 1.01}};
  s.rho_start = Eigen::Vector3d::Constant(1.0012);
  s.rng_seed = 2;
  return s;
}

}  // namespace

TEST(SimulateAr2, WhiteNoiseIsStandardised) {
  const std::size_t T = 4000;
  const Eigen::VectorXd x = simulate_ar2({0.0, 0.0}, 1.0, T, std::uint64_t{1});
  EXPECT_NEAR(x.mean(), 0.0, 1e-12);
  EXPECT_NEAR(x.squaredNorm() / static_cast<double>(T - 1), 1.0, 1e-12);
  const auto r = oracle::sample_acf(to_vec(x), 1);
  EXPECT_LT(std::abs(r[1]), 3.0 / std::sqrt(static_cast<double>(T)));
}

TEST(SimulateAr2, AlphaBandPeak) {
  const std::size_t T = 4096;
  const Eigen::VectorXd x = simulate_ar2({1.976, -0.980}, 0.01, T, std::uint64_t{7});
  // The 1.976/-0.980 pair peaks near 10 Hz; smoothing tames the raw
  // periodogram's scatter at the top.
  const Periodogram pg = periodogram(x, 1000.0);
  const auto sm = smooth(pg.power, 21);
  const auto it = std::max_element(sm.begin(), sm.end());
  EXPECT_NEAR(pg.freqs_hz[static_cast<std::size_t>(it - sm.begin())], 10.0, 1.0);
}

TEST(SimulateAr2, LagOneAutocorrelation) {
  const std::size_t T = 20000;
  const Ar2Coeffs c{0.5, -0.3};
  const Eigen::VectorXd x = simulate_ar2(c, 1.0, T, std::uint64_t{9});
  const auto r = oracle::sample_acf(to_vec(x), 1);
  const double theory = c.phi1 / (1.0 - c.phi2);
  EXPECT_NEAR(r[1], theory, 3.0 / std::sqrt(static_cast<double>(T)));
}

TEST(SimulateAr2, RejectsNonCausal) {
  EXPECT_THROW(simulate_ar2({1.2, 0.5}, 1.0, 100, std::uint64_t{1}), CausalityError);
}

TEST(SimulateEpochs, ChannelSpectraPeakAtBandCentres) {
  const SimSpec spec = single_epoch_spec();
  const SimulatedData data = simulate_epochs(spec);
  ASSERT_EQ(data.epochs.size(), 1u);
  const auto& y = data.epochs[0].values;
  EXPECT_EQ(y.rows(), 20);
  EXPECT_EQ(y.cols(), 1000);
  // Average periodogram across channels. A single 1000-sample realisation
  // scatters a sharp peak over neighbouring bins, so look within 1 Hz.
  std::vector<double> avg;
  std::vector<double> freqs;
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    const Eigen::VectorXd x = y.row(i).transpose();
    const Periodogram pg = periodogram(x, spec.fs);
    if (avg.empty()) {
      avg.assign(pg.power.size(), 0.0);
      freqs = pg.freqs_hz;
    }
    for (std::size_t j = 0; j < avg.size(); ++j) {
      avg[j] += pg.power[j];
    }
  }
  const double floor = avg.back();
  for (double centre : {2.0, 8.0, 15.0}) {
    const std::size_t j = static_cast<std::size_t>(std::lround(centre)) - 1;
    EXPECT_NEAR(freqs[j], centre, 1e-9);
    const double top = *std::max_element(avg.begin() + static_cast<std::ptrdiff_t>(j - 1),
                                         avg.begin() + static_cast<std::ptrdiff_t>(j + 2));
    EXPECT_GT(top, 20.0 * floor) << centre;
  }
}

TEST(SimulateEpochs, SampleCovarianceApproachesModel) {
  SimSpec s;
  s.p = 4;
  s.T = 60000;
  s.fs = 1000.0;
  s.bands = {{"a", 40.0, 1.05, 1.2}, {"b", 200.0, 1.05, 1.2}};
  s.rho_start = Eigen::Vector2d(1.1, 1.1);
  s.tau2 = 0.5;
  s.rng_seed = 4;
  const SimulatedData data = simulate_epochs(s);
  const auto& y = data.epochs[0].values;
  const Eigen::MatrixXd centred = y.colwise() - y.rowwise().mean();
  const Eigen::MatrixXd cov = centred * centred.transpose() / static_cast<double>(s.T - 1);
  const Eigen::MatrixXd& M = data.truth.mixing;
  const Eigen::MatrixXd model = M * M.transpose() + s.tau2 * Eigen::MatrixXd::Identity(4, 4);
  EXPECT_LT((cov - model).cwiseAbs().maxCoeff(), 0.05);
}

TEST(SimulateEpochs, ZeroMixingGivesPureNoise) {
  SimSpec s = single_epoch_spec();
  s.p = 3;
  s.tau2 = 100.0;
  s.mixing = Eigen::MatrixXd::Zero(3, 3);
  const SimulatedData data = simulate_epochs(s);
  const Eigen::VectorXd x = data.epochs[0].values.row(0).transpose();
  const auto r = oracle::sample_acf(to_vec(x), 5);
  for (std::size_t h = 1; h <= 5; ++h) {
    EXPECT_LT(std::abs(r[h]), 4.0 / std::sqrt(1000.0));
  }
  EXPECT_NEAR(x.squaredNorm() / 1000.0, 100.0, 15.0);
}

TEST(SimulateEpochs, ModuliEvolveLinearly) {
  SimSpec s = single_epoch_spec();
  s.p = 3;
  s.T = 50;
  s.R = 5;
  s.rho_start = Eigen::Vector3d::Constant(1.001);
  s.rho_increment = 0.00005;
  const SimulatedData data = simulate_epochs(s);
  for (std::size_t r = 0; r < 5; ++r) {
    EXPECT_NEAR(data.truth.params[r].rho[1], 1.001 + 0.00005 * static_cast<double>(r), 1e-15);
    EXPECT_DOUBLE_EQ(data.truth.params[r].sigma2, 1.0);
  }
}

TEST(SimulateEpochs, DeterministicAndSeedSensitive) {
  SimSpec s = single_epoch_spec();
  s.p = 3;
  s.T = 100;
  s.R = 3;
  const auto a = simulate_epochs(s);
  const auto b = simulate_epochs(s);
  for (std::size_t r = 0; r < 3; ++r) {
    EXPECT_EQ(a.epochs[r].values, b.epochs[r].values);
  }
  s.rng_seed = 3;
  const auto c = simulate_epochs(s);
  EXPECT_NE(a.epochs[0].values, c.epochs[0].values);
}

TEST(SimSpec, Validation) {
  SimSpec s = single_epoch_spec();
  s.rho_start[0] = 1.0;
  EXPECT_THROW(s.validate(), CausalityError);
  s = single_epoch_spec();
  s.R = 1000;
  s.rho_increment = 0.001;
  EXPECT_THROW(s.validate(), ConfigError);
  s = single_epoch_spec();
  s.rho_start = Eigen::Vector2d::Constant(1.0012);
  EXPECT_THROW(s.validate(), ConfigError);
}

TEST(MseReport, ZeroForTruthAndDeltaSquaredForShift) {
  SimSpec s = single_epoch_spec();
  s.p = 3;
  s.T = 20;
  s.R = 4;
  s.rho_increment = 0.0001;
  const auto data = simulate_epochs(s);
  const auto zero = mse_report(data.truth.params, data.truth, s.bands, s.fs);
  for (double v : zero.row_values()) {
    EXPECT_EQ(v, 0.0);
  }
  EXPECT_EQ(zero.row_labels().front(), "Phi (delta band)");
  EXPECT_EQ(zero.row_labels()[3], "tau2");
  EXPECT_EQ(zero.row_labels()[4], "sigma2");

  // Shift both companion entries of the alpha band by delta: the mean of
  // the two squared errors is delta^2.
  const double delta = 1e-3;
  const auto truth_c = band_coefficients(s.bands, data.truth.params[0].rho, s.fs);
  const Ar2Coeffs shifted{truth_c[1].phi1 + delta, truth_c[1].phi2 + delta};
  EXPECT_NEAR(companion_squared_error(shifted, truth_c[1]), delta * delta, 1e-18);

  std::vector<EpochParams> est = data.truth.params;
  for (auto& p : est) {
    p.tau2 += 0.1;
  }
  const auto rep = mse_report(est, data.truth, s.bands, s.fs);
  EXPECT_NEAR(rep.tau2, 0.01, 1e-15);
  EXPECT_EQ(rep.phi[0], 0.0);
}
