#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "essm/spectral.hpp"
#include "oracles.hpp"

using namespace essm;

namespace {

std::vector<double> gaussian_series(std::size_t T, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  std::vector<double> x(T);
  for (auto& v : x) {
    v = z(rng);
  }
  return x;
}

Periodogram flat_periodogram(std::vector<double> power) {
  Periodogram pg;
  pg.T = 2 * power.size();
  pg.power = std::move(power);
  return pg;
}

}  // namespace

TEST(Periodogram, CosineConcentratesInOneBin) {
  const std::size_t T = 256;
  const std::size_t k = 16;
  std::vector<double> x(T);
  for (std::size_t t = 0; t < T; ++t) {
    x[t] = std::cos(2.0 * std::numbers::pi * static_cast<double>(k * t) / static_cast<double>(T));
  }
  const Periodogram pg = periodogram(x, 512.0);
  EXPECT_EQ(pg.power.size(), T / 2);
  EXPECT_DOUBLE_EQ(pg.freqs_hz[k - 1], 32.0);
  EXPECT_NEAR(pg.power[k - 1], static_cast<double>(T) / 4.0, 1e-9);
  for (std::size_t j = 0; j < pg.power.size(); ++j) {
    if (j != k - 1) {
      EXPECT_LT(pg.power[j], 1e-18 * static_cast<double>(T) + 1e-20);
    }
  }
}

TEST(Periodogram, ConstantSeriesIsZero) {
  const std::vector<double> x(64, 3.5);
  const Periodogram pg = periodogram(x, 100.0);
  for (double v : pg.power) {
    EXPECT_NEAR(v, 0.0, 1e-24);
  }
}

TEST(Periodogram, MatchesDirectDft) {
  for (std::size_t T : {17u, 64u, 101u}) {
    const auto x = gaussian_series(T, T);
    const Periodogram pg = periodogram(x, 1.0);
    for (std::size_t j = 1; j <= T / 2; ++j) {
      EXPECT_NEAR(pg.power[j - 1], oracle::dft_power(x, j), 1e-10) << "T=" << T << " j=" << j;
    }
  }
}

TEST(Periodogram, Parseval) {
  for (std::size_t T : {100u, 101u, 1000u}) {
    const auto x = gaussian_series(T, 40 + T);
    double mean = 0.0;
    for (double v : x) {
      mean += v;
    }
    mean /= static_cast<double>(T);
    double ss = 0.0;
    for (double v : x) {
      ss += (v - mean) * (v - mean);
    }
    const Periodogram pg = periodogram(x, 1.0);
    EXPECT_NEAR(two_sided_total(pg) / ss, 1.0, 1e-8) << "T=" << T;
  }
}

TEST(Periodogram, TooShort) {
  const std::vector<double> x{1.0, 2.0, 3.0};
  EXPECT_THROW(periodogram(x, 1.0), LengthError);
}

TEST(Smooth, AveragesWithTruncatedEnds) {
  const std::vector<double> p{1.0, 2.0, 3.0, 4.0};
  const auto s = smooth(p, 3);
  EXPECT_DOUBLE_EQ(s[0], 1.5);
  EXPECT_DOUBLE_EQ(s[1], 2.0);
  EXPECT_DOUBLE_EQ(s[3], 3.5);
  EXPECT_THROW(smooth(p, 2), DomainError);
}

TEST(Phases, ParseAndValidate) {
  const auto ph = parse_phases("1-3,4,5-9");
  ASSERT_EQ(ph.size(), 3u);
  EXPECT_EQ(ph[1].first, 4u);
  EXPECT_EQ(ph[1].last, 4u);
  EXPECT_NO_THROW(validate_partition(ph, 9));
  EXPECT_THROW(validate_partition(ph, 10), PartitionError);
  EXPECT_THROW(validate_partition(parse_phases("1-3,3-9"), 9), PartitionError);
  EXPECT_THROW(validate_partition(parse_phases("1-3,5-9"), 9), PartitionError);
  EXPECT_THROW(validate_partition(parse_phases("1-3,6-4"), 6), PartitionError);
  EXPECT_THROW(parse_phases("1-3,,4"), PartitionError);
  EXPECT_THROW(parse_phases("a-b"), PartitionError);
}

TEST(PhaseAverage, IdenticalEpochsAndSingletons) {
  const std::vector<Periodogram> same(4, flat_periodogram({1.0, 2.0, 3.0}));
  const auto avg = phase_average(same, parse_phases("1-2,3-4"));
  EXPECT_EQ(avg[0], same[0].power);
  EXPECT_EQ(avg[1], same[0].power);

  const std::vector<Periodogram> distinct{flat_periodogram({1.0, 0.0}), flat_periodogram({3.0, 4.0}),
                                          flat_periodogram({5.0, 2.0})};
  const auto id = phase_average(distinct, parse_phases("1,2,3"));
  for (std::size_t r = 0; r < 3; ++r) {
    EXPECT_EQ(id[r], distinct[r].power);
  }
  const auto two = phase_average(distinct, parse_phases("1-2,3"));
  EXPECT_DOUBLE_EQ(two[0][0], 2.0);
  EXPECT_DOUBLE_EQ(two[0][1], 2.0);
  EXPECT_DOUBLE_EQ(two[1][0], 5.0);
}

TEST(RelativePeriodogram, Normalisation) {
  const auto equal = relative_periodogram({{1.0, 5.0}, {1.0, 5.0}, {1.0, 5.0}});
  for (const auto& row : equal.values) {
    for (double v : row) {
      EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
    }
  }
  const auto skew = relative_periodogram({{2.0}, {1.0}, {1.0}});
  EXPECT_DOUBLE_EQ(skew.values[0][0], 0.5);
  EXPECT_DOUBLE_EQ(skew.values[1][0], 0.25);
  EXPECT_DOUBLE_EQ(skew.values[2][0], 0.25);

  const auto zero = relative_periodogram({{0.0, 1.0}, {0.0, 3.0}});
  EXPECT_EQ(zero.flagged, std::vector<std::size_t>{0});
  EXPECT_DOUBLE_EQ(zero.values[0][0], 0.5);

  const auto x = gaussian_series(300, 5);
  const auto y = gaussian_series(300, 6);
  const std::vector<Periodogram> pgs{periodogram(x, 1.0), periodogram(y, 1.0)};
  const auto rel = relative_periodogram(phase_average(pgs, parse_phases("1,2")));
  for (std::size_t j = 0; j < rel.values[0].size(); ++j) {
    EXPECT_NEAR(rel.values[0][j] + rel.values[1][j], 1.0, 1e-12);
  }
}
