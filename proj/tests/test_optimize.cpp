#include <atomic>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include <gtest/gtest.h>

#include "essm/optimize.hpp"
#include "essm/parallel.hpp"
#include "essm/random.hpp"

using namespace essm;

TEST(BoxTransform, RoundtripAndBounds) {
  const BoxTransform b{1.001, 1.02};
  for (double x : {1.0011, 1.005, 1.0199}) {
    EXPECT_NEAR(b.to_box(b.from_box(x)), x, 1e-12);
  }
  EXPECT_GE(b.to_box(-800.0), 1.001);
  EXPECT_LE(b.to_box(800.0), 1.02);
  const BoxTransform fixed{1.5, 1.5};
  EXPECT_EQ(fixed.to_box(3.0), 1.5);
}

TEST(NelderMead, QuadraticMinimum) {
  auto f = [](const Eigen::VectorXd& x) {
    return (x[0] - 1.0) * (x[0] - 1.0) + 3.0 * (x[1] + 2.0) * (x[1] + 2.0) + 0.5;
  };
  SimplexOptions opts;
  opts.ftol = 1e-14;
  const auto res = nelder_mead(f, Eigen::Vector2d(4.0, 4.0), opts);
  EXPECT_TRUE(res.converged);
  EXPECT_NEAR(res.x[0], 1.0, 1e-5);
  EXPECT_NEAR(res.x[1], -2.0, 1e-5);
  EXPECT_NEAR(res.value, 0.5, 1e-10);
}

TEST(NelderMead, Rosenbrock) {
  auto f = [](const Eigen::VectorXd& x) {
    return 100.0 * std::pow(x[1] - x[0] * x[0], 2) + std::pow(1.0 - x[0], 2);
  };
  SimplexOptions opts;
  opts.ftol = 1e-15;
  opts.max_evals = 10000;
  const auto res = nelder_mead(f, Eigen::Vector2d(-1.2, 1.0), opts);
  EXPECT_NEAR(res.x[0], 1.0, 1e-3);
  EXPECT_NEAR(res.x[1], 1.0, 2e-3);
}

TEST(NelderMead, NonFiniteValuesAreRejected) {
  auto f = [](const Eigen::VectorXd& x) {
    if (x[0] < 0.0) {
      return std::numeric_limits<double>::quiet_NaN();
    }
    return (x[0] - 0.3) * (x[0] - 0.3);
  };
  const auto res = nelder_mead(f, Eigen::VectorXd::Constant(1, 2.0));
  EXPECT_TRUE(std::isfinite(res.value));
  EXPECT_GE(res.x[0], 0.0);
  EXPECT_NEAR(res.x[0], 0.3, 1e-3);
}

TEST(NelderMead, TraceIsNonIncreasingAndBudgetRespected) {
  auto f = [](const Eigen::VectorXd& x) { return x.squaredNorm(); };
  SimplexOptions opts;
  opts.max_evals = 50;
  const auto res = nelder_mead(f, Eigen::Vector3d(1.0, 2.0, 3.0), opts);
  EXPECT_LE(res.evals, opts.max_evals + 4);
  for (std::size_t i = 1; i < res.best_trace.size(); ++i) {
    EXPECT_LE(res.best_trace[i], res.best_trace[i - 1]);
  }
}

TEST(ParallelFor, EveryIndexOnce) {
  std::vector<std::atomic<int>> hits(257);
  parallel_for(hits.size(), [&](std::size_t i) { ++hits[i]; }, 4);
  for (const auto& h : hits) {
    EXPECT_EQ(h.load(), 1);
  }
}

TEST(ParallelFor, RethrowsFirstFailure) {
  EXPECT_THROW(parallel_for(
                   10,
                   [](std::size_t i) {
                     if (i == 7) {
                       throw std::runtime_error("boom");
                     }
                   },
                   3),
               std::runtime_error);
}

TEST(MakeRng, StreamsAreReproducibleAndDistinct) {
  Rng a = make_rng(5, {1, 2});
  Rng b = make_rng(5, {1, 2});
  Rng c = make_rng(5, {2, 1});
  const auto x = a();
  EXPECT_EQ(x, b());
  EXPECT_NE(x, c());
  Rng d = make_rng(5, {1, 2});
  const Eigen::MatrixXd m = uniform_matrix(d, 4, 3, 0.1, 1.0);
  EXPECT_TRUE((m.array() >= 0.1).all());
  EXPECT_TRUE((m.array() < 1.0).all());
}
