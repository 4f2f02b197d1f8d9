#ifndef ESSM_OPTIMIZE_HPP
#define ESSM_OPTIMIZE_HPP

/** @file
 * Derivative-free simplex minimisation and the smooth box transform used to
 * keep moduli inside their band constraints.
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

namespace essm {

/// Maps the real line onto (lo, hi) through a logistic curve; lo == hi is a
/// fixed coordinate.
struct BoxTransform {
  double lo = 0.0;
  double hi = 1.0;

  double to_box(double u) const {
    if (lo == hi) {
      return lo;
    }
    const double s = 1.0 / (1.0 + std::exp(-u));
    return lo + (hi - lo) * s;
  }

  double from_box(double x) const {
    if (lo == hi) {
      return 0.0;
    }
    double s = (x - lo) / (hi - lo);
    constexpr double eps = 1e-12;
    s = std::clamp(s, eps, 1.0 - eps);
    return std::log(s / (1.0 - s));
  }
};

struct SimplexOptions {
  std::size_t max_evals = 2000;
  /// Stop when (f_worst - f_best) <= ftol * (|f_best| + ftol) across the simplex.
  double ftol = 1e-9;
  double initial_step = 0.5;
  /// Fresh simplexes built around the incumbent after the first convergence.
  std::size_t restarts = 1;
};

struct SimplexResult {
  Eigen::VectorXd x;
  double value = std::numeric_limits<double>::infinity();
  std::size_t evals = 0;
  bool converged = false;
  /// Best objective after each iteration (non-increasing).
  std::vector<double> best_trace;
};

/**
 * Nelder-Mead with standard coefficients (reflection 1, expansion 2,
 * contraction 1/2, shrink 1/2). Non-finite objective values are treated as
 * +inf so that rejected trial points never become the incumbent.
 */
inline SimplexResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& objective,
                                 const Eigen::VectorXd& start, const SimplexOptions& opts = {}) {
  const Eigen::Index n = start.size();
  SimplexResult res;
  res.x = start;
  if (n == 0) {
    res.value = objective(start);
    res.evals = 1;
    res.converged = true;
    return res;
  }

  auto eval = [&](const Eigen::VectorXd& x) {
    ++res.evals;
    const double v = objective(x);
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
  };

  std::vector<Eigen::VectorXd> pts(static_cast<std::size_t>(n + 1));
  std::vector<double> vals(static_cast<std::size_t>(n + 1));
  Eigen::VectorXd incumbent = start;
  double incumbent_val = eval(start);

  for (std::size_t round = 0; round <= opts.restarts; ++round) {
    const double round_start_val = incumbent_val;
    pts[0] = incumbent;
    vals[0] = incumbent_val;
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::VectorXd v = incumbent;
      v[i] += opts.initial_step;
      pts[static_cast<std::size_t>(i + 1)] = v;
      vals[static_cast<std::size_t>(i + 1)] = eval(v);
    }

    std::vector<std::size_t> order(pts.size());
    bool round_converged = false;
    while (res.evals < opts.max_evals) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
      const std::size_t best = order.front();
      const std::size_t worst = order.back();
      const std::size_t second = order[order.size() - 2];
      res.best_trace.push_back(std::min(vals[best], incumbent_val));

      if (std::isfinite(vals[worst]) &&
          vals[worst] - vals[best] <= opts.ftol * (std::abs(vals[best]) + opts.ftol)) {
        round_converged = true;
        break;
      }

      Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
      for (std::size_t i = 0; i < pts.size(); ++i) {
        if (i != worst) {
          centroid += pts[i];
        }
      }
      centroid /= static_cast<double>(n);

      const Eigen::VectorXd xr = centroid + (centroid - pts[worst]);
      const double fr = eval(xr);
      if (fr < vals[best]) {
        const Eigen::VectorXd xe = centroid + 2.0 * (centroid - pts[worst]);
        const double fe = eval(xe);
        if (fe < fr) {
          pts[worst] = xe;
          vals[worst] = fe;
        } else {
          pts[worst] = xr;
          vals[worst] = fr;
        }
        continue;
      }
      if (fr < vals[second]) {
        pts[worst] = xr;
        vals[worst] = fr;
        continue;
      }
      const bool outside = fr < vals[worst];
      const Eigen::VectorXd xc = outside ? Eigen::VectorXd(centroid + 0.5 * (xr - centroid))
                                         : Eigen::VectorXd(centroid + 0.5 * (pts[worst] - centroid));
      const double fc = eval(xc);
      if (fc < (outside ? fr : vals[worst])) {
        pts[worst] = xc;
        vals[worst] = fc;
        continue;
      }
      for (std::size_t i = 0; i < pts.size(); ++i) {
        if (i != best) {
          pts[i] = pts[best] + 0.5 * (pts[i] - pts[best]);
          vals[i] = eval(pts[i]);
        }
      }
    }

    const auto best_it = std::min_element(vals.begin(), vals.end());
    const auto best_idx = static_cast<std::size_t>(best_it - vals.begin());
    if (vals[best_idx] < incumbent_val) {
      incumbent_val = vals[best_idx];
      incumbent = pts[best_idx];
    }
    res.converged = round_converged;
    if (!round_converged || res.evals >= opts.max_evals) {
      break;
    }
    // A restart that finds nothing new confirms the optimum.
    if (round_start_val - incumbent_val <=
        opts.ftol * (std::abs(incumbent_val) + opts.ftol) && round > 0) {
      break;
    }
  }

  res.x = incumbent;
  res.value = incumbent_val;
  return res;
}

}  // namespace essm

#endif  // ESSM_OPTIMIZE_HPP
