#ifndef ESSM_RANDOM_HPP
#define ESSM_RANDOM_HPP

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace essm {

using Rng = std::mt19937_64;

/// Independent generator for the substream identified by (seed, keys...).
inline Rng make_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> keys = {}) {
  std::vector<std::uint32_t> words;
  words.reserve(2 + 2 * keys.size());
  auto push = [&](std::uint64_t v) {
    words.push_back(static_cast<std::uint32_t>(v & 0xffffffffu));
    words.push_back(static_cast<std::uint32_t>(v >> 32));
  };
  push(seed);
  for (auto k : keys) {
    push(k);
  }
  std::seed_seq seq(words.begin(), words.end());
  return Rng(seq);
}

/// p x q matrix with i.i.d. entries uniform on [lo, hi).
inline Eigen::MatrixXd uniform_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double lo,
                                      double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) {
      m(i, j) = dist(rng);
    }
  }
  return m;
}

}  // namespace essm

#endif  // ESSM_RANDOM_HPP
