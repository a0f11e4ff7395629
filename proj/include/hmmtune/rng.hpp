// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

namespace hmmtune {

// Splittable 64-bit generator (splitmix64 update + finalizer). Chosen over
// std::mt19937 because its double and normal streams are bit-identical across
// standard libraries, which the reproducibility contract requires.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64();

  // Uniform double in [0, 1), 53 mantissa bits.
  double uniform();
  double uniform(double lo, double hi);

  // Standard normal via Box-Muller; caches the paired draw.
  double normal();

  // Uniform integer in [0, n), rejection-sampled so it is unbiased.
  std::uint64_t below(std::uint64_t n);

  // Independent child stream. Advances this stream by one draw.
  SplitMix64 fork(std::uint64_t tag);

  Eigen::VectorXd uniform_vec(int n);
  Eigen::VectorXd normal_vec(int n);
  std::vector<int> permutation(int n);
  // k distinct indices from [0, n), in draw order.
  std::vector<int> choose_without_replacement(int n, int k);
  // Index draw from a probability vector (sums to 1 up to float error).
  int categorical(const Eigen::VectorXd& probs);

 private:
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace hmmtune
