// SPDX-License-Identifier: Apache-2.0
#include "hmmtune/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace hmmtune {

namespace {
constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;

std::uint64_t mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}
}  // namespace

std::uint64_t SplitMix64::next_u64() {
  state_ += kGamma;
  return mix(state_);
}

double SplitMix64::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double SplitMix64::uniform(double lo, double hi) {
  return lo + (hi - lo) * uniform();
}

double SplitMix64::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // u1 in (0,1] so the log is finite.
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * M_PI * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

std::uint64_t SplitMix64::below(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("below: n must be positive");
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return x % n;
}

SplitMix64 SplitMix64::fork(std::uint64_t tag) {
  return SplitMix64(mix(next_u64() ^ (tag * kGamma + 1)));
}

Eigen::VectorXd SplitMix64::uniform_vec(int n) {
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = uniform();
  return v;
}

Eigen::VectorXd SplitMix64::normal_vec(int n) {
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = normal();
  return v;
}

std::vector<int> SplitMix64::permutation(int n) {
  std::vector<int> p(n);
  for (int i = 0; i < n; ++i) p[i] = i;
  for (int i = n - 1; i > 0; --i) {
    const int j = static_cast<int>(below(static_cast<std::uint64_t>(i) + 1));
    std::swap(p[i], p[j]);
  }
  return p;
}

std::vector<int> SplitMix64::choose_without_replacement(int n, int k) {
  if (k > n) throw std::invalid_argument("choose_without_replacement: k > n");
  std::vector<int> pool(n);
  for (int i = 0; i < n; ++i) pool[i] = i;
  std::vector<int> out;
  out.reserve(k);
  for (int i = 0; i < k; ++i) {
    const int j = static_cast<int>(below(static_cast<std::uint64_t>(n - i)));
    out.push_back(pool[j]);
    pool[j] = pool[n - 1 - i];
  }
  return out;
}

int SplitMix64::categorical(const Eigen::VectorXd& probs) {
  const double u = uniform();
  double c = 0.0;
  int last_positive = -1;
  for (int i = 0; i < probs.size(); ++i) {
    if (probs(i) > 0.0) last_positive = i;
    c += probs(i);
    if (u < c) return i;
  }
  // Float tail: total mass slightly below 1. Fall back to the last
  // positive-probability value.
  if (last_positive < 0) throw std::invalid_argument("categorical: zero mass");
  return last_positive;
}

}  // namespace hmmtune
