// SPDX-License-Identifier: Apache-2.0
#include "hmmtune/families.hpp"

#include <sstream>
#include <stdexcept>

#include "hmmtune/assumptions.hpp"

namespace hmmtune {

DegenerateFamily build_degenerate_family(SplitMix64& rng, int n_hidden,
                                         int n_vocab, int h_star_size) {
  if (h_star_size < 1 || h_star_size >= n_hidden)
    throw std::invalid_argument("h_star_size must be in [1, n_hidden)");
  if (h_star_size > n_vocab)
    throw std::invalid_argument("h_star_size exceeds n_vocab");

  DegenerateFamily fam;
  fam.h_star.resize(h_star_size);
  for (int h = 0; h < h_star_size; ++h) fam.h_star[h] = h;

  Eigen::MatrixXd target(n_vocab, h_star_size);
  do {
    for (int h = 0; h < h_star_size; ++h)
      target.col(h) = softmax(rng.uniform_vec(n_vocab), 0.01);
  } while (!full_column_rank(target));

  HmmParams p;
  p.n_hidden = n_hidden;
  p.n_vocab = n_vocab;
  p.emission = Eigen::MatrixXd::Zero(n_vocab, n_hidden);
  p.emission.leftCols(h_star_size) = target;
  for (int h = h_star_size; h < n_hidden; ++h)
    p.emission.col(h) = target.col(static_cast<int>(rng.below(h_star_size)));

  const int b0 = h_star_size;
  fam.b_set = {b0};
  p.transition = Eigen::MatrixXd::Zero(n_hidden, n_hidden);
  for (int h = 0; h < n_hidden; ++h) {
    if (h == b0) {
      Eigen::VectorXd inside = softmax(rng.uniform_vec(h_star_size), 1.0);
      for (int k = 0; k < h_star_size; ++k) p.transition(k, h) = inside(k);
    } else {
      p.transition.col(h) = softmax(rng.uniform_vec(n_hidden), 0.1);
    }
  }
  p.start = softmax(rng.uniform_vec(n_hidden), 10.0);
  validate(p);
  fam.params = std::move(p);
  return fam;
}

Eigen::VectorXd peaked_column(SplitMix64& rng, int n_vocab, int peak,
                              double gap_lo, double gap_hi) {
  Eigen::VectorXd u = rng.uniform_vec(n_vocab);
  double runner_up = 0.0;
  for (int z = 0; z < n_vocab; ++z)
    if (z != peak && u(z) > runner_up) runner_up = u(z);
  u(peak) = runner_up + rng.uniform(gap_lo, gap_hi);
  return softmax(u, 0.01);
}

Eigen::MatrixXd gapped_transition(SplitMix64& rng, int n, double gap_lo,
                                  double gap_hi) {
  std::vector<Eigen::MatrixXd> perms;
  perms.reserve(n);
  for (int k = 0; k < n; ++k)
    perms.push_back(random_permutation_matrix(rng, n));
  Eigen::VectorXd u = rng.uniform_vec(n);
  const int j = static_cast<int>(rng.below(n));
  double runner_up = 0.0;
  for (int k = 0; k < n; ++k)
    if (k != j && u(k) > runner_up) runner_up = u(k);
  u(j) = runner_up + rng.uniform(gap_lo, gap_hi);
  Eigen::VectorXd w = softmax(u, 0.01);
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  for (int k = 0; k < n; ++k) a += w(k) * perms[k];
  return a;
}

DesignedMemFamily build_designed_mem_family(SplitMix64& rng, int n_cells,
                                            int mem_size, int syntax_size,
                                            int n_vocab, int s_star_size,
                                            int j_star, bool stationary_start) {
  if (s_star_size < 1 || s_star_size > syntax_size)
    throw std::invalid_argument("s_star_size must be in [1, syntax_size]");
  if (j_star < 0 || j_star >= n_cells)
    throw std::invalid_argument("j_star out of range");
  const int n_primary = mem_size * s_star_size;
  const int n_shared =
      n_cells * (syntax_size - s_star_size) + (n_cells - 1) * s_star_size;
  if (n_primary + n_shared > n_vocab) {
    std::ostringstream msg;
    msg << "need " << n_primary + n_shared << " distinct peak tokens but only "
        << n_vocab << " available";
    throw std::invalid_argument(msg.str());
  }

  MemHmmParams p = random_mem_hmm(rng, n_cells, mem_size, syntax_size, n_vocab);
  p.transition = gapped_transition(rng, p.n_hidden());

  std::vector<int> peaks = rng.permutation(n_vocab);
  int next_peak = 0;
  for (int m = 0; m < mem_size; ++m)
    for (int s = 0; s < s_star_size; ++s)
      p.emission.col(mem_emission_col(p, m, j_star, s)) =
          peaked_column(rng, n_vocab, peaks[next_peak++]);
  for (int j = 0; j < n_cells; ++j) {
    for (int s = 0; s < syntax_size; ++s) {
      if (j == j_star && s < s_star_size) continue;
      Eigen::VectorXd shared =
          peaked_column(rng, n_vocab, peaks[next_peak++]);
      for (int m = 0; m < mem_size; ++m)
        p.emission.col(mem_emission_col(p, m, j, s)) = shared;
    }
  }

  if (stationary_start)
    p.start = Eigen::VectorXd::Constant(p.n_hidden(), 1.0 / p.n_hidden());
  validate(p);

  DesignedMemFamily fam;
  fam.params = std::move(p);
  fam.s_star.resize(s_star_size);
  for (int s = 0; s < s_star_size; ++s) fam.s_star[s] = s;
  return fam;
}

HmmParams smooth_random_hmm(SplitMix64& rng, int n_hidden, int n_vocab,
                            double temp) {
  HmmParams p;
  p.n_hidden = n_hidden;
  p.n_vocab = n_vocab;
  p.transition.resize(n_hidden, n_hidden);
  for (int h = 0; h < n_hidden; ++h)
    p.transition.col(h) = softmax(rng.uniform_vec(n_hidden), temp);
  p.start = softmax(rng.uniform_vec(n_hidden), 10.0);
  p.emission.resize(n_vocab, n_hidden);
  for (int h = 0; h < n_hidden; ++h)
    p.emission.col(h) = softmax(rng.uniform_vec(n_vocab), temp);
  validate(p);
  return p;
}

}  // namespace hmmtune
