// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include <Eigen/Core>

#include "hmmtune/model.hpp"
#include "hmmtune/rng.hpp"

namespace hmmtune {

// Model family with a designated target-state set and gate set, built so the
// relaxed non-degeneracy conditions hold while the full-rank emission
// condition deliberately fails (duplicated columns outside the target set).
struct DegenerateFamily {
  HmmParams params;
  std::vector<int> h_star;  // first h_star_size states
  std::vector<int> b_set;   // single gate state, index h_star_size
};

// h_star = {0..h_star_size-1}. Emission: target columns independent
// (rejection-sampled softmax temp 0.01), remaining columns copy target
// columns. Transition column of the gate state is supported exactly on
// h_star (softmax temp 1.0 there); all other columns have full support
// (softmax temp 0.1). Start softmax temp 10. Requires
// 1 <= h_star_size < n_hidden and h_star_size <= n_vocab.
DegenerateFamily build_degenerate_family(SplitMix64& rng, int n_hidden,
                                         int n_vocab, int h_star_size);

// Softmax(temp 0.01) distribution whose argmax is `peak`, with the peak logit
// lifted above the runner-up by uniform(gap_lo, gap_hi) so off-peak mass is
// at most exp(-gap_lo/0.01) relative to the peak.
Eigen::VectorXd peaked_column(SplitMix64& rng, int n_vocab, int peak,
                              double gap_lo = 0.4, double gap_hi = 0.7);

// Convex combination of n random permutation matrices whose dominant weight
// has the same enforced logit gap (keeps posterior argmaxes away from ties).
Eigen::MatrixXd gapped_transition(SplitMix64& rng, int n, double gap_lo = 0.4,
                                  double gap_hi = 0.7);

struct DesignedMemFamily {
  MemHmmParams params;
  std::vector<int> s_star;  // first s_star_size syntax states
};

// Memory model whose recovery-relevant emission columns (all memory values m,
// cell j_star, syntax s in s_star) get distinct peak tokens, so the per-state
// column blocks form a well-conditioned direct sum. Every other (j, s) pair
// gets one peaked column shared across memory values (the complement span
// stays low-dimensional). Transition is a gapped permutation mixture, hence
// doubly stochastic; with stationary_start the start is uniform and exactly
// stationary. Requires
//   mem_size*s_star_size + n_cells*(syntax_size - s_star_size)
//     + (n_cells - 1)*s_star_size <= n_vocab
// distinct peak tokens; throws std::invalid_argument otherwise.
DesignedMemFamily build_designed_mem_family(SplitMix64& rng, int n_cells,
                                            int mem_size, int syntax_size,
                                            int n_vocab, int s_star_size,
                                            int j_star,
                                            bool stationary_start = false);

// Mild-temperature variant of the random model recipe: transition and
// emission columns are softmax(temp) over uniform logits (full support, no
// near-deterministic entries), start softmax temp 10. Used where probing
// with finite differences needs gradients well above roundoff.
HmmParams smooth_random_hmm(SplitMix64& rng, int n_hidden, int n_vocab,
                            double temp);

}  // namespace hmmtune
