// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <vector>

#include <Eigen/Core>

#include "hmmtune/rng.hpp"

namespace hmmtune {

// Orientation, fixed project-wide: columns are conditional distributions.
//   transition(h', h) = P(next = h' | prev = h)   (column-stochastic)
//   emission(z, h)    = P(token = z | state = h)
// so marginals evolve by left multiplication: P(H_{i+1}) = transition * P(H_i).
struct HmmParams {
  int n_hidden = 0;
  int n_vocab = 0;
  Eigen::MatrixXd transition;  // |H| x |H|
  Eigen::MatrixXd emission;    // |Z| x |H|
  Eigen::VectorXd start;       // distribution of H_0
};

// Hidden state of the memory model is h = (j, s), flattened h = j*|S| + s.
// Emission columns are indexed (m, j, s) -> (m*N + j)*|S| + s (m outermost).
struct MemHmmParams {
  int n_cells = 0;      // N
  int mem_size = 0;     // |M|
  int syntax_size = 0;  // |S|
  int n_vocab = 0;
  Eigen::MatrixXd transition;  // nh x nh over the syntax chain, nh = N*|S|
  Eigen::MatrixXd emission;    // |Z| x (|M|*nh)
  Eigen::VectorXd start;       // nh
  Eigen::VectorXd mem_prior;   // |M|^N, cell 0 outermost

  int n_hidden() const { return n_cells * syntax_size; }
  long n_mem_tuples() const {
    long n = 1;
    for (int c = 0; c < n_cells; ++c) n *= mem_size;
    return n;
  }
};

struct SequenceSample {
  std::vector<int> hidden_path;  // length t+1: H_0 .. H_t
  std::vector<int> tokens;       // length t:   X_1 .. X_t
  std::vector<int> memory;       // per-cell values (MemHmm only)
};

// Column index of emission for (memory value m, cell j, syntax s).
int mem_emission_col(const MemHmmParams& p, int m, int j, int s);
// Decode a memory-tuple index into per-cell values, cell 0 outermost.
std::vector<int> mem_tuple_digits(const MemHmmParams& p, long tuple_index);

Eigen::VectorXd softmax(const Eigen::VectorXd& logits, double temp);
Eigen::MatrixXd random_permutation_matrix(SplitMix64& rng, int n);

// Random model recipe: transition = convex combination of |H| random
// permutation matrices with softmax(temp 0.01) weights; start softmax(temp 10);
// each emission column softmax(temp 0.01).
HmmParams random_hmm(SplitMix64& rng, int n_hidden, int n_vocab);
HmmParams random_hmm(std::uint64_t seed, int n_hidden, int n_vocab);
// Same per-column recipe; mem_prior is a product of per-cell softmax(temp 10).
MemHmmParams random_mem_hmm(SplitMix64& rng, int n_cells, int mem_size,
                            int syntax_size, int n_vocab);
MemHmmParams random_mem_hmm(std::uint64_t seed, int n_cells, int mem_size,
                            int syntax_size, int n_vocab);

// Throws std::invalid_argument when a stochastic invariant fails (tol 1e-12).
void validate(const HmmParams& p);
void validate(const MemHmmParams& p);

// Power iteration to residual 1e-12; throws std::runtime_error (with the
// achieved residual in the message) if the cap is hit.
Eigen::VectorXd stationary_distribution(const Eigen::MatrixXd& transition,
                                        int max_iters = 1000000);

SequenceSample sample_sequence(const HmmParams& p, int t_len, SplitMix64& rng);
SequenceSample sample_sequence(const MemHmmParams& p, int t_len,
                               SplitMix64& rng);

// Vanilla chain over lifted states (memory tuple, h), index = tuple*nh + h:
// block-diagonal transition, emission row z = eta(emission row z),
// start = mem_prior (x) start. Throws when the lifted size exceeds the cap.
HmmParams lift_mem_hmm(const MemHmmParams& p, long state_cap = 4096);

// Brute-force oracle: P(X_i | X_{-i}) for each masked i, by summing the joint
// over all |H|^(t+1) hidden paths. emission_per_pos[i] is the emission matrix
// in effect at position i (all equal for a homogeneous model). A masked
// position with zero-probability context yields the flagged all-zeros vector.
std::map<int, Eigen::VectorXd> enumerate_conditionals(
    const Eigen::MatrixXd& transition, const Eigen::VectorXd& start,
    const std::vector<Eigen::MatrixXd>& emission_per_pos,
    const std::vector<int>& tokens, const std::set<int>& masked,
    long path_cap = 10000000);

}  // namespace hmmtune
