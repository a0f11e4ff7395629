// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <set>
#include <vector>

#include <Eigen/Core>

#include "hmmtune/model.hpp"

namespace hmmtune {

// Evidence/embedding vectors, one per position (1-based positions of the
// sequence map to indices 0..t-1 here). Entries are nonnegative; proper
// embeddings are emission rows, a masked position is the all-ones vector,
// position 0 may carry a prompt in [0,1]^dim.
using EmbeddingSeq = std::vector<Eigen::VectorXd>;

struct Messages {
  // l1-normalized per position; the positive scales cancel in every output
  // because tau = alpha .* beta enters only through 0-homogeneous maps.
  std::vector<Eigen::VectorXd> alpha;  // alpha_i ~ P(H_i, left evidence)
  std::vector<Eigen::VectorXd> beta;   // beta_i  ~ P(right evidence | H_i)
};

Eigen::VectorXd proper_embedding(const HmmParams& p, int token);
// Length |M|*|H| emission row; lift with lift_embedding before use on the
// lifted chain.
Eigen::VectorXd proper_embedding(const MemHmmParams& p, int token);
Eigen::VectorXd mask_embedding(int dim);
EmbeddingSeq embed_tokens(const HmmParams& p, const std::vector<int>& tokens,
                          const std::set<int>& masked = {});

Messages compute_messages(const HmmParams& p, const EmbeddingSeq& evidence);

// Conditional token distribution at every position: emission * tau_i / |tau_i|,
// with the all-zeros vector when |tau_i| = 0 (impossible evidence).
std::vector<Eigen::VectorXd> gbar(const HmmParams& p, const EmbeddingSeq& v);

// gbar on proper embeddings with the given mask set: exact masked-LM oracle
// P(X_i | X_{-i} = x_{-i}) at every position.
std::vector<Eigen::VectorXd> mlm_oracle(const HmmParams& p,
                                        const std::vector<int>& tokens,
                                        const std::set<int>& masked);

// eta: |M||H| -> |M|^N |H|, eta(v)[(m_1:N, j, s)] = v[(m_j, j, s)].
Eigen::VectorXd lift_embedding(const MemHmmParams& p, const Eigen::VectorXd& v);
// phi: |M|^N |H| -> |M||H|, averaging over the other cells' memory values;
// phi(eta(v)) = v.
Eigen::VectorXd reverse_lift(const MemHmmParams& p, const Eigen::VectorXd& v);

// Memory-model conditional outputs: emission * phi(tau_i) / |phi(tau_i)|.
// `lifted` must be lift_mem_hmm(p); evidence vectors live on the lifted chain.
std::vector<Eigen::VectorXd> gbar_mem(const MemHmmParams& p,
                                      const HmmParams& lifted,
                                      const EmbeddingSeq& v);

struct HiddenPosteriors {
  // per_position[i] = P(H_{i+1} | evidence at all positions except i).
  std::vector<Eigen::VectorXd> per_position;
  // P(H_0 | all evidence).
  Eigen::VectorXd h0;
};
HiddenPosteriors hidden_posteriors(const HmmParams& p, const EmbeddingSeq& v);

// P(H_t | all evidence including position t).
Eigen::VectorXd full_posterior_last(const HmmParams& p, const EmbeddingSeq& v);

// Marginalize a lifted-chain posterior down to the syntax state.
Eigen::VectorXd mem_marginal_hidden(const MemHmmParams& p,
                                    const Eigen::VectorXd& lifted_posterior);
// Joint P(M_cell = m, H = h) from a lifted-chain posterior; |M| x nh.
Eigen::MatrixXd mem_joint_mem_hidden(const MemHmmParams& p,
                                     const Eigen::VectorXd& lifted_posterior,
                                     int cell);

// Vocabulary extension used to test the prompt <-> fake-token equivalence:
// token z~ = |Z| exists only at position 1, emitted with probability pi_h;
// original tokens keep probability (1 - pi_h) * emission(z, h) there.
struct ExtendedModel {
  Eigen::MatrixXd emission_pos1;  // (|Z|+1) x |H|
  Eigen::MatrixXd emission_rest;  // (|Z|+1) x |H|, row z~ all zero
  int fake_token = 0;
};
ExtendedModel fake_token_extend(const HmmParams& p, const Eigen::VectorXd& pi);

}  // namespace hmmtune
