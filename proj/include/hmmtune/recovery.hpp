// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "hmmtune/assumptions.hpp"
#include "hmmtune/inference.hpp"
#include "hmmtune/model.hpp"

namespace hmmtune {

struct LinearHead {
  Eigen::VectorXd weights;  // length |Z|
};

struct PromptVector {
  Eigen::VectorXd entries;  // in [0,1]^dim
};

struct AttentionHead {
  Eigen::VectorXd query;                 // length nh+1
  Eigen::MatrixXd key;                   // (nh+1) x |Z|
  std::vector<Eigen::VectorXd> offsets;  // per-position additive key offsets;
                                         // positions past the list get zero
  Eigen::MatrixXd value;                 // (|M|*nh) x |Z|
  Eigen::VectorXd value_weights;         // length |M|*nh
  double argmax_tol = 1e-9;
};

// Head recovering the start-state statistic: weights^T G_1([MASK], x) has the
// sign of q_star^T P(H_0 | x). Requires non-degenerate emissions + regularity;
// throws std::runtime_error naming the failed check otherwise.
LinearHead construct_linear_head_thm1(const HmmParams& p,
                                      const Eigen::VectorXd& q_star);
// Score on a concrete sequence: weights^T gbar(mask, e(x))[0].
double linear_head_score(const HmmParams& p, const LinearHead& head,
                         const std::vector<int>& tokens);

struct PromptHead {
  PromptVector prompt;  // over H: indicator of the b_set
  LinearHead head;
};

// Degenerate-rank variant: prompt = indicator of b_set, head reads position 2
// of gbar((prompt, mask, e(x))). Requires regularity + the relaxed
// non-degeneracy certificate; throws on failure.
PromptHead construct_prompt_head_thm2(const HmmParams& p,
                                      const Eigen::VectorXd& q_star,
                                      const std::vector<int>& h_star,
                                      const std::vector<int>& b_set);
double prompt_head_score(const HmmParams& p, const PromptHead& ph,
                         const std::vector<int>& tokens);

struct AttentionConstruction {
  bool ok = false;
  std::string reason;  // span-disjointness reason code when not ok
  AttentionHead head;
  std::vector<int> h_star;  // {j_star} x s_star, flattened syntax states
  std::vector<int> m_star;  // supp(q_star); all of M for the full variant
  RecoveryCertificate certificate;
};

// Memory-recovery attention head built from the span-disjointness recovery
// matrices over all memory values. Inputs: per-position oracle outputs of the
// unmasked sequence and token value-embeddings (emission rows over |M|*nh).
AttentionConstruction construct_attention_thm3(const MemHmmParams& p,
                                               const Eigen::VectorXd& q_star,
                                               int j_star,
                                               const std::vector<int>& s_star);

struct PromptAttention {
  bool ok = false;
  std::string reason;
  PromptVector prompt;  // over the lifted chain
  AttentionHead head;   // with offsets[0] set so position 1 is never attended
  std::vector<int> h_star;
  std::vector<int> m_star;
  RecoveryCertificate certificate;
};

// Prompted variant: recovery restricted to memory values in supp(q_star);
// prompt selects the lifted states whose target cell holds a supported value;
// requires a stationary start. The prompted input is (prompt, eta(e(x_1)), ..),
// so attended positions shift by one and position 1 carries offset -2 on the
// query's extra coordinate.
PromptAttention construct_prompt_attention_thm4(const MemHmmParams& p,
                                                const Eigen::VectorXd& q_star,
                                                int j_star,
                                                const std::vector<int>& s_star);

// 1(weights . g >= 0). The all-zeros g lands on the boundary and maps to 1.
int eval_linear(const LinearHead& head, const Eigen::VectorXd& g);

struct AttentionEval {
  double score = 0.0;
  int label = 1;
  std::vector<int> attended;        // indices within argmax_tol of the max
  std::vector<double> key_scores;   // per-position q^T (key G_i + offset_i)
};

AttentionEval eval_attention(const AttentionHead& head,
                             const std::vector<Eigen::VectorXd>& oracle,
                             const std::vector<Eigen::VectorXd>& value_embeds);

}  // namespace hmmtune
