// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "hmmtune/model.hpp"
#include "hmmtune/recovery.hpp"

namespace hmmtune {

enum class GradMode { kAnalytic, kFiniteDifference };

struct TrainConfig {
  double learning_rate = 0.01;
  int epochs = 5;
  int batch_size = 8;
  int prompt_len = 20;
  std::uint64_t seed = 0;
  GradMode grad_mode = GradMode::kAnalytic;
  // Softmax-attention annealing schedule and gaussian init scale.
  double temp_start = 2.0;
  double temp_end = 0.02;
  double init_scale = 0.1;
  // When > 0, replaces the derived update count below.
  int steps_override = 0;
};

// Training runs full batch, but the number of parameter updates matches a
// minibatch pass schedule: epochs * ceil(n / batch_size).
int train_steps(const TrainConfig& cfg, int n_examples);

double stable_sigmoid(double z);
// Mean binary cross-entropy, probabilities floored at 1e-300 inside the logs.
double logistic_loss(const Eigen::VectorXd& probs,
                     const std::vector<int>& labels);

// Loss traces below hold one entry per epoch (the full-batch loss entering
// that epoch) plus a final entry after the last update: length epochs + 1.

struct HeadTrainResult {
  LinearHead head;
  std::vector<double> losses;
};

// Full-batch logistic regression without bias, zero-initialized, plain
// gradient descent. Throws std::runtime_error if the loss turns non-finite.
HeadTrainResult train_linear_head(const Eigen::MatrixXd& features,
                                  const std::vector<int>& labels,
                                  const TrainConfig& cfg);

double head_accuracy(const Eigen::MatrixXd& features,
                     const std::vector<int>& labels, const LinearHead& head);

// Conditional token distribution at the masked first position:
// emission * P(H_1 | x_{-1}). All-zeros when the context has zero mass.
Eigen::VectorXd masked_h1_feature(const HmmParams& p,
                                  const std::vector<int>& tokens);
// Backward message at the masked first position (depends only on x_2..x_T);
// the per-sequence factor the prompt chain multiplies into.
Eigen::VectorXd beta_at_mask(const HmmParams& p,
                             const std::vector<int>& tokens);

struct VanillaFeatures {
  Eigen::MatrixXd g1;    // n x |Z|, rows = masked_h1_feature
  Eigen::MatrixXd beta;  // n x |H|, rows = beta_at_mask
};
// One message pass per sequence fills both feature blocks.
VanillaFeatures vanilla_features(const HmmParams& p,
                                 const std::vector<std::vector<int>>& seqs);

struct PromptTrainResult {
  Eigen::MatrixXd prompt;  // prompt_len x |H|, rows in [0,1]
  LinearHead head;
  std::vector<double> losses;
};

// Joint prompt + readout training. The classifier input is the conditional
// token distribution at a masked position preceded by the prompt vectors;
// because the prompt precedes the mask, the backward message at the mask
// (rows of beta_features) is fixed per sequence and the forward chain through
// the prompt is shared across sequences. Prompt entries initialize uniform
// [0.25, 0.75] and clamp to [0,1] after each step; the readout starts at
// zero. kFiniteDifference swaps the reverse-accumulated prompt gradient for
// central differences of the loss (step 1e-5); the readout gradient is
// analytic either way.
PromptTrainResult train_prompt(const HmmParams& p,
                               const Eigen::MatrixXd& beta_features,
                               const std::vector<int>& labels,
                               const TrainConfig& cfg);

// n x |Z| classifier inputs at the mask for a fixed prompt.
Eigen::MatrixXd prompt_features(const HmmParams& p,
                                const Eigen::MatrixXd& beta_features,
                                const Eigen::MatrixXd& prompt);

double prompt_loss(const HmmParams& p, const Eigen::MatrixXd& beta_features,
                   const std::vector<int>& labels,
                   const Eigen::MatrixXd& prompt, const LinearHead& head);

// dLoss/dPrompt by reverse accumulation through the message recursion with
// per-step scales frozen; exact because the readout is 0-homogeneous in the
// unnormalized posterior, so the frozen scales cancel.
Eigen::MatrixXd prompt_gradient(const HmmParams& p,
                                const Eigen::MatrixXd& beta_features,
                                const std::vector<int>& labels,
                                const Eigen::MatrixXd& prompt,
                                const LinearHead& head);

double prompt_accuracy(const HmmParams& p,
                       const Eigen::MatrixXd& beta_features,
                       const std::vector<int>& labels,
                       const Eigen::MatrixXd& prompt, const LinearHead& head);

// Memory-model per-position conditional outputs with position 1 masked:
// row i = emission * phi(tau_i) / |phi(tau_i)| over lifted-chain messages.
Eigen::MatrixXd mem_oracle_features(const MemHmmParams& p,
                                    const HmmParams& lifted,
                                    const std::vector<int>& tokens);

// Row 0 = all-ones (the masked position), row i = emission row of token
// x_{i+1}; T x (|M|*nh).
Eigen::MatrixXd value_embeddings(const MemHmmParams& p,
                                 const std::vector<int>& tokens);

struct AttentionTrainResult {
  AttentionHead head;  // offsets empty; evaluate with eval_attention
  std::vector<double> losses;
};

// Softmax attention over per-position key scores with the temperature
// annealed geometrically temp_start -> temp_end across the run; query, key,
// value, and weight parameters gaussian-initialized at init_scale and trained
// jointly by full-batch gradient descent. Evaluation stays the hard-argmax
// rule. All feature matrices must share one sequence length.
AttentionTrainResult train_attention_head(
    const MemHmmParams& p, const std::vector<Eigen::MatrixXd>& features,
    const std::vector<Eigen::MatrixXd>& value_embeds,
    const std::vector<int>& labels, const TrainConfig& cfg);

// Temperature-temp softmax relaxation of the attended-average score; matches
// eval_attention's hard score as temp -> 0 when the argmax is strict.
double softmax_attention_score(const AttentionHead& head,
                               const Eigen::MatrixXd& features,
                               const Eigen::MatrixXd& value_embeds,
                               double temp);

// Hard-argmax evaluation taking rows-as-positions matrices.
AttentionEval eval_attention_rows(const AttentionHead& head,
                                  const Eigen::MatrixXd& features,
                                  const Eigen::MatrixXd& value_embeds);

double attention_accuracy(const AttentionHead& head,
                          const std::vector<Eigen::MatrixXd>& features,
                          const std::vector<Eigen::MatrixXd>& value_embeds,
                          const std::vector<int>& labels);

}  // namespace hmmtune
