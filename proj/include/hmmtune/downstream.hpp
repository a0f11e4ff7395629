// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "hmmtune/inference.hpp"
#include "hmmtune/model.hpp"

namespace hmmtune {

struct TaskSpec {
  Eigen::VectorXd q_star;  // length |H| (vanilla) or |M| (memory)
  int j_star = 0;          // target cell, memory tasks only
  int k = 0;               // nonzero count
  std::uint64_t seed = 0;
};

// k positions chosen without replacement, values standard normal. The
// two-row argmax formulation reduces to the single difference vector, which
// yields identical labels, so only the vector form exists here.
TaskSpec make_task(std::uint64_t seed, int dim, int k);
TaskSpec make_task(SplitMix64& rng, int dim, int k);

enum class VanillaLabelVariant {
  kPosteriorH0,  // q_star^T P(H_0 | x), full evidence
  kMaskedH1,     // q_star^T P(H_1 | x_{-1}), position 1 masked
};

struct LabelResult {
  int label = 1;          // 1(margin >= 0)
  double margin = 0.0;    // the thresholded statistic
  bool in_support = true; // false when the evidence has zero probability
};

LabelResult label_vanilla(const HmmParams& p, const TaskSpec& task,
                          const std::vector<int>& tokens,
                          VanillaLabelVariant variant);

enum class MemoryLabelVariant {
  kFullEvidence,  // q_star^T P(M_{j_star} | x)
  kMasked,        // q_star^T P(M_{j_star} | x_{-1}), position 1 masked
};

LabelResult label_memory(const MemHmmParams& p, const HmmParams& lifted,
                         const TaskSpec& task, const std::vector<int>& tokens,
                         MemoryLabelVariant variant);

// Positions whose leave-one-out posterior over the syntax state is supported
// inside h_star (mass outside below support_tol).
std::vector<int> posterior_support_set(const MemHmmParams& p,
                                       const HmmParams& lifted,
                                       const std::vector<int>& h_star,
                                       const std::vector<int>& tokens,
                                       double support_tol = 1e-12);

// x is a member when some position concentrates on h_star.
bool membership_R(const MemHmmParams& p, const HmmParams& lifted,
                  const std::vector<int>& h_star,
                  const std::vector<int>& tokens,
                  double support_tol = 1e-12);

struct LabeledDataset {
  std::vector<std::vector<int>> sequences;
  std::vector<int> labels;
  std::string split;
  std::uint64_t seed = 0;     // generator seed of the bundle
  double balance = 0.0;       // fraction of label-1 examples
};

struct DatasetBundle {
  TaskSpec task;
  LabeledDataset train, val, test;
  int task_resamples = 0;  // degenerate tasks discarded before this one
};

// Masked-position-1 datasets (sequence length t_len, position 1 masked for
// labeling). A task whose train split has minority fraction < 0.05 is
// discarded and redrawn, up to 20 attempts, then a std::runtime_error with
// the attempted balances is thrown.
DatasetBundle gen_dataset(const HmmParams& p, int task_k, int n_train,
                          int n_val, int n_test, int t_len,
                          std::uint64_t seed);
DatasetBundle gen_dataset(const MemHmmParams& p, const HmmParams& lifted,
                          int j_star, int task_k, int n_train, int n_val,
                          int n_test, int t_len, std::uint64_t seed);

}  // namespace hmmtune
