// SPDX-License-Identifier: Apache-2.0
#include "hmmtune/downstream.hpp"

#include <algorithm>
#include <set>
#include <sstream>
#include <stdexcept>

namespace hmmtune {

TaskSpec make_task(SplitMix64& rng, int dim, int k) {
  if (k > dim) throw std::invalid_argument("make_task: k > dim");
  TaskSpec t;
  t.k = k;
  t.q_star = Eigen::VectorXd::Zero(dim);
  for (int idx : rng.choose_without_replacement(dim, k))
    t.q_star(idx) = rng.normal();
  return t;
}

TaskSpec make_task(std::uint64_t seed, int dim, int k) {
  SplitMix64 rng(seed);
  TaskSpec t = make_task(rng, dim, k);
  t.seed = seed;
  return t;
}

LabelResult label_vanilla(const HmmParams& p, const TaskSpec& task,
                          const std::vector<int>& tokens,
                          VanillaLabelVariant variant) {
  LabelResult r;
  if (variant == VanillaLabelVariant::kPosteriorH0) {
    const HiddenPosteriors posts = hidden_posteriors(p, embed_tokens(p, tokens));
    r.in_support = posts.h0.sum() > 0.0;
    r.margin = task.q_star.dot(posts.h0);
  } else {
    const HiddenPosteriors posts =
        hidden_posteriors(p, embed_tokens(p, tokens, {0}));
    r.in_support = posts.per_position[0].sum() > 0.0;
    r.margin = task.q_star.dot(posts.per_position[0]);
  }
  r.label = r.margin >= 0.0 ? 1 : 0;
  return r;
}

LabelResult label_memory(const MemHmmParams& p, const HmmParams& lifted,
                         const TaskSpec& task, const std::vector<int>& tokens,
                         MemoryLabelVariant variant) {
  const std::set<int> masked =
      variant == MemoryLabelVariant::kMasked ? std::set<int>{0} : std::set<int>{};
  const EmbeddingSeq v = embed_tokens(lifted, tokens, masked);
  const Eigen::VectorXd post = full_posterior_last(lifted, v);
  LabelResult r;
  r.in_support = post.sum() > 0.0;
  const Eigen::MatrixXd joint = mem_joint_mem_hidden(p, post, task.j_star);
  r.margin = task.q_star.dot(joint.rowwise().sum());
  r.label = r.margin >= 0.0 ? 1 : 0;
  return r;
}

std::vector<int> posterior_support_set(const MemHmmParams& p,
                                       const HmmParams& lifted,
                                       const std::vector<int>& h_star,
                                       const std::vector<int>& tokens,
                                       double support_tol) {
  const std::set<int> hs(h_star.begin(), h_star.end());
  const HiddenPosteriors posts =
      hidden_posteriors(lifted, embed_tokens(lifted, tokens));
  std::vector<int> out;
  for (std::size_t i = 0; i < posts.per_position.size(); ++i) {
    const Eigen::VectorXd ph = mem_marginal_hidden(p, posts.per_position[i]);
    if (ph.sum() <= 0.0) continue;
    double out_mass = 0.0;
    for (int h = 0; h < p.n_hidden(); ++h)
      if (hs.count(h) == 0) out_mass += ph(h);
    if (out_mass < support_tol) out.push_back(static_cast<int>(i));
  }
  return out;
}

bool membership_R(const MemHmmParams& p, const HmmParams& lifted,
                  const std::vector<int>& h_star,
                  const std::vector<int>& tokens, double support_tol) {
  return !posterior_support_set(p, lifted, h_star, tokens, support_tol).empty();
}

namespace {

template <typename SampleFn, typename LabelFn>
DatasetBundle gen_dataset_impl(int dim_task, int task_k, int n_train, int n_val,
                               int n_test, std::uint64_t seed,
                               SampleFn sample_one, LabelFn label_one) {
  if (n_train < 1 || n_val < 1 || n_test < 1)
    throw std::invalid_argument("gen_dataset: counts must be positive");
  SplitMix64 rng(seed);
  std::vector<double> balances;
  for (int attempt = 0; attempt < 20; ++attempt) {
    DatasetBundle b;
    b.task = make_task(rng, dim_task, task_k);
    b.task.seed = seed;
    b.task_resamples = attempt;
    const auto fill = [&](LabeledDataset& ds, const char* split, int n) {
      ds.split = split;
      ds.seed = seed;
      int ones = 0;
      for (int i = 0; i < n; ++i) {
        std::vector<int> tokens = sample_one(rng);
        const int label = label_one(b.task, tokens);
        ones += label;
        ds.sequences.push_back(std::move(tokens));
        ds.labels.push_back(label);
      }
      ds.balance = static_cast<double>(ones) / n;
    };
    fill(b.train, "train", n_train);
    const double minority = std::min(b.train.balance, 1.0 - b.train.balance);
    balances.push_back(b.train.balance);
    if (minority < 0.05) continue;
    fill(b.val, "val", n_val);
    fill(b.test, "test", n_test);
    return b;
  }
  std::ostringstream os;
  os << "gen_dataset: 20 consecutive degenerate tasks; train balances:";
  for (double v : balances) os << " " << v;
  throw std::runtime_error(os.str());
}

}  // namespace

DatasetBundle gen_dataset(const HmmParams& p, int task_k, int n_train,
                          int n_val, int n_test, int t_len,
                          std::uint64_t seed) {
  return gen_dataset_impl(
      p.n_hidden, task_k, n_train, n_val, n_test, seed,
      [&](SplitMix64& rng) { return sample_sequence(p, t_len, rng).tokens; },
      [&](const TaskSpec& task, const std::vector<int>& tokens) {
        return label_vanilla(p, task, tokens, VanillaLabelVariant::kMaskedH1)
            .label;
      });
}

DatasetBundle gen_dataset(const MemHmmParams& p, const HmmParams& lifted,
                          int j_star, int task_k, int n_train, int n_val,
                          int n_test, int t_len, std::uint64_t seed) {
  DatasetBundle b = gen_dataset_impl(
      p.mem_size, task_k, n_train, n_val, n_test, seed,
      [&](SplitMix64& rng) { return sample_sequence(p, t_len, rng).tokens; },
      [&](const TaskSpec& task, const std::vector<int>& tokens) {
        TaskSpec t = task;
        t.j_star = j_star;
        return label_memory(p, lifted, t, tokens, MemoryLabelVariant::kMasked)
            .label;
      });
  b.task.j_star = j_star;
  return b;
}

}  // namespace hmmtune
