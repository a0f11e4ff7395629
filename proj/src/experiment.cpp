// SPDX-License-Identifier: Apache-2.0
#include "hmmtune/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "hmmtune/assumptions.hpp"
#include "hmmtune/downstream.hpp"
#include "hmmtune/families.hpp"
#include "hmmtune/inference.hpp"
#include "hmmtune/recovery.hpp"

namespace hmmtune {
namespace {

constexpr double kMarginTol = 1e-9;
constexpr double kOracleTol = 1e-10;
constexpr double kZ95 = 1.959963984540054;

std::string csv_int(long v) { return std::to_string(v); }
std::string csv_u64(std::uint64_t v) { return std::to_string(v); }
std::string csv_bool(bool v) { return v ? "1" : "0"; }
std::string json_u64(std::uint64_t v) { return std::to_string(v); }

struct Agg {
  double mean = 0.0;
  double ci95 = 0.0;
  int n = 0;
};

Agg aggregate(const std::vector<double>& xs) {
  Agg a;
  a.n = static_cast<int>(xs.size());
  if (a.n == 0) return a;
  double sum = 0.0;
  for (double x : xs) sum += x;
  a.mean = sum / a.n;
  if (a.n > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - a.mean) * (x - a.mean);
    double sd = std::sqrt(ss / (a.n - 1));
    a.ci95 = kZ95 * sd / std::sqrt(static_cast<double>(a.n));
  }
  return a;
}

std::vector<std::string> rendered_doubles(const std::vector<double>& xs) {
  std::vector<std::string> out;
  out.reserve(xs.size());
  for (double x : xs) out.push_back(json_number(x));
  return out;
}

std::vector<std::string> rendered_bools(const std::vector<bool>& xs) {
  std::vector<std::string> out;
  out.reserve(xs.size());
  for (bool x : xs) out.push_back(json_bool(x));
  return out;
}

std::vector<std::string> rendered_ints(const std::vector<int>& xs) {
  std::vector<std::string> out;
  out.reserve(xs.size());
  for (int x : xs) out.push_back(json_int(x));
  return out;
}

bool same_index_set(std::vector<int> a, std::vector<int> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  return a == b;
}

// ------------------------------------------------------------- oracle-test

ExperimentReport run_oracle_test(const ExperimentConfig& cfg) {
  ExperimentReport rep;
  rep.table.header = {"row",      "trial",   "seed",        "n_hidden",
                      "n_vocab",  "t_len",   "n_masked",    "max_abs_diff"};
  double worst = 0.0;
  for (int i = 0; i < cfg.trials; ++i) {
    std::uint64_t ts = derive_seed(cfg.seed, static_cast<std::uint64_t>(i));
    SplitMix64 rng(ts);
    int nh = 2 + static_cast<int>(rng.below(5));
    int nz = 2 + static_cast<int>(rng.below(5));
    int t = 1 + static_cast<int>(rng.below(6));
    HmmParams p = random_hmm(rng, nh, nz);
    std::vector<int> xs = sample_sequence(p, t, rng).tokens;
    std::set<int> masked;
    for (int pos = 0; pos < t; ++pos)
      if (rng.uniform() < 0.5) masked.insert(pos);
    if (masked.empty()) masked.insert(static_cast<int>(rng.below(t)));
    std::vector<Eigen::VectorXd> oracle = mlm_oracle(p, xs, masked);
    std::vector<Eigen::MatrixXd> emis(t, p.emission);
    std::map<int, Eigen::VectorXd> exact =
        enumerate_conditionals(p.transition, p.start, emis, xs, masked);
    double diff = 0.0;
    for (const auto& [pos, expected] : exact)
      diff = std::max(diff, (oracle[pos] - expected).cwiseAbs().maxCoeff());
    worst = std::max(worst, diff);
    rep.table.rows.push_back({"trial", csv_int(i), csv_u64(ts), csv_int(nh),
                              csv_int(nz), csv_int(t),
                              csv_int(static_cast<long>(masked.size())),
                              format_double(diff)});
  }
  rep.table.rows.push_back(
      {"aggregate", "", "", "", "", "", "", format_double(worst)});
  rep.pass = worst <= kOracleTol;
  rep.summary_json = json_object({
      {"kind", json_string(kind_name(cfg.kind))},
      {"seed", json_u64(cfg.seed)},
      {"trials", json_int(cfg.trials)},
      {"tolerance", json_number(kOracleTol)},
      {"max_abs_diff", json_number(worst)},
      {"pass", json_bool(rep.pass)},
  });
  return rep;
}

// --------------------------------------------------------------- theorem-1

ExperimentReport run_theorem1(const ExperimentConfig& cfg) {
  ExperimentReport rep;
  rep.table.header = {"row",     "trial",      "seed",
                      "resamples", "emissions_pass", "regularity_pass",
                      "sequences", "checked",   "agree",
                      "agreement"};
  long total_checked = 0, total_agree = 0;
  bool all_ok = true;
  std::vector<std::string> verdicts;
  for (int i = 0; i < cfg.trials; ++i) {
    std::uint64_t ts = derive_seed(cfg.seed, static_cast<std::uint64_t>(i));
    SplitMix64 rng(ts);
    HmmParams p;
    int resamples = 0;
    bool a1 = false, a2 = false;
    for (;;) {
      p = random_hmm(rng, cfg.n_hidden, cfg.n_vocab);
      a1 = check_nondegenerate_emissions(p.emission).pass;
      a2 = check_regularity(p);
      if (a1 && a2) break;
      if (++resamples > 100)
        throw std::runtime_error("trial " + std::to_string(i) +
                                 ": no model passing both checks in 100 draws");
    }
    TaskSpec task = make_task(rng, cfg.n_hidden,
                              std::min(cfg.task_k, cfg.n_hidden));
    LinearHead head = construct_linear_head_thm1(p, task.q_star);
    long checked = 0, agree = 0;
    for (int s = 0; s < cfg.n_sequences; ++s) {
      std::vector<int> xs = sample_sequence(p, cfg.t_len, rng).tokens;
      LabelResult gt =
          label_vanilla(p, task, xs, VanillaLabelVariant::kPosteriorH0);
      if (!gt.in_support || std::abs(gt.margin) <= kMarginTol) continue;
      double score = linear_head_score(p, head, xs);
      ++checked;
      agree += ((score >= 0.0 ? 1 : 0) == gt.label) ? 1 : 0;
    }
    total_checked += checked;
    total_agree += agree;
    if (checked == 0 || agree != checked) all_ok = false;
    double agreement = checked > 0 ? static_cast<double>(agree) / checked : 0.0;
    rep.table.rows.push_back({"trial", csv_int(i), csv_u64(ts),
                              csv_int(resamples), csv_bool(a1), csv_bool(a2),
                              csv_int(cfg.n_sequences), csv_int(checked),
                              csv_int(agree), format_double(agreement)});
    verdicts.push_back(json_object({{"trial", json_int(i)},
                                    {"emissions", json_bool(a1)},
                                    {"regularity", json_bool(a2)}}));
  }
  double agreement =
      total_checked > 0 ? static_cast<double>(total_agree) / total_checked : 0.0;
  rep.table.rows.push_back({"aggregate", "", "", "", "", "", "",
                            csv_int(total_checked), csv_int(total_agree),
                            format_double(agreement)});
  rep.pass = all_ok && total_checked > 0;
  rep.summary_json = json_object({
      {"kind", json_string(kind_name(cfg.kind))},
      {"seed", json_u64(cfg.seed)},
      {"trials", json_int(cfg.trials)},
      {"n_hidden", json_int(cfg.n_hidden)},
      {"n_vocab", json_int(cfg.n_vocab)},
      {"sequences_per_trial", json_int(cfg.n_sequences)},
      {"margin_tol", json_number(kMarginTol)},
      {"assumption_verdicts", json_array(verdicts)},
      {"total_checked", json_int(total_checked)},
      {"total_agree", json_int(total_agree)},
      {"agreement", json_number(agreement)},
      {"pass", json_bool(rep.pass)},
  });
  return rep;
}

// --------------------------------------------------------------- theorem-2

ExperimentReport run_theorem2(const ExperimentConfig& cfg) {
  ExperimentReport rep;
  rep.table.header = {"row",       "trial",   "seed",    "n_hidden",
                      "relaxed_pass", "resamples", "sequences", "checked",
                      "agree",     "agreement"};
  long total_checked = 0, total_agree = 0;
  bool all_ok = true;
  std::vector<std::string> verdicts;
  for (int i = 0; i < cfg.trials; ++i) {
    int nh = cfg.sweep_sizes[i % cfg.sweep_sizes.size()];
    std::uint64_t ts = derive_seed(cfg.seed, static_cast<std::uint64_t>(i));
    SplitMix64 rng(ts);
    DegenerateFamily fam;
    Eigen::VectorXd q;
    RelaxedCertificate cert;
    int resamples = 0;
    for (;;) {
      fam = build_degenerate_family(rng, nh, cfg.n_vocab, cfg.h_star_size);
      int k = std::min(cfg.task_k, static_cast<int>(fam.h_star.size()));
      std::vector<int> idx = rng.choose_without_replacement(
          static_cast<int>(fam.h_star.size()), k);
      q = Eigen::VectorXd::Zero(nh);
      for (int j : idx) q(fam.h_star[j]) = rng.normal();
      cert = check_relaxed_vanilla(fam.params, q, fam.h_star, fam.b_set);
      if (cert.pass) break;
      if (++resamples > 50)
        throw std::runtime_error("trial " + std::to_string(i) +
                                 ": no certified family in 50 draws: " +
                                 cert.reason);
    }
    PromptHead ph = construct_prompt_head_thm2(fam.params, q, fam.h_star,
                                               fam.b_set);
    TaskSpec task;
    task.q_star = q;
    long checked = 0, agree = 0;
    for (int s = 0; s < cfg.n_sequences; ++s) {
      std::vector<int> xs = sample_sequence(fam.params, cfg.t_len, rng).tokens;
      LabelResult gt = label_vanilla(fam.params, task, xs,
                                     VanillaLabelVariant::kPosteriorH0);
      if (!gt.in_support || std::abs(gt.margin) <= kMarginTol) continue;
      double score = prompt_head_score(fam.params, ph, xs);
      ++checked;
      agree += ((score >= 0.0 ? 1 : 0) == gt.label) ? 1 : 0;
    }
    total_checked += checked;
    total_agree += agree;
    if (checked == 0 || agree != checked) all_ok = false;
    double agreement = checked > 0 ? static_cast<double>(agree) / checked : 0.0;
    rep.table.rows.push_back({"trial", csv_int(i), csv_u64(ts), csv_int(nh),
                              csv_bool(cert.pass), csv_int(resamples),
                              csv_int(cfg.n_sequences), csv_int(checked),
                              csv_int(agree), format_double(agreement)});
    verdicts.push_back(json_object({{"trial", json_int(i)},
                                    {"n_hidden", json_int(nh)},
                                    {"relaxed", json_bool(cert.pass)}}));
  }
  double agreement =
      total_checked > 0 ? static_cast<double>(total_agree) / total_checked : 0.0;
  rep.table.rows.push_back({"aggregate", "", "", "", "", "", "",
                            csv_int(total_checked), csv_int(total_agree),
                            format_double(agreement)});
  rep.pass = all_ok && total_checked > 0;
  rep.summary_json = json_object({
      {"kind", json_string(kind_name(cfg.kind))},
      {"seed", json_u64(cfg.seed)},
      {"trials", json_int(cfg.trials)},
      {"sizes", json_array(rendered_ints(cfg.sweep_sizes))},
      {"n_vocab", json_int(cfg.n_vocab)},
      {"h_star_size", json_int(cfg.h_star_size)},
      {"sequences_per_trial", json_int(cfg.n_sequences)},
      {"margin_tol", json_number(kMarginTol)},
      {"assumption_verdicts", json_array(verdicts)},
      {"total_checked", json_int(total_checked)},
      {"total_agree", json_int(total_agree)},
      {"agreement", json_number(agreement)},
      {"pass", json_bool(rep.pass)},
  });
  return rep;
}

// --------------------------------------------------------------- theorem-3

ExperimentReport run_theorem3(const ExperimentConfig& cfg) {
  ExperimentReport rep;
  rep.table.header = {"row",        "trial",     "seed",
                      "mem_size",   "certificate_pass", "resamples",
                      "sequences",  "in_support", "checked",
                      "agree",      "attended_match", "agreement"};
  long total_checked = 0, total_agree = 0, total_attended = 0;
  long total_seqs = 0, total_in_support = 0;
  bool all_ok = true;
  std::vector<std::string> verdicts;
  for (int i = 0; i < cfg.trials; ++i) {
    int nm = cfg.sweep_sizes[i % cfg.sweep_sizes.size()];
    std::uint64_t ts = derive_seed(cfg.seed, static_cast<std::uint64_t>(i));
    SplitMix64 rng(ts);
    DesignedMemFamily fam;
    Eigen::VectorXd q;
    AttentionConstruction att;
    int resamples = 0;
    for (;;) {
      fam = build_designed_mem_family(rng, cfg.n_cells, nm, cfg.syntax_size,
                                      cfg.n_vocab, cfg.s_star_size,
                                      /*j_star=*/0);
      q = rng.normal_vec(nm);
      att = construct_attention_thm3(fam.params, q, 0, fam.s_star);
      if (att.ok) break;
      if (++resamples > 50)
        throw std::runtime_error("trial " + std::to_string(i) +
                                 ": no certified model in 50 draws: " +
                                 att.reason);
    }
    HmmParams lifted = lift_mem_hmm(fam.params);
    TaskSpec task;
    task.q_star = q;
    task.j_star = 0;
    long in_support = 0, checked = 0, agree = 0, attended_ok = 0;
    for (int s = 0; s < cfg.n_sequences; ++s) {
      std::vector<int> xs = sample_sequence(fam.params, cfg.t_len, rng).tokens;
      std::vector<int> ihat =
          posterior_support_set(fam.params, lifted, att.h_star, xs);
      if (ihat.empty()) continue;
      ++in_support;
      LabelResult gt = label_memory(fam.params, lifted, task, xs,
                                    MemoryLabelVariant::kFullEvidence);
      if (!gt.in_support || std::abs(gt.margin) <= kMarginTol) continue;
      std::vector<Eigen::VectorXd> oracle = mlm_oracle(lifted, xs, {});
      std::vector<Eigen::VectorXd> value_rows;
      value_rows.reserve(xs.size());
      for (int x : xs) value_rows.push_back(proper_embedding(fam.params, x));
      AttentionEval ev = eval_attention(att.head, oracle, value_rows);
      ++checked;
      agree += (ev.label == gt.label) ? 1 : 0;
      attended_ok += same_index_set(ev.attended, ihat) ? 1 : 0;
    }
    total_seqs += cfg.n_sequences;
    total_in_support += in_support;
    total_checked += checked;
    total_agree += agree;
    total_attended += attended_ok;
    if (checked == 0 || agree != checked || attended_ok != checked)
      all_ok = false;
    double agreement = checked > 0 ? static_cast<double>(agree) / checked : 0.0;
    rep.table.rows.push_back(
        {"trial", csv_int(i), csv_u64(ts), csv_int(nm), csv_bool(att.ok),
         csv_int(resamples), csv_int(cfg.n_sequences), csv_int(in_support),
         csv_int(checked), csv_int(agree), csv_int(attended_ok),
         format_double(agreement)});
    verdicts.push_back(json_object({{"trial", json_int(i)},
                                    {"mem_size", json_int(nm)},
                                    {"span_disjoint", json_bool(att.ok)}}));
  }
  double agreement =
      total_checked > 0 ? static_cast<double>(total_agree) / total_checked : 0.0;
  rep.table.rows.push_back({"aggregate", "", "", "", "", "",
                            csv_int(total_seqs), csv_int(total_in_support),
                            csv_int(total_checked), csv_int(total_agree),
                            csv_int(total_attended), format_double(agreement)});
  rep.pass = all_ok && total_checked > 0;
  rep.summary_json = json_object({
      {"kind", json_string(kind_name(cfg.kind))},
      {"seed", json_u64(cfg.seed)},
      {"trials", json_int(cfg.trials)},
      {"mem_sizes", json_array(rendered_ints(cfg.sweep_sizes))},
      {"syntax_size", json_int(cfg.syntax_size)},
      {"s_star_size", json_int(cfg.s_star_size)},
      {"sequences_per_trial", json_int(cfg.n_sequences)},
      {"margin_tol", json_number(kMarginTol)},
      {"assumption_verdicts", json_array(verdicts)},
      {"total_sequences", json_int(total_seqs)},
      {"in_support", json_int(total_in_support)},
      {"total_checked", json_int(total_checked)},
      {"total_agree", json_int(total_agree)},
      {"attended_match", json_int(total_attended)},
      {"agreement", json_number(agreement)},
      {"pass", json_bool(rep.pass)},
  });
  return rep;
}

// --------------------------------------------------------------- theorem-4

ExperimentReport run_theorem4(const ExperimentConfig& cfg) {
  ExperimentReport rep;
  rep.table.header = {"row",       "trial",    "seed",       "n_cells",
                      "mem_size",  "syntax_size", "certificate_pass",
                      "resamples", "sequences", "in_support", "checked",
                      "agree",     "attended_match", "agreement"};
  struct Variant {
    int n_cells, mem_size, syntax_size;
  };
  const Variant variants[3] = {{1, 2, 4}, {1, 3, 4}, {2, 2, 2}};
  long total_checked = 0, total_agree = 0, total_attended = 0;
  long total_seqs = 0, total_in_support = 0;
  bool all_ok = true;
  std::vector<std::string> verdicts;
  for (int i = 0; i < cfg.trials; ++i) {
    Variant var = variants[i % 3];
    int j_star = var.n_cells == 1 ? 0 : 1;
    std::uint64_t ts = derive_seed(cfg.seed, static_cast<std::uint64_t>(i));
    SplitMix64 rng(ts);
    DesignedMemFamily fam;
    TaskSpec task;
    PromptAttention pa;
    int resamples = 0;
    for (;;) {
      task = make_task(rng, var.mem_size,
                       std::min(cfg.task_k, var.mem_size));
      fam = build_designed_mem_family(rng, var.n_cells, var.mem_size,
                                      var.syntax_size, cfg.n_vocab,
                                      cfg.s_star_size, j_star,
                                      /*stationary_start=*/true);
      pa = construct_prompt_attention_thm4(fam.params, task.q_star, j_star,
                                           fam.s_star);
      if (pa.ok) break;
      if (++resamples > 50)
        throw std::runtime_error("trial " + std::to_string(i) +
                                 ": no certified model in 50 draws: " +
                                 pa.reason);
    }
    HmmParams lifted = lift_mem_hmm(fam.params);
    task.j_star = j_star;
    long in_support = 0, checked = 0, agree = 0, attended_ok = 0;
    for (int s = 0; s < cfg.n_sequences; ++s) {
      std::vector<int> xs = sample_sequence(fam.params, cfg.t_len, rng).tokens;
      std::vector<int> ihat =
          posterior_support_set(fam.params, lifted, pa.h_star, xs);
      if (ihat.empty()) continue;
      ++in_support;
      for (int& pos : ihat) ++pos;  // the prompt shifts every position by one
      LabelResult gt = label_memory(fam.params, lifted, task, xs,
                                    MemoryLabelVariant::kFullEvidence);
      if (!gt.in_support || std::abs(gt.margin) <= kMarginTol) continue;
      EmbeddingSeq prompted;
      prompted.reserve(xs.size() + 1);
      prompted.push_back(pa.prompt.entries);
      for (int x : xs) prompted.push_back(proper_embedding(lifted, x));
      std::vector<Eigen::VectorXd> oracle = gbar_mem(fam.params, lifted,
                                                     prompted);
      std::vector<Eigen::VectorXd> value_rows;
      value_rows.reserve(prompted.size());
      for (const auto& v : prompted)
        value_rows.push_back(reverse_lift(fam.params, v));
      AttentionEval ev = eval_attention(pa.head, oracle, value_rows);
      ++checked;
      agree += (ev.label == gt.label) ? 1 : 0;
      attended_ok += same_index_set(ev.attended, ihat) ? 1 : 0;
    }
    total_seqs += cfg.n_sequences;
    total_in_support += in_support;
    total_checked += checked;
    total_agree += agree;
    total_attended += attended_ok;
    if (checked == 0 || agree != checked || attended_ok != checked)
      all_ok = false;
    double agreement = checked > 0 ? static_cast<double>(agree) / checked : 0.0;
    rep.table.rows.push_back(
        {"trial", csv_int(i), csv_u64(ts), csv_int(var.n_cells),
         csv_int(var.mem_size), csv_int(var.syntax_size), csv_bool(pa.ok),
         csv_int(resamples), csv_int(cfg.n_sequences), csv_int(in_support),
         csv_int(checked), csv_int(agree), csv_int(attended_ok),
         format_double(agreement)});
    verdicts.push_back(json_object({{"trial", json_int(i)},
                                    {"n_cells", json_int(var.n_cells)},
                                    {"mem_size", json_int(var.mem_size)},
                                    {"syntax_size", json_int(var.syntax_size)},
                                    {"span_disjoint", json_bool(pa.ok)}}));
  }
  double agreement =
      total_checked > 0 ? static_cast<double>(total_agree) / total_checked : 0.0;
  rep.table.rows.push_back({"aggregate", "", "", "", "", "", "", "",
                            csv_int(total_seqs), csv_int(total_in_support),
                            csv_int(total_checked), csv_int(total_agree),
                            csv_int(total_attended), format_double(agreement)});
  rep.pass = all_ok && total_checked > 0;
  rep.summary_json = json_object({
      {"kind", json_string(kind_name(cfg.kind))},
      {"seed", json_u64(cfg.seed)},
      {"trials", json_int(cfg.trials)},
      {"s_star_size", json_int(cfg.s_star_size)},
      {"sequences_per_trial", json_int(cfg.n_sequences)},
      {"margin_tol", json_number(kMarginTol)},
      {"assumption_verdicts", json_array(verdicts)},
      {"total_sequences", json_int(total_seqs)},
      {"in_support", json_int(total_in_support)},
      {"total_checked", json_int(total_checked)},
      {"total_agree", json_int(total_agree)},
      {"attended_match", json_int(total_attended)},
      {"agreement", json_number(agreement)},
      {"pass", json_bool(rep.pass)},
  });
  return rep;
}

// ------------------------------------------------- sweep: head vs prompt

ExperimentReport run_sweep_head_vs_prompt(const ExperimentConfig& cfg) {
  ExperimentReport rep;
  rep.table.header = {"row",          "size",        "trial",
                      "seed",         "emissions_pass", "regularity_pass",
                      "task_resamples", "head_test_acc", "prompt_test_acc",
                      "head_mean",    "head_ci95",   "prompt_mean",
                      "prompt_ci95",  "gap"};
  std::vector<std::string> per_size_json;
  bool pass = true;
  int largest = *std::max_element(cfg.sweep_sizes.begin(),
                                  cfg.sweep_sizes.end());
  double largest_gap = 0.0;
  for (size_t si = 0; si < cfg.sweep_sizes.size(); ++si) {
    int size = cfg.sweep_sizes[si];
    std::vector<double> head_acc, prompt_acc;
    std::vector<bool> a1s, a2s;
    for (int tr = 0; tr < cfg.trials; ++tr) {
      std::uint64_t ts = derive_seed(cfg.seed, static_cast<std::uint64_t>(si),
                                     static_cast<std::uint64_t>(tr));
      SplitMix64 rng(ts);
      HmmParams p = random_hmm(rng, size, cfg.n_vocab);
      bool a1 = check_nondegenerate_emissions(p.emission).pass;
      bool a2 = check_regularity(p);
      std::uint64_t data_seed = rng.next_u64();
      DatasetBundle bundle =
          gen_dataset(p, std::min(cfg.task_k, size), cfg.n_train, cfg.n_val,
                      cfg.n_test, cfg.t_len, data_seed);
      VanillaFeatures ftr = vanilla_features(p, bundle.train.sequences);
      VanillaFeatures fte = vanilla_features(p, bundle.test.sequences);
      TrainConfig tc = cfg.train;
      tc.seed = rng.next_u64();
      HeadTrainResult hres =
          train_linear_head(ftr.g1, bundle.train.labels, tc);
      double hacc = head_accuracy(fte.g1, bundle.test.labels, hres.head);
      PromptTrainResult pres =
          train_prompt(p, ftr.beta, bundle.train.labels, tc);
      double pacc = prompt_accuracy(p, fte.beta, bundle.test.labels,
                                    pres.prompt, pres.head);
      head_acc.push_back(hacc);
      prompt_acc.push_back(pacc);
      a1s.push_back(a1);
      a2s.push_back(a2);
      rep.table.rows.push_back({"trial", csv_int(size), csv_int(tr),
                                csv_u64(ts), csv_bool(a1), csv_bool(a2),
                                csv_int(bundle.task_resamples),
                                format_double(hacc), format_double(pacc), "",
                                "", "", "", ""});
    }
    Agg ha = aggregate(head_acc);
    Agg pa = aggregate(prompt_acc);
    double gap = pa.mean - ha.mean;
    if (size == largest) largest_gap = gap;
    if (cfg.thresholds.require_prompt_ge_head && pa.mean < ha.mean)
      pass = false;
    rep.table.rows.push_back({"aggregate", csv_int(size), "", "", "", "", "",
                              "", "", format_double(ha.mean),
                              format_double(ha.ci95), format_double(pa.mean),
                              format_double(pa.ci95), format_double(gap)});
    per_size_json.push_back(json_object({
        {"size", json_int(size)},
        {"head_acc", json_array(rendered_doubles(head_acc))},
        {"prompt_acc", json_array(rendered_doubles(prompt_acc))},
        {"head_mean", json_number(ha.mean)},
        {"head_ci95", json_number(ha.ci95)},
        {"prompt_mean", json_number(pa.mean)},
        {"prompt_ci95", json_number(pa.ci95)},
        {"gap", json_number(gap)},
        {"emissions_pass", json_array(rendered_bools(a1s))},
        {"regularity_pass", json_array(rendered_bools(a2s))},
    }));
  }
  if (largest_gap < cfg.thresholds.min_final_gap) pass = false;
  rep.pass = pass;
  rep.summary_json = json_object({
      {"kind", json_string(kind_name(cfg.kind))},
      {"seed", json_u64(cfg.seed)},
      {"trials", json_int(cfg.trials)},
      {"sizes", json_array(rendered_ints(cfg.sweep_sizes))},
      {"n_vocab", json_int(cfg.n_vocab)},
      {"t_len", json_int(cfg.t_len)},
      {"n_train", json_int(cfg.n_train)},
      {"n_val", json_int(cfg.n_val)},
      {"n_test", json_int(cfg.n_test)},
      {"per_size", json_array(per_size_json)},
      {"largest_size", json_int(largest)},
      {"largest_gap", json_number(largest_gap)},
      {"thresholds",
       json_object({{"require_prompt_ge_head",
                     json_bool(cfg.thresholds.require_prompt_ge_head)},
                    {"min_final_gap",
                     json_number(cfg.thresholds.min_final_gap)}})},
      {"pass", json_bool(rep.pass)},
  });
  return rep;
}

// --------------------------------------------------------- sweep: memory

ExperimentReport run_sweep_memory(const ExperimentConfig& cfg) {
  ExperimentReport rep;
  rep.table.header = {"row",          "mem_size",     "trial",
                      "seed",         "mem_emissions_pass",
                      "baseline_emissions_pass", "baseline_regularity_pass",
                      "attention_test_acc", "baseline_test_acc",
                      "attention_mean", "attention_ci95", "baseline_mean",
                      "baseline_ci95"};
  std::vector<std::string> per_size_json;
  bool pass = true;
  for (size_t si = 0; si < cfg.sweep_sizes.size(); ++si) {
    int nm = cfg.sweep_sizes[si];
    std::vector<double> att_acc, base_acc;
    std::vector<bool> mem_a1s, base_a1s, base_a2s;
    for (int tr = 0; tr < cfg.trials; ++tr) {
      std::uint64_t ts = derive_seed(cfg.seed, static_cast<std::uint64_t>(si),
                                     static_cast<std::uint64_t>(tr));
      SplitMix64 rng(ts);
      MemHmmParams mp = random_mem_hmm(rng, cfg.n_cells, nm, cfg.syntax_size,
                                       cfg.n_vocab);
      HmmParams lifted = lift_mem_hmm(mp);
      bool mem_a1 = check_nondegenerate_emissions(mp.emission).pass;
      std::uint64_t data_seed = rng.next_u64();
      DatasetBundle bundle =
          gen_dataset(mp, lifted, /*j_star=*/0, std::min(cfg.task_k, nm),
                      cfg.n_train, cfg.n_val, cfg.n_test, cfg.t_len,
                      data_seed);
      std::vector<Eigen::MatrixXd> ftr, etr, fte, ete;
      ftr.reserve(bundle.train.sequences.size());
      etr.reserve(bundle.train.sequences.size());
      for (const auto& xs : bundle.train.sequences) {
        ftr.push_back(mem_oracle_features(mp, lifted, xs));
        etr.push_back(value_embeddings(mp, xs));
      }
      fte.reserve(bundle.test.sequences.size());
      ete.reserve(bundle.test.sequences.size());
      for (const auto& xs : bundle.test.sequences) {
        fte.push_back(mem_oracle_features(mp, lifted, xs));
        ete.push_back(value_embeddings(mp, xs));
      }
      TrainConfig tc = cfg.train;
      tc.seed = rng.next_u64();
      AttentionTrainResult ares =
          train_attention_head(mp, ftr, etr, bundle.train.labels, tc);
      double aacc =
          attention_accuracy(ares.head, fte, ete, bundle.test.labels);

      // Baseline arm: vanilla model with the same total hidden dimension
      // |M|*|H|, head-tuned on the masked-position conditionals with the
      // same step count and learning rate.
      int base_nh = nm * mp.n_hidden();
      HmmParams vp = random_hmm(rng, base_nh, cfg.n_vocab);
      bool base_a1 = check_nondegenerate_emissions(vp.emission).pass;
      bool base_a2 = check_regularity(vp);
      DatasetBundle vb =
          gen_dataset(vp, std::min(cfg.task_k, base_nh), cfg.n_train,
                      cfg.n_val, cfg.n_test, cfg.t_len, rng.next_u64());
      VanillaFeatures vftr = vanilla_features(vp, vb.train.sequences);
      VanillaFeatures vfte = vanilla_features(vp, vb.test.sequences);
      HeadTrainResult bres = train_linear_head(vftr.g1, vb.train.labels, tc);
      double bacc = head_accuracy(vfte.g1, vb.test.labels, bres.head);

      att_acc.push_back(aacc);
      base_acc.push_back(bacc);
      mem_a1s.push_back(mem_a1);
      base_a1s.push_back(base_a1);
      base_a2s.push_back(base_a2);
      rep.table.rows.push_back({"trial", csv_int(nm), csv_int(tr),
                                csv_u64(ts), csv_bool(mem_a1),
                                csv_bool(base_a1), csv_bool(base_a2),
                                format_double(aacc), format_double(bacc), "",
                                "", "", ""});
    }
    Agg aa = aggregate(att_acc);
    Agg ba = aggregate(base_acc);
    if (aa.mean < cfg.thresholds.min_accuracy) pass = false;
    if (aa.mean <= ba.mean) pass = false;
    rep.table.rows.push_back({"aggregate", csv_int(nm), "", "", "", "", "",
                              "", "", format_double(aa.mean),
                              format_double(aa.ci95), format_double(ba.mean),
                              format_double(ba.ci95)});
    per_size_json.push_back(json_object({
        {"mem_size", json_int(nm)},
        {"attention_acc", json_array(rendered_doubles(att_acc))},
        {"baseline_acc", json_array(rendered_doubles(base_acc))},
        {"attention_mean", json_number(aa.mean)},
        {"attention_ci95", json_number(aa.ci95)},
        {"baseline_mean", json_number(ba.mean)},
        {"baseline_ci95", json_number(ba.ci95)},
        {"mem_emissions_pass", json_array(rendered_bools(mem_a1s))},
        {"baseline_emissions_pass", json_array(rendered_bools(base_a1s))},
        {"baseline_regularity_pass", json_array(rendered_bools(base_a2s))},
    }));
  }
  rep.pass = pass;
  rep.summary_json = json_object({
      {"kind", json_string(kind_name(cfg.kind))},
      {"seed", json_u64(cfg.seed)},
      {"trials", json_int(cfg.trials)},
      {"mem_sizes", json_array(rendered_ints(cfg.sweep_sizes))},
      {"syntax_size", json_int(cfg.syntax_size)},
      {"n_vocab", json_int(cfg.n_vocab)},
      {"t_len", json_int(cfg.t_len)},
      {"n_train", json_int(cfg.n_train)},
      {"n_val", json_int(cfg.n_val)},
      {"n_test", json_int(cfg.n_test)},
      {"per_size", json_array(per_size_json)},
      {"thresholds",
       json_object({{"min_accuracy",
                     json_number(cfg.thresholds.min_accuracy)}})},
      {"pass", json_bool(rep.pass)},
  });
  return rep;
}

}  // namespace

std::string kind_name(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::kOracleTest: return "oracle-test";
    case ExperimentKind::kTheorem1: return "theorem-1";
    case ExperimentKind::kTheorem2: return "theorem-2";
    case ExperimentKind::kTheorem3: return "theorem-3";
    case ExperimentKind::kTheorem4: return "theorem-4";
    case ExperimentKind::kSweepHeadVsPrompt: return "sweep-head-vs-prompt";
    case ExperimentKind::kSweepMemory: return "sweep-memory";
  }
  throw std::runtime_error("unknown experiment kind");
}

ExperimentKind kind_from_name(const std::string& name) {
  if (name == "oracle-test") return ExperimentKind::kOracleTest;
  if (name == "theorem-1") return ExperimentKind::kTheorem1;
  if (name == "theorem-2") return ExperimentKind::kTheorem2;
  if (name == "theorem-3") return ExperimentKind::kTheorem3;
  if (name == "theorem-4") return ExperimentKind::kTheorem4;
  if (name == "sweep-head-vs-prompt")
    return ExperimentKind::kSweepHeadVsPrompt;
  if (name == "sweep-memory") return ExperimentKind::kSweepMemory;
  throw std::runtime_error("unrecognized experiment kind: " + name);
}

ExperimentConfig default_config(ExperimentKind kind) {
  ExperimentConfig cfg;
  cfg.kind = kind;
  switch (kind) {
    case ExperimentKind::kOracleTest:
      cfg.trials = 50;
      break;
    case ExperimentKind::kTheorem1:
      cfg.trials = 20;
      cfg.n_hidden = 4;
      cfg.task_k = 4;
      cfg.n_sequences = 1000;
      cfg.t_len = 20;
      break;
    case ExperimentKind::kTheorem2:
      cfg.trials = 10;
      cfg.sweep_sizes = {15, 25};
      cfg.h_star_size = 6;
      cfg.task_k = 6;
      cfg.n_sequences = 400;
      cfg.t_len = 20;
      break;
    case ExperimentKind::kTheorem3:
      cfg.trials = 10;
      cfg.sweep_sizes = {2, 3};
      cfg.n_cells = 1;
      cfg.syntax_size = 4;
      cfg.s_star_size = 2;
      cfg.n_sequences = 200;
      cfg.t_len = 16;
      break;
    case ExperimentKind::kTheorem4:
      cfg.trials = 10;
      cfg.task_k = 2;
      cfg.s_star_size = 2;
      cfg.n_sequences = 200;
      cfg.t_len = 12;
      break;
    case ExperimentKind::kSweepHeadVsPrompt:
      cfg.trials = 20;
      cfg.sweep_sizes = {4, 8, 10, 15, 25, 30};
      cfg.task_k = 6;
      cfg.t_len = 129;
      cfg.n_train = 5000;
      cfg.n_val = 500;
      cfg.n_test = 1000;
      break;
    case ExperimentKind::kSweepMemory:
      cfg.trials = 5;
      cfg.sweep_sizes = {2, 3, 5, 7};
      cfg.n_cells = 1;
      cfg.syntax_size = 4;
      cfg.task_k = 6;
      cfg.t_len = 65;
      cfg.n_train = 1500;
      cfg.n_val = 150;
      cfg.n_test = 300;
      cfg.train.learning_rate = 0.3;
      cfg.train.steps_override = 3000;
      break;
  }
  return cfg;
}

std::string config_to_json(const ExperimentConfig& cfg) {
  std::vector<std::string> sizes;
  for (int s : cfg.sweep_sizes) sizes.push_back(json_int(s));
  std::string train = json_object({
      {"learning_rate", json_number(cfg.train.learning_rate)},
      {"epochs", json_int(cfg.train.epochs)},
      {"batch_size", json_int(cfg.train.batch_size)},
      {"prompt_len", json_int(cfg.train.prompt_len)},
      {"seed", json_u64(cfg.train.seed)},
      {"grad_mode", json_string(cfg.train.grad_mode == GradMode::kAnalytic
                                    ? "analytic"
                                    : "finite-difference")},
      {"temp_start", json_number(cfg.train.temp_start)},
      {"temp_end", json_number(cfg.train.temp_end)},
      {"init_scale", json_number(cfg.train.init_scale)},
      {"steps_override", json_int(cfg.train.steps_override)},
  });
  std::string thresholds = json_object({
      {"min_accuracy", json_number(cfg.thresholds.min_accuracy)},
      {"min_final_gap", json_number(cfg.thresholds.min_final_gap)},
      {"require_prompt_ge_head",
       json_bool(cfg.thresholds.require_prompt_ge_head)},
  });
  return json_object({
      {"kind", json_string(kind_name(cfg.kind))},
      {"seed", json_u64(cfg.seed)},
      {"trials", json_int(cfg.trials)},
      {"jobs", json_int(cfg.jobs)},
      {"out_dir", json_string(cfg.out_dir)},
      {"n_hidden", json_int(cfg.n_hidden)},
      {"n_vocab", json_int(cfg.n_vocab)},
      {"n_cells", json_int(cfg.n_cells)},
      {"mem_size", json_int(cfg.mem_size)},
      {"syntax_size", json_int(cfg.syntax_size)},
      {"h_star_size", json_int(cfg.h_star_size)},
      {"s_star_size", json_int(cfg.s_star_size)},
      {"task_k", json_int(cfg.task_k)},
      {"n_sequences", json_int(cfg.n_sequences)},
      {"t_len", json_int(cfg.t_len)},
      {"sweep_sizes", json_array(sizes)},
      {"n_train", json_int(cfg.n_train)},
      {"n_val", json_int(cfg.n_val)},
      {"n_test", json_int(cfg.n_test)},
      {"train", train},
      {"thresholds", thresholds},
  });
}

ExperimentConfig config_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("config parse error: ") + e.what());
  }
  if (!j.contains("kind"))
    throw std::runtime_error("config missing required field: kind");
  ExperimentConfig cfg = default_config(
      kind_from_name(j.at("kind").get<std::string>()));
  auto get_int = [&](const char* key, int& field) {
    if (j.contains(key)) field = j.at(key).get<int>();
  };
  if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
  get_int("trials", cfg.trials);
  get_int("jobs", cfg.jobs);
  if (j.contains("out_dir")) cfg.out_dir = j.at("out_dir").get<std::string>();
  get_int("n_hidden", cfg.n_hidden);
  get_int("n_vocab", cfg.n_vocab);
  get_int("n_cells", cfg.n_cells);
  get_int("mem_size", cfg.mem_size);
  get_int("syntax_size", cfg.syntax_size);
  get_int("h_star_size", cfg.h_star_size);
  get_int("s_star_size", cfg.s_star_size);
  get_int("task_k", cfg.task_k);
  get_int("n_sequences", cfg.n_sequences);
  get_int("t_len", cfg.t_len);
  if (j.contains("sweep_sizes")) {
    cfg.sweep_sizes.clear();
    for (const auto& s : j.at("sweep_sizes"))
      cfg.sweep_sizes.push_back(s.get<int>());
  }
  get_int("n_train", cfg.n_train);
  get_int("n_val", cfg.n_val);
  get_int("n_test", cfg.n_test);
  if (j.contains("train")) {
    const auto& t = j.at("train");
    if (t.contains("learning_rate"))
      cfg.train.learning_rate = t.at("learning_rate").get<double>();
    if (t.contains("epochs")) cfg.train.epochs = t.at("epochs").get<int>();
    if (t.contains("batch_size"))
      cfg.train.batch_size = t.at("batch_size").get<int>();
    if (t.contains("prompt_len"))
      cfg.train.prompt_len = t.at("prompt_len").get<int>();
    if (t.contains("seed"))
      cfg.train.seed = t.at("seed").get<std::uint64_t>();
    if (t.contains("grad_mode")) {
      std::string mode = t.at("grad_mode").get<std::string>();
      if (mode == "analytic") {
        cfg.train.grad_mode = GradMode::kAnalytic;
      } else if (mode == "finite-difference") {
        cfg.train.grad_mode = GradMode::kFiniteDifference;
      } else {
        throw std::runtime_error("unrecognized grad_mode: " + mode);
      }
    }
    if (t.contains("temp_start"))
      cfg.train.temp_start = t.at("temp_start").get<double>();
    if (t.contains("temp_end"))
      cfg.train.temp_end = t.at("temp_end").get<double>();
    if (t.contains("init_scale"))
      cfg.train.init_scale = t.at("init_scale").get<double>();
    if (t.contains("steps_override"))
      cfg.train.steps_override = t.at("steps_override").get<int>();
  }
  if (j.contains("thresholds")) {
    const auto& t = j.at("thresholds");
    if (t.contains("min_accuracy"))
      cfg.thresholds.min_accuracy = t.at("min_accuracy").get<double>();
    if (t.contains("min_final_gap"))
      cfg.thresholds.min_final_gap = t.at("min_final_gap").get<double>();
    if (t.contains("require_prompt_ge_head"))
      cfg.thresholds.require_prompt_ge_head =
          t.at("require_prompt_ge_head").get<bool>();
  }
  return cfg;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a,
                          std::uint64_t b) {
  SplitMix64 root(seed);
  SplitMix64 child = root.fork(a);
  return child.fork(b).next_u64();
}

ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  ExperimentConfig c = cfg;
  ExperimentConfig defaults = default_config(cfg.kind);
  if (c.trials <= 0) c.trials = defaults.trials;
  if (c.sweep_sizes.empty()) c.sweep_sizes = defaults.sweep_sizes;
  ExperimentReport rep;
  switch (c.kind) {
    case ExperimentKind::kOracleTest: rep = run_oracle_test(c); break;
    case ExperimentKind::kTheorem1: rep = run_theorem1(c); break;
    case ExperimentKind::kTheorem2: rep = run_theorem2(c); break;
    case ExperimentKind::kTheorem3: rep = run_theorem3(c); break;
    case ExperimentKind::kTheorem4: rep = run_theorem4(c); break;
    case ExperimentKind::kSweepHeadVsPrompt:
      rep = run_sweep_head_vs_prompt(c);
      break;
    case ExperimentKind::kSweepMemory: rep = run_sweep_memory(c); break;
  }
  if (!c.out_dir.empty()) {
    std::filesystem::create_directories(c.out_dir);
    write_text_file(c.out_dir + "/report.csv", rep.table.to_string());
    write_text_file(c.out_dir + "/summary.json", rep.summary_json + "\n");
    write_text_file(c.out_dir + "/config.json", config_to_json(c) + "\n");
  }
  return rep;
}

}  // namespace hmmtune
