// SPDX-License-Identifier: Apache-2.0
#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hmmtune/assumptions.hpp"
#include "hmmtune/downstream.hpp"
#include "hmmtune/experiment.hpp"
#include "hmmtune/inference.hpp"
#include "hmmtune/model.hpp"
#include "hmmtune/recovery.hpp"
#include "hmmtune/serialize.hpp"

namespace {

using namespace hmmtune;

void emit(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << text << "\n";
  } else {
    write_text_file(out_path, text + "\n");
  }
}

std::string rank_certificate_json(const RankCertificate& c) {
  return json_object({
      {"pass", json_bool(c.pass)},
      {"rank", json_int(c.rank)},
      {"cols", json_int(c.cols)},
      {"sigma_max", json_number(c.sigma_max)},
      {"sigma_min", json_number(c.sigma_min)},
      {"tol", json_number(c.tol)},
  });
}

int run_check(const std::string& model_path, int j_star, int s_star_size,
              const std::string& out_path) {
  ModelFile mf = model_from_json(read_text_file(model_path));
  if (mf.kind == "hmm") {
    RankCertificate emis = check_nondegenerate_emissions(mf.hmm.emission);
    bool regular = check_regularity(mf.hmm);
    bool stationary = check_stationary(mf.hmm);
    emit(json_object({
             {"kind", json_string("hmm")},
             {"emissions", rank_certificate_json(emis)},
             {"regularity", json_bool(regular)},
             {"stationary", json_bool(stationary)},
         }),
         out_path);
    return emis.pass && regular ? 0 : 1;
  }
  const MemHmmParams& p = mf.mem;
  RankCertificate emis = check_nondegenerate_emissions(p.emission);
  bool stationary = check_stationary(p);
  std::vector<std::pair<std::string, std::string>> members = {
      {"kind", json_string("mem_hmm")},
      {"emissions", rank_certificate_json(emis)},
      {"stationary", json_bool(stationary)},
  };
  bool pass = true;
  if (s_star_size > 0) {
    // Span-disjointness over the target cell's first s_star_size syntax
    // states, the condition the attention constructions certify.
    std::vector<int> s_star;
    for (int s = 0; s < s_star_size; ++s) s_star.push_back(s);
    Eigen::VectorXd q = Eigen::VectorXd::Ones(p.mem_size);
    AttentionConstruction att = construct_attention_thm3(p, q, j_star, s_star);
    members.push_back({"span_disjoint", json_bool(att.ok)});
    members.push_back({"span_reason", json_string(att.reason)});
    pass = att.ok;
  }
  emit(json_object(members), out_path);
  return pass ? 0 : 1;
}

int run_construct(const std::string& model_path, int theorem,
                  std::uint64_t task_seed, int task_k, int j_star,
                  int s_star_size, const std::vector<int>& h_star,
                  const std::string& out_path) {
  ModelFile mf = model_from_json(read_text_file(model_path));
  SplitMix64 rng(task_seed);
  if (theorem == 1 || theorem == 2) {
    if (mf.kind != "hmm")
      throw std::runtime_error("constructions 1 and 2 need a plain model");
    const HmmParams& p = mf.hmm;
    if (theorem == 1) {
      int k = task_k > 0 ? std::min(task_k, p.n_hidden) : p.n_hidden;
      TaskSpec task = make_task(rng, p.n_hidden, k);
      LinearHead head = construct_linear_head_thm1(p, task.q_star);
      emit(linear_head_to_json(head), out_path);
      return 0;
    }
    if (h_star.empty())
      throw std::runtime_error("construction 2 needs --h-star state indices");
    auto b_set = search_b_set(p, h_star);
    if (!b_set)
      throw std::runtime_error(
          "no gate set of size <= 3 reaches exactly the given states");
    int k = task_k > 0 ? std::min<int>(task_k, h_star.size())
                       : static_cast<int>(h_star.size());
    std::vector<int> idx =
        rng.choose_without_replacement(static_cast<int>(h_star.size()), k);
    Eigen::VectorXd q = Eigen::VectorXd::Zero(p.n_hidden);
    for (int j : idx) q(h_star[j]) = rng.normal();
    PromptHead ph = construct_prompt_head_thm2(p, q, h_star, *b_set);
    emit(prompt_head_to_json(ph), out_path);
    return 0;
  }
  if (mf.kind != "mem_hmm")
    throw std::runtime_error("constructions 3 and 4 need a memory model");
  const MemHmmParams& p = mf.mem;
  std::vector<int> s_star;
  for (int s = 0; s < std::min(s_star_size, p.syntax_size); ++s)
    s_star.push_back(s);
  int k = task_k > 0 ? std::min(task_k, p.mem_size) : p.mem_size;
  TaskSpec task = make_task(rng, p.mem_size, k);
  if (theorem == 3) {
    AttentionConstruction att =
        construct_attention_thm3(p, task.q_star, j_star, s_star);
    if (!att.ok)
      throw std::runtime_error("span-disjointness failed: " + att.reason);
    emit(attention_head_to_json(att.head), out_path);
    return 0;
  }
  PromptAttention pa =
      construct_prompt_attention_thm4(p, task.q_star, j_star, s_star);
  if (!pa.ok)
    throw std::runtime_error("span-disjointness failed: " + pa.reason);
  emit(prompt_attention_to_json(pa.prompt, pa.head), out_path);
  return 0;
}

struct CommonFlags {
  CLI::Option* config = nullptr;
  CLI::Option* seed = nullptr;
  CLI::Option* trials = nullptr;
  CLI::Option* jobs = nullptr;
  CLI::Option* out = nullptr;
  std::string config_path;
  std::uint64_t seed_value = 0;
  int trials_value = 0;
  int jobs_value = 1;
  std::string out_dir;
};

CommonFlags add_common(CLI::App* cmd) {
  CommonFlags f;
  f.config = cmd->add_option("--config", f.config_path,
                             "JSON experiment config to start from");
  f.seed = cmd->add_option("--seed", f.seed_value, "experiment seed");
  f.trials = cmd->add_option("--trials", f.trials_value,
                             "trial count (0 keeps the kind default)");
  f.jobs = cmd->add_option("--jobs", f.jobs_value,
                           "worker count (accepted; execution is sequential)");
  f.out = cmd->add_option("--out", f.out_dir,
                          "directory for report.csv / summary.json");
  return f;
}

// expect_kind null: any config kind is accepted (tune/sweep take theirs
// from --mode only when the flag was passed explicitly).
ExperimentConfig resolve_config(const ExperimentKind* expect_kind,
                                const CommonFlags& f) {
  ExperimentConfig cfg;
  if (f.config->count() > 0) {
    cfg = config_from_json(read_text_file(f.config_path));
    if (expect_kind && cfg.kind != *expect_kind)
      throw std::runtime_error("config kind " + kind_name(cfg.kind) +
                               " does not match subcommand " +
                               kind_name(*expect_kind));
  } else {
    if (!expect_kind)
      throw std::runtime_error("no config and no explicit kind");
    cfg = default_config(*expect_kind);
  }
  if (f.seed->count() > 0) cfg.seed = f.seed_value;
  if (f.trials->count() > 0) cfg.trials = f.trials_value;
  if (f.jobs->count() > 0) cfg.jobs = f.jobs_value;
  if (f.out->count() > 0) cfg.out_dir = f.out_dir;
  return cfg;
}

ExperimentConfig resolve_config(ExperimentKind kind, const CommonFlags& f) {
  return resolve_config(&kind, f);
}

// tune/sweep: an explicit --mode wins; otherwise the config's kind; default
// vanilla. Only the two sweep kinds are accepted.
ExperimentConfig resolve_sweep_config(const CLI::Option* mode_opt,
                                      const std::string& mode,
                                      const CommonFlags& f) {
  ExperimentKind kind = mode == "memory" ? ExperimentKind::kSweepMemory
                                         : ExperimentKind::kSweepHeadVsPrompt;
  if (mode_opt->count() == 0 && f.config->count() > 0) {
    ExperimentConfig cfg = resolve_config(nullptr, f);
    if (cfg.kind != ExperimentKind::kSweepHeadVsPrompt &&
        cfg.kind != ExperimentKind::kSweepMemory)
      throw std::runtime_error("config kind " + kind_name(cfg.kind) +
                               " is not a tuning sweep");
    return cfg;
  }
  return resolve_config(&kind, f);
}

int run_and_print(const ExperimentConfig& cfg) {
  ExperimentReport rep = run_experiment(cfg);
  std::cout << rep.summary_json << "\n";
  return rep.pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "exact masked-token oracles, recovery constructions, and tuning "
      "sweeps for hidden Markov models"};
  app.require_subcommand(1);

  // gen-model
  auto* gen = app.add_subcommand("gen-model",
                                 "sample a random model and write it as JSON");
  std::string gen_kind = "hmm";
  std::uint64_t gen_seed = 0;
  int gen_nh = 4, gen_nz = 10, gen_cells = 1, gen_mem = 2, gen_syn = 4;
  std::string gen_out;
  gen->add_option("--kind", gen_kind, "hmm or mem_hmm")
      ->check(CLI::IsMember({"hmm", "mem_hmm"}));
  gen->add_option("--seed", gen_seed, "generator seed");
  gen->add_option("--n-hidden", gen_nh, "hidden states (hmm)");
  gen->add_option("--n-vocab", gen_nz, "vocabulary size");
  gen->add_option("--n-cells", gen_cells, "memory cells (mem_hmm)");
  gen->add_option("--mem-size", gen_mem, "memory values per cell (mem_hmm)");
  gen->add_option("--syntax-size", gen_syn, "syntax states (mem_hmm)");
  gen->add_option("--out", gen_out, "output file (default stdout)");

  // check
  auto* chk = app.add_subcommand(
      "check", "run the non-degeneracy checks on a model file");
  std::string chk_model, chk_out;
  int chk_jstar = 0, chk_sstar = 0;
  chk->add_option("--model", chk_model, "model JSON file")->required();
  chk->add_option("--j-star", chk_jstar, "target cell for the span check");
  chk->add_option("--s-star-size", chk_sstar,
                  "syntax-state count for the span check (0 skips it)");
  chk->add_option("--out", chk_out, "output file (default stdout)");

  // construct
  auto* con = app.add_subcommand(
      "construct", "build a recovery head or prompt from a model file");
  std::string con_model, con_out;
  int con_theorem = 1, con_taskk = 0, con_jstar = 0, con_sstar = 2;
  std::uint64_t con_seed = 0;
  std::vector<int> con_hstar;
  con->add_option("--model", con_model, "model JSON file")->required();
  con->add_option("--theorem", con_theorem,
                  "construction: 1 linear head, 2 prompt+head, 3 attention, "
                  "4 prompt+attention")
      ->required()
      ->check(CLI::Range(1, 4));
  con->add_option("--task-seed", con_seed, "task draw seed");
  con->add_option("--task-k", con_taskk,
                  "task support size (0 uses the full dimension)");
  con->add_option("--j-star", con_jstar, "target memory cell");
  con->add_option("--s-star-size", con_sstar, "recoverable syntax states");
  con->add_option("--h-star", con_hstar,
                  "essential state indices (construction 2)");
  con->add_option("--out", con_out, "output file (default stdout)");

  // experiment-backed subcommands
  auto* ora = app.add_subcommand(
      "oracle-test", "message passing vs brute-force enumeration");
  CommonFlags ora_flags = add_common(ora);

  auto* thm = app.add_subcommand(
      "theorem", "verify a recovery construction over sampled models");
  int thm_number = 1;
  thm->add_option("number", thm_number, "construction number 1..4")
      ->required()
      ->check(CLI::Range(1, 4));
  CommonFlags thm_flags = add_common(thm);

  auto* tune = app.add_subcommand(
      "tune", "train on oracle features for one model size");
  std::string tune_mode = "vanilla";
  int tune_size = 0;
  CLI::Option* tune_mode_opt =
      tune->add_option("--mode", tune_mode, "vanilla (head vs prompt) or "
                                            "memory (attention vs baseline)")
          ->check(CLI::IsMember({"vanilla", "memory"}));
  tune->add_option("--size", tune_size,
                   "hidden-state count (vanilla) or memory size (memory)");
  CommonFlags tune_flags = add_common(tune);

  auto* swp = app.add_subcommand(
      "sweep", "tuning sweep across model sizes");
  std::string swp_mode = "vanilla";
  std::vector<int> swp_sizes;
  CLI::Option* swp_mode_opt =
      swp->add_option("--mode", swp_mode, "vanilla (head vs prompt) or "
                                          "memory (attention vs baseline)")
          ->check(CLI::IsMember({"vanilla", "memory"}));
  swp->add_option("--sizes", swp_sizes, "model sizes to sweep");
  CommonFlags swp_flags = add_common(swp);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      if (gen_kind == "hmm") {
        emit(model_to_json(random_hmm(gen_seed, gen_nh, gen_nz)), gen_out);
      } else {
        emit(model_to_json(
                 random_mem_hmm(gen_seed, gen_cells, gen_mem, gen_syn, gen_nz)),
             gen_out);
      }
      return 0;
    }
    if (*chk) return run_check(chk_model, chk_jstar, chk_sstar, chk_out);
    if (*con)
      return run_construct(con_model, con_theorem, con_seed, con_taskk,
                           con_jstar, con_sstar, con_hstar, con_out);
    if (*ora)
      return run_and_print(
          resolve_config(ExperimentKind::kOracleTest, ora_flags));
    if (*thm) {
      ExperimentKind kind = ExperimentKind::kTheorem1;
      if (thm_number == 2) kind = ExperimentKind::kTheorem2;
      if (thm_number == 3) kind = ExperimentKind::kTheorem3;
      if (thm_number == 4) kind = ExperimentKind::kTheorem4;
      return run_and_print(resolve_config(kind, thm_flags));
    }
    if (*tune) {
      ExperimentConfig cfg =
          resolve_sweep_config(tune_mode_opt, tune_mode, tune_flags);
      if (tune_size > 0) cfg.sweep_sizes = {tune_size};
      if (tune_flags.trials->count() == 0) cfg.trials = 1;
      return run_and_print(cfg);
    }
    if (*swp) {
      ExperimentConfig cfg =
          resolve_sweep_config(swp_mode_opt, swp_mode, swp_flags);
      if (!swp_sizes.empty()) cfg.sweep_sizes = swp_sizes;
      return run_and_print(cfg);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
