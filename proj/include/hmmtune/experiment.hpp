// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hmmtune/serialize.hpp"
#include "hmmtune/tuning.hpp"

namespace hmmtune {

enum class ExperimentKind {
  kOracleTest,        // message passing vs brute-force enumeration
  kTheorem1,          // constructed linear head, non-degenerate models
  kTheorem2,          // constructed prompt + head, degenerate family
  kTheorem3,          // constructed attention head, memory models
  kTheorem4,          // constructed prompt + attention, memory models
  kSweepHeadVsPrompt, // trained head vs trained prompt across |H|
  kSweepMemory,       // trained attention vs vanilla head baseline across |M|
};

std::string kind_name(ExperimentKind kind);
// Throws std::runtime_error on an unrecognized name.
ExperimentKind kind_from_name(const std::string& name);

struct ExperimentThresholds {
  double min_accuracy = 0.95;      // memory sweep: mean accuracy per |M|
  double min_final_gap = 0.03;     // vanilla sweep: prompt - head at the
                                   // largest size
  bool require_prompt_ge_head = true;
};

// One config type for every kind; unused fields are ignored by kinds that
// do not read them. default_config(kind) fills the per-kind defaults.
struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::kOracleTest;
  std::uint64_t seed = 0;
  int trials = 0;  // 0 keeps the kind default
  int jobs = 1;    // accepted for interface compatibility; execution is
                   // sequential so reports are reproducible
  std::string out_dir;  // empty: no files written

  // Model shape.
  int n_hidden = 4;
  int n_vocab = 10;
  int n_cells = 1;
  int mem_size = 2;
  int syntax_size = 4;
  int h_star_size = 6;
  int s_star_size = 2;

  // Task and data shape.
  int task_k = 4;
  int n_sequences = 1000;  // verification sequences per theorem trial
  int t_len = 20;
  std::vector<int> sweep_sizes;  // |H| list (vanilla) or |M| list (memory);
                                 // theorem-2 cycles |H| through it too
  int n_train = 5000;
  int n_val = 500;
  int n_test = 1000;

  TrainConfig train;
  ExperimentThresholds thresholds;
};

ExperimentConfig default_config(ExperimentKind kind);

std::string config_to_json(const ExperimentConfig& cfg);
// Reads the mirror format: "kind" is required, every other field optional
// and overlaid on default_config(kind). Throws std::runtime_error.
ExperimentConfig config_from_json(const std::string& text);

struct ExperimentReport {
  bool pass = false;
  std::string summary_json;  // ordered, %.17g floats: byte-stable per config
  CsvTable table;            // per-trial rows then aggregate rows
};

// Deterministic (seed, index)-addressed stream so trial results do not
// depend on execution order.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a,
                          std::uint64_t b = 0);

// Runs the configured experiment. When out_dir is nonempty, writes
// report.csv, summary.json, and config.json there (creating directories).
// Reruns with an identical config produce byte-identical files.
ExperimentReport run_experiment(const ExperimentConfig& cfg);

}  // namespace hmmtune
