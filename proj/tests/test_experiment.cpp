// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <filesystem>
#include <set>
#include <string>

#include "hmmtune/experiment.hpp"
#include "hmmtune/serialize.hpp"

namespace {

using namespace hmmtune;

TEST_CASE("kind names round trip") {
  for (ExperimentKind k :
       {ExperimentKind::kOracleTest, ExperimentKind::kTheorem1,
        ExperimentKind::kTheorem2, ExperimentKind::kTheorem3,
        ExperimentKind::kTheorem4, ExperimentKind::kSweepHeadVsPrompt,
        ExperimentKind::kSweepMemory}) {
    CHECK(kind_from_name(kind_name(k)) == k);
  }
  CHECK_THROWS(kind_from_name("no-such-kind"));
}

TEST_CASE("seed derivation is deterministic and collision-averse") {
  CHECK(derive_seed(1, 2, 3) == derive_seed(1, 2, 3));
  std::set<std::uint64_t> seen;
  for (std::uint64_t a = 0; a < 8; ++a)
    for (std::uint64_t b = 0; b < 8; ++b) seen.insert(derive_seed(42, a, b));
  CHECK(seen.size() == 64);
  CHECK(derive_seed(1, 2, 3) != derive_seed(2, 2, 3));
}

TEST_CASE("defaults fill kind-appropriate trial counts") {
  CHECK(default_config(ExperimentKind::kSweepHeadVsPrompt).trials == 20);
  CHECK(default_config(ExperimentKind::kSweepMemory).trials == 5);
  CHECK(default_config(ExperimentKind::kSweepMemory).sweep_sizes ==
        std::vector<int>{2, 3, 5, 7});
  CHECK(default_config(ExperimentKind::kSweepHeadVsPrompt).sweep_sizes ==
        std::vector<int>{4, 8, 10, 15, 25, 30});
  CHECK(default_config(ExperimentKind::kOracleTest).trials > 0);
}

TEST_CASE("configs round trip through json") {
  ExperimentConfig c = default_config(ExperimentKind::kSweepMemory);
  c.seed = 99;
  c.trials = 3;
  c.sweep_sizes = {2, 5};
  c.train.learning_rate = 0.25;
  c.train.steps_override = 1234;
  c.thresholds.min_accuracy = 0.9;
  ExperimentConfig d = config_from_json(config_to_json(c));
  CHECK(d.kind == c.kind);
  CHECK(d.seed == c.seed);
  CHECK(d.trials == c.trials);
  CHECK(d.sweep_sizes == c.sweep_sizes);
  CHECK(d.train.learning_rate == c.train.learning_rate);
  CHECK(d.train.steps_override == c.train.steps_override);
  CHECK(d.thresholds.min_accuracy == c.thresholds.min_accuracy);
  CHECK(d.n_train == c.n_train);
  CHECK(d.t_len == c.t_len);
}

TEST_CASE("a small construction run passes and writes identical bytes twice") {
  ExperimentConfig c = default_config(ExperimentKind::kTheorem1);
  c.seed = 5;
  c.trials = 2;
  c.n_sequences = 50;
  c.t_len = 10;
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "hmmtune_exp_test";
  fs::remove_all(dir);
  c.out_dir = (dir / "a").string();
  ExperimentReport r1 = run_experiment(c);
  CHECK(r1.pass);
  c.out_dir = (dir / "b").string();
  ExperimentReport r2 = run_experiment(c);
  CHECK(read_text_file((dir / "a" / "report.csv").string()) ==
        read_text_file((dir / "b" / "report.csv").string()));
  // The config echo embeds out_dir, so only the result files must agree.
  CHECK(read_text_file((dir / "a" / "summary.json").string()) ==
        read_text_file((dir / "b" / "summary.json").string()));
  CHECK(r1.summary_json == r2.summary_json);
  // The echoed config names the kind so a run directory is self-describing.
  CHECK(read_text_file((dir / "a" / "config.json").string())
            .find("theorem-1") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("oracle equivalence config runs clean at reduced size") {
  ExperimentConfig c = default_config(ExperimentKind::kOracleTest);
  c.seed = 3;
  c.trials = 8;
  ExperimentReport r = run_experiment(c);
  CHECK(r.pass);
  CHECK(r.summary_json.find("max_abs_diff") != std::string::npos);
}

}  // namespace
