// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cstdio>
#include <string>
#include <vector>

#include "hmmtune/model.hpp"
#include "hmmtune/recovery.hpp"
#include "hmmtune/rng.hpp"
#include "hmmtune/serialize.hpp"

namespace {

using namespace hmmtune;

TEST_CASE("doubles render with full round-trip precision") {
  CHECK(format_double(1.0) == "1");
  CHECK(format_double(0.5) == "0.5");
  for (double v : {0.1, 1.0 / 3.0, 1.2345678901234567e-300, -2.718281828e17})
    CHECK(std::stod(format_double(v)) == v);
}

TEST_CASE("json scalar helpers render canonical forms") {
  CHECK(json_bool(true) == "true");
  CHECK(json_int(-7) == "-7");
  CHECK(json_string("a\"b") == "\"a\\\"b\"");
  CHECK(json_array({"1", "2"}) == "[1,2]");
  CHECK(json_object({{"k", "1"}}) == "{\"k\":1}");
}

TEST_CASE("hmm params survive a json round trip bitwise") {
  HmmParams p = random_hmm(701, 5, 7);
  ModelFile f = model_from_json(model_to_json(p));
  CHECK(f.kind == "hmm");
  CHECK(f.hmm.n_hidden == 5);
  CHECK(f.hmm.n_vocab == 7);
  CHECK(f.hmm.transition == p.transition);
  CHECK(f.hmm.emission == p.emission);
  CHECK(f.hmm.start == p.start);
}

TEST_CASE("memory params survive a json round trip bitwise") {
  MemHmmParams p = random_mem_hmm(703, 2, 3, 2, 6);
  ModelFile f = model_from_json(model_to_json(p));
  CHECK(f.kind == "mem_hmm");
  CHECK(f.mem.n_cells == 2);
  CHECK(f.mem.mem_size == 3);
  CHECK(f.mem.syntax_size == 2);
  CHECK(f.mem.n_vocab == 6);
  CHECK(f.mem.transition == p.transition);
  CHECK(f.mem.emission == p.emission);
  CHECK(f.mem.start == p.start);
  CHECK(f.mem.mem_prior == p.mem_prior);
}

TEST_CASE("heads and prompts round trip bitwise") {
  SplitMix64 rng(705);
  LinearHead lh;
  lh.weights = rng.normal_vec(6);
  LinearHead lh2 = linear_head_from_json(linear_head_to_json(lh));
  CHECK(lh2.weights == lh.weights);

  PromptHead ph;
  ph.prompt.entries = rng.uniform_vec(5);
  ph.head.weights = rng.normal_vec(6);
  PromptHead ph2 = prompt_head_from_json(prompt_head_to_json(ph));
  CHECK(ph2.prompt.entries == ph.prompt.entries);
  CHECK(ph2.head.weights == ph.head.weights);

  AttentionHead ah;
  ah.query = rng.normal_vec(4);
  ah.key = Eigen::MatrixXd::Zero(4, 6);
  ah.value = Eigen::MatrixXd::Zero(8, 6);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 6; ++c) ah.key(r, c) = rng.normal();
  for (int r = 0; r < 8; ++r)
    for (int c = 0; c < 6; ++c) ah.value(r, c) = rng.normal();
  ah.value_weights = rng.normal_vec(8);
  ah.offsets = {rng.normal_vec(4), rng.normal_vec(4)};
  AttentionHead ah2 = attention_head_from_json(attention_head_to_json(ah));
  CHECK(ah2.query == ah.query);
  CHECK(ah2.key == ah.key);
  CHECK(ah2.value == ah.value);
  CHECK(ah2.value_weights == ah.value_weights);
  REQUIRE(ah2.offsets.size() == 2);
  CHECK(ah2.offsets[0] == ah.offsets[0]);
  CHECK(ah2.offsets[1] == ah.offsets[1]);
  CHECK(ah2.argmax_tol == ah.argmax_tol);

  PromptVector pv;
  pv.entries = rng.uniform_vec(12);
  auto [pv2, ah3] = prompt_attention_from_json(prompt_attention_to_json(pv, ah));
  CHECK(pv2.entries == pv.entries);
  CHECK(ah3.key == ah.key);
}

TEST_CASE("datasets round trip through the text format") {
  LabeledDataset d;
  d.sequences = {{0, 3, 1}, {2, 2, 2}, {5, 0, 4}};
  d.labels = {1, 0, 1};
  d.split = "train";
  d.seed = 12345678901234567ULL;
  d.balance = 2.0 / 3.0;
  LabeledDataset e = dataset_from_text(dataset_to_text(d));
  CHECK(e.sequences == d.sequences);
  CHECK(e.labels == d.labels);
  CHECK(e.split == d.split);
  CHECK(e.seed == d.seed);
  CHECK(e.balance == d.balance);
}

TEST_CASE("csv tables join cells with commas and rows with newlines") {
  CsvTable t;
  t.header = {"a", "b"};
  t.rows = {{"1", "2"}, {"3", "4"}};
  CHECK(t.to_string() == "a,b\n1,2\n3,4\n");
}

TEST_CASE("text files write and read back exactly") {
  std::string path = "serialize_test_tmp.txt";
  std::string content = "line1\nline2 with spaces\n";
  write_text_file(path, content);
  CHECK(read_text_file(path) == content);
  std::remove(path.c_str());
}

TEST_CASE("malformed model json raises") {
  CHECK_THROWS(model_from_json("{\"kind\":\"hmm\"}"));
  CHECK_THROWS(model_from_json("not json at all"));
}

}  // namespace
