// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "hmmtune/downstream.hpp"
#include "hmmtune/model.hpp"
#include "hmmtune/recovery.hpp"

namespace hmmtune {

// All floating-point output goes through %.17g so written values parse back
// bit-identically and reruns produce byte-identical files. Parsing uses a
// standard JSON reader; writing is this ordered, hand-rolled emitter.
std::string format_double(double v);

std::string json_string(const std::string& s);
std::string json_number(double v);
std::string json_int(long v);
std::string json_bool(bool v);
std::string json_array(const std::vector<std::string>& rendered);
std::string json_object(
    const std::vector<std::pair<std::string, std::string>>& members);
std::string json_vector(const Eigen::VectorXd& v);
// Flat row-major data array.
std::string json_matrix(const Eigen::MatrixXd& m);
// Object {"rows":., "cols":., "data":[row-major]} for self-describing shapes.
std::string json_shaped_matrix(const Eigen::MatrixXd& m);

std::string model_to_json(const HmmParams& p);
std::string model_to_json(const MemHmmParams& p);

struct ModelFile {
  std::string kind;  // "hmm" or "mem_hmm"
  HmmParams hmm;
  MemHmmParams mem;
};
// Parses either kind; throws std::runtime_error on malformed input.
ModelFile model_from_json(const std::string& text);

std::string linear_head_to_json(const LinearHead& head);
LinearHead linear_head_from_json(const std::string& text);

std::string prompt_head_to_json(const PromptHead& ph);
PromptHead prompt_head_from_json(const std::string& text);

std::string attention_head_to_json(const AttentionHead& head);
AttentionHead attention_head_from_json(const std::string& text);

// Attention head plus its prompt vector (the prompted construction).
std::string prompt_attention_to_json(const PromptVector& prompt,
                                     const AttentionHead& head);
std::pair<PromptVector, AttentionHead> prompt_attention_from_json(
    const std::string& text);

// Line-oriented dataset file: '#'-prefixed header lines (seed, split,
// balance), then one example per line: space-separated token ids, a tab,
// the label.
std::string dataset_to_text(const LabeledDataset& d);
LabeledDataset dataset_from_text(const std::string& text);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::string to_string() const;
};

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace hmmtune
