// SPDX-License-Identifier: Apache-2.0
#include "hmmtune/serialize.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace hmmtune {
namespace {

using nlohmann::json;

Eigen::VectorXd vector_from(const json& arr) {
  Eigen::VectorXd v(arr.size());
  for (size_t i = 0; i < arr.size(); ++i) v(static_cast<int>(i)) = arr[i].get<double>();
  return v;
}

Eigen::MatrixXd matrix_from(const json& arr, long rows, long cols) {
  if (static_cast<long>(arr.size()) != rows * cols)
    throw std::runtime_error("matrix data length mismatch");
  Eigen::MatrixXd m(rows, cols);
  for (long r = 0; r < rows; ++r)
    for (long c = 0; c < cols; ++c)
      m(r, c) = arr[static_cast<size_t>(r * cols + c)].get<double>();
  return m;
}

Eigen::MatrixXd shaped_matrix_from(const json& obj) {
  return matrix_from(obj.at("data"), obj.at("rows").get<long>(),
                     obj.at("cols").get<long>());
}

json parse(const std::string& text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw std::runtime_error("malformed JSON input");
  return j;
}

std::vector<std::string> attention_members(const AttentionHead& head) {
  std::vector<std::string> offsets;
  offsets.reserve(head.offsets.size());
  for (const auto& o : head.offsets) offsets.push_back(json_vector(o));
  return {json_vector(head.query),        json_shaped_matrix(head.key),
          json_array(offsets),            json_shaped_matrix(head.value),
          json_vector(head.value_weights), json_number(head.argmax_tol)};
}

AttentionHead attention_from(const json& j) {
  AttentionHead head;
  head.query = vector_from(j.at("query"));
  head.key = shaped_matrix_from(j.at("key"));
  for (const auto& o : j.at("offsets")) head.offsets.push_back(vector_from(o));
  head.value = shaped_matrix_from(j.at("value"));
  head.value_weights = vector_from(j.at("value_weights"));
  head.argmax_tol = j.at("argmax_tol").get<double>();
  return head;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string json_string(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default:
        if (static_cast<unsigned char>(c) < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof buf, "\\u%04x", c);
          out += buf;
        } else {
          out += c;
        }
    }
  }
  out += '"';
  return out;
}

std::string json_number(double v) { return format_double(v); }
std::string json_int(long v) { return std::to_string(v); }
std::string json_bool(bool v) { return v ? "true" : "false"; }

std::string json_array(const std::vector<std::string>& rendered) {
  std::string out = "[";
  for (size_t i = 0; i < rendered.size(); ++i) {
    if (i) out += ',';
    out += rendered[i];
  }
  out += ']';
  return out;
}

std::string json_object(
    const std::vector<std::pair<std::string, std::string>>& members) {
  std::string out = "{";
  for (size_t i = 0; i < members.size(); ++i) {
    if (i) out += ',';
    out += json_string(members[i].first);
    out += ':';
    out += members[i].second;
  }
  out += '}';
  return out;
}

std::string json_vector(const Eigen::VectorXd& v) {
  std::vector<std::string> parts;
  parts.reserve(v.size());
  for (int i = 0; i < v.size(); ++i) parts.push_back(format_double(v(i)));
  return json_array(parts);
}

std::string json_matrix(const Eigen::MatrixXd& m) {
  std::vector<std::string> parts;
  parts.reserve(m.size());
  for (long r = 0; r < m.rows(); ++r)
    for (long c = 0; c < m.cols(); ++c)
      parts.push_back(format_double(m(r, c)));
  return json_array(parts);
}

std::string json_shaped_matrix(const Eigen::MatrixXd& m) {
  return json_object({{"rows", json_int(m.rows())},
                      {"cols", json_int(m.cols())},
                      {"data", json_matrix(m)}});
}

std::string model_to_json(const HmmParams& p) {
  return json_object({{"kind", json_string("hmm")},
                      {"n_hidden", json_int(p.n_hidden)},
                      {"n_vocab", json_int(p.n_vocab)},
                      {"transition", json_matrix(p.transition)},
                      {"emission", json_matrix(p.emission)},
                      {"start", json_vector(p.start)}});
}

std::string model_to_json(const MemHmmParams& p) {
  return json_object({{"kind", json_string("mem_hmm")},
                      {"n_cells", json_int(p.n_cells)},
                      {"mem_size", json_int(p.mem_size)},
                      {"syntax_size", json_int(p.syntax_size)},
                      {"n_vocab", json_int(p.n_vocab)},
                      {"transition", json_matrix(p.transition)},
                      {"emission", json_matrix(p.emission)},
                      {"start", json_vector(p.start)},
                      {"mem_prior", json_vector(p.mem_prior)}});
}

ModelFile model_from_json(const std::string& text) {
  json j = parse(text);
  ModelFile out;
  out.kind = j.at("kind").get<std::string>();
  if (out.kind == "hmm") {
    out.hmm.n_hidden = j.at("n_hidden").get<int>();
    out.hmm.n_vocab = j.at("n_vocab").get<int>();
    out.hmm.transition =
        matrix_from(j.at("transition"), out.hmm.n_hidden, out.hmm.n_hidden);
    out.hmm.emission =
        matrix_from(j.at("emission"), out.hmm.n_vocab, out.hmm.n_hidden);
    out.hmm.start = vector_from(j.at("start"));
    validate(out.hmm);
  } else if (out.kind == "mem_hmm") {
    out.mem.n_cells = j.at("n_cells").get<int>();
    out.mem.mem_size = j.at("mem_size").get<int>();
    out.mem.syntax_size = j.at("syntax_size").get<int>();
    out.mem.n_vocab = j.at("n_vocab").get<int>();
    const int nh = out.mem.n_hidden();
    out.mem.transition = matrix_from(j.at("transition"), nh, nh);
    out.mem.emission = matrix_from(j.at("emission"), out.mem.n_vocab,
                                   static_cast<long>(out.mem.mem_size) * nh);
    out.mem.start = vector_from(j.at("start"));
    out.mem.mem_prior = vector_from(j.at("mem_prior"));
    validate(out.mem);
  } else {
    throw std::runtime_error("unknown model kind: " + out.kind);
  }
  return out;
}

std::string linear_head_to_json(const LinearHead& head) {
  return json_object({{"kind", json_string("linear_head")},
                      {"weights", json_vector(head.weights)}});
}

LinearHead linear_head_from_json(const std::string& text) {
  json j = parse(text);
  LinearHead head;
  head.weights = vector_from(j.at("weights"));
  return head;
}

std::string prompt_head_to_json(const PromptHead& ph) {
  return json_object({{"kind", json_string("prompt_head")},
                      {"prompt", json_vector(ph.prompt.entries)},
                      {"weights", json_vector(ph.head.weights)}});
}

PromptHead prompt_head_from_json(const std::string& text) {
  json j = parse(text);
  PromptHead ph;
  ph.prompt.entries = vector_from(j.at("prompt"));
  ph.head.weights = vector_from(j.at("weights"));
  return ph;
}

std::string attention_head_to_json(const AttentionHead& head) {
  auto m = attention_members(head);
  return json_object({{"kind", json_string("attention_head")},
                      {"query", m[0]},
                      {"key", m[1]},
                      {"offsets", m[2]},
                      {"value", m[3]},
                      {"value_weights", m[4]},
                      {"argmax_tol", m[5]}});
}

AttentionHead attention_head_from_json(const std::string& text) {
  return attention_from(parse(text));
}

std::string prompt_attention_to_json(const PromptVector& prompt,
                                     const AttentionHead& head) {
  auto m = attention_members(head);
  return json_object({{"kind", json_string("prompt_attention")},
                      {"prompt", json_vector(prompt.entries)},
                      {"query", m[0]},
                      {"key", m[1]},
                      {"offsets", m[2]},
                      {"value", m[3]},
                      {"value_weights", m[4]},
                      {"argmax_tol", m[5]}});
}

std::pair<PromptVector, AttentionHead> prompt_attention_from_json(
    const std::string& text) {
  json j = parse(text);
  PromptVector prompt;
  prompt.entries = vector_from(j.at("prompt"));
  return {prompt, attention_from(j)};
}

std::string dataset_to_text(const LabeledDataset& d) {
  std::ostringstream out;
  out << "# seed " << d.seed << "\n";
  out << "# split " << d.split << "\n";
  out << "# balance " << format_double(d.balance) << "\n";
  for (size_t i = 0; i < d.sequences.size(); ++i) {
    const auto& seq = d.sequences[i];
    for (size_t k = 0; k < seq.size(); ++k) {
      if (k) out << ' ';
      out << seq[k];
    }
    out << '\t' << d.labels[i] << '\n';
  }
  return out.str();
}

LabeledDataset dataset_from_text(const std::string& text) {
  LabeledDataset d;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream h(line.substr(1));
      std::string key;
      h >> key;
      if (key == "seed")
        h >> d.seed;
      else if (key == "split")
        h >> d.split;
      else if (key == "balance")
        h >> d.balance;
      continue;
    }
    auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw std::runtime_error("dataset line missing label field");
    std::istringstream toks(line.substr(0, tab));
    std::vector<int> seq;
    int t;
    while (toks >> t) seq.push_back(t);
    d.sequences.push_back(std::move(seq));
    d.labels.push_back(std::stoi(line.substr(tab + 1)));
  }
  return d;
}

std::string CsvTable::to_string() const {
  std::ostringstream out;
  for (size_t i = 0; i < header.size(); ++i) {
    if (i) out << ',';
    out << header[i];
  }
  out << '\n';
  for (const auto& row : rows) {
    for (size_t i = 0; i < row.size(); ++i) {
      if (i) out << ',';
      out << row[i];
    }
    out << '\n';
  }
  return out.str();
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << content;
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace hmmtune
