// SPDX-License-Identifier: Apache-2.0
#include "hmmtune/recovery.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

namespace hmmtune {

LinearHead construct_linear_head_thm1(const HmmParams& p,
                                      const Eigen::VectorXd& q_star) {
  if (!check_nondegenerate_emissions(p.emission).pass)
    throw std::runtime_error(
        "construct_linear_head_thm1: emission columns not independent");
  if (!check_regularity(p))
    throw std::runtime_error("construct_linear_head_thm1: chain not regular");
  const Eigen::VectorXd p1 = p.transition * p.start;
  // d_h = P(H_0 = h) / P(H_1 = h); regularity gives p1 full support.
  const Eigen::VectorXd d = p.start.cwiseQuotient(p1);
  LinearHead head;
  head.weights =
      pseudo_inverse(p.emission).transpose() * q_star.cwiseProduct(d);
  return head;
}

double linear_head_score(const HmmParams& p, const LinearHead& head,
                         const std::vector<int>& tokens) {
  EmbeddingSeq v;
  v.reserve(tokens.size() + 1);
  v.push_back(mask_embedding(p.n_hidden));
  for (int x : tokens) v.push_back(proper_embedding(p, x));
  return head.weights.dot(gbar(p, v)[0]);
}

PromptHead construct_prompt_head_thm2(const HmmParams& p,
                                      const Eigen::VectorXd& q_star,
                                      const std::vector<int>& h_star,
                                      const std::vector<int>& b_set) {
  if (!check_regularity(p))
    throw std::runtime_error("construct_prompt_head_thm2: chain not regular");
  const RelaxedCertificate cert =
      check_relaxed_vanilla(p, q_star, h_star, b_set);
  if (!cert.pass)
    throw std::runtime_error("construct_prompt_head_thm2: " + cert.reason);

  PromptHead ph;
  ph.prompt.entries = Eigen::VectorXd::Zero(p.n_hidden);
  for (int h : b_set) ph.prompt.entries(h) = 1.0;

  // u_h = P(position 1 emits the fake token, H_2 = h); support is exactly
  // h_star by the reachable-set condition, so the rescaling below is finite.
  const Eigen::VectorXd p1 = p.transition * p.start;
  const Eigen::VectorXd u =
      p.transition * ph.prompt.entries.cwiseProduct(p1);
  Eigen::MatrixXd w_star(p.n_vocab, h_star.size());
  for (std::size_t i = 0; i < h_star.size(); ++i)
    w_star.col(i) = p.emission.col(h_star[i]);
  const Eigen::MatrixXd w_star_pinv = pseudo_inverse(w_star);

  Eigen::VectorXd coeff(h_star.size());
  for (std::size_t i = 0; i < h_star.size(); ++i) {
    const int h = h_star[i];
    coeff(i) = q_star(h) * p.start(h) / u(h);
  }
  ph.head.weights = w_star_pinv.transpose() * coeff;
  return ph;
}

double prompt_head_score(const HmmParams& p, const PromptHead& ph,
                         const std::vector<int>& tokens) {
  EmbeddingSeq v;
  v.reserve(tokens.size() + 2);
  v.push_back(ph.prompt.entries);
  v.push_back(mask_embedding(p.n_hidden));
  for (int x : tokens) v.push_back(proper_embedding(p, x));
  return ph.head.weights.dot(gbar(p, v)[1]);
}

namespace {

// Shared assembly for the attention constructions. m_set: memory values whose
// emission columns form the primary blocks; the complement gathers every other
// column. On success fills key/query/value/value_weights (offsets left empty).
AttentionConstruction build_attention(const MemHmmParams& p,
                                      const Eigen::VectorXd& q_star,
                                      int j_star,
                                      const std::vector<int>& s_star,
                                      const std::vector<int>& m_set) {
  AttentionConstruction out;
  const int nh = p.n_hidden();
  const int nz = p.n_vocab;
  const int nm = p.mem_size;

  for (int s : s_star) out.h_star.push_back(j_star * p.syntax_size + s);
  const std::set<int> hs(out.h_star.begin(), out.h_star.end());

  std::vector<std::pair<int, Eigen::MatrixXd>> primaries;
  std::set<int> primary_cols;
  for (std::size_t i = 0; i < s_star.size(); ++i) {
    Eigen::MatrixXd block(nz, m_set.size());
    for (std::size_t mi = 0; mi < m_set.size(); ++mi) {
      const int col = mem_emission_col(p, m_set[mi], j_star, s_star[i]);
      block.col(mi) = p.emission.col(col);
      primary_cols.insert(col);
    }
    primaries.emplace_back(out.h_star[i], block);
  }
  std::vector<int> comp_cols;
  for (int c = 0; c < nm * nh; ++c)
    if (primary_cols.count(c) == 0) comp_cols.push_back(c);
  Eigen::MatrixXd comp(nz, comp_cols.size());
  for (std::size_t i = 0; i < comp_cols.size(); ++i)
    comp.col(i) = p.emission.col(comp_cols[i]);

  out.certificate = check_span_disjoint(primaries, comp);
  if (!out.certificate.pass) {
    out.reason = out.certificate.reason;
    return out;
  }

  AttentionHead& head = out.head;
  head.key = Eigen::MatrixXd::Zero(nh + 1, nz);
  for (std::size_t i = 0; i < out.h_star.size(); ++i)
    head.key.row(out.h_star[i]) = out.certificate.recovery[i].colwise().sum();
  for (int h = 0; h < nh; ++h)
    if (hs.count(h) == 0) {
      head.key.row(h) = out.certificate.complement_recovery.colwise().sum();
      break;
    }
  head.query = Eigen::VectorXd::Zero(nh + 1);
  for (int h : out.h_star) head.query(h) = 1.0;

  head.value = Eigen::MatrixXd::Zero(nm * nh, nz);
  for (std::size_t i = 0; i < s_star.size(); ++i) {
    Eigen::MatrixXd block(nz, m_set.size());
    for (std::size_t mi = 0; mi < m_set.size(); ++mi)
      block.col(mi) =
          p.emission.col(mem_emission_col(p, m_set[mi], j_star, s_star[i]));
    const Eigen::MatrixXd rows =
        pseudo_inverse(block) * out.certificate.recovery[i];
    for (std::size_t mi = 0; mi < m_set.size(); ++mi)
      head.value.row(mem_emission_col(p, m_set[mi], j_star, s_star[i])) =
          rows.row(mi);
  }
  head.value_weights = Eigen::VectorXd::Zero(nm * nh);
  for (int m = 0; m < nm; ++m)
    for (int s = 0; s < p.syntax_size; ++s)
      head.value_weights(mem_emission_col(p, m, j_star, s)) = q_star(m);
  out.ok = true;
  return out;
}

}  // namespace

AttentionConstruction construct_attention_thm3(const MemHmmParams& p,
                                               const Eigen::VectorXd& q_star,
                                               int j_star,
                                               const std::vector<int>& s_star) {
  std::vector<int> all_m(p.mem_size);
  for (int m = 0; m < p.mem_size; ++m) all_m[m] = m;
  AttentionConstruction out =
      build_attention(p, q_star, j_star, s_star, all_m);
  out.m_star = all_m;
  return out;
}

PromptAttention construct_prompt_attention_thm4(
    const MemHmmParams& p, const Eigen::VectorXd& q_star, int j_star,
    const std::vector<int>& s_star) {
  PromptAttention out;
  if (!check_stationary(p)) {
    out.reason = "start_not_stationary";
    return out;
  }
  std::vector<int> m_star;
  for (int m = 0; m < p.mem_size; ++m)
    if (q_star(m) != 0.0) m_star.push_back(m);
  if (m_star.empty()) {
    out.reason = "qstar_all_zero";
    return out;
  }
  AttentionConstruction base =
      build_attention(p, q_star, j_star, s_star, m_star);
  out.h_star = base.h_star;
  out.m_star = m_star;
  out.certificate = base.certificate;
  if (!base.ok) {
    out.reason = base.reason;
    return out;
  }
  out.head = base.head;
  const int nh = p.n_hidden();
  out.head.query(nh) = 1.0;
  Eigen::VectorXd beta1 = Eigen::VectorXd::Zero(nh + 1);
  beta1(nh) = -2.0;
  out.head.offsets.push_back(beta1);

  // Prompt over the lifted chain: 1 on states whose target cell holds a
  // supported memory value.
  const long nmem = p.n_mem_tuples();
  const std::set<int> ms(m_star.begin(), m_star.end());
  out.prompt.entries = Eigen::VectorXd::Zero(nmem * nh);
  for (long mi = 0; mi < nmem; ++mi) {
    const std::vector<int> digits = mem_tuple_digits(p, mi);
    if (ms.count(digits[j_star]))
      out.prompt.entries.segment(mi * nh, nh).setOnes();
  }
  out.ok = true;
  return out;
}

int eval_linear(const LinearHead& head, const Eigen::VectorXd& g) {
  return head.weights.dot(g) >= 0.0 ? 1 : 0;
}

AttentionEval eval_attention(const AttentionHead& head,
                             const std::vector<Eigen::VectorXd>& oracle,
                             const std::vector<Eigen::VectorXd>& value_embeds) {
  if (oracle.empty())
    throw std::invalid_argument("eval_attention: empty sequence");
  if (oracle.size() != value_embeds.size())
    throw std::invalid_argument("eval_attention: length mismatch");
  AttentionEval ev;
  ev.key_scores.resize(oracle.size());
  for (std::size_t i = 0; i < oracle.size(); ++i) {
    double s = head.query.dot(head.key * oracle[i]);
    if (i < head.offsets.size()) s += head.query.dot(head.offsets[i]);
    ev.key_scores[i] = s;
  }
  const double mx = *std::max_element(ev.key_scores.begin(),
                                      ev.key_scores.end());
  double total = 0.0;
  for (std::size_t i = 0; i < oracle.size(); ++i)
    if (ev.key_scores[i] >= mx - head.argmax_tol) {
      ev.attended.push_back(static_cast<int>(i));
      total += head.value_weights.dot(
          (head.value * oracle[i]).cwiseProduct(value_embeds[i]));
    }
  ev.score = total / static_cast<double>(ev.attended.size());
  ev.label = ev.score >= 0.0 ? 1 : 0;
  return ev;
}

}  // namespace hmmtune
