// SPDX-License-Identifier: Apache-2.0
#include "hmmtune/inference.hpp"

#include <stdexcept>

namespace hmmtune {

Eigen::VectorXd proper_embedding(const HmmParams& p, int token) {
  if (token < 0 || token >= p.n_vocab)
    throw std::invalid_argument("proper_embedding: token out of range");
  return p.emission.row(token).transpose();
}

Eigen::VectorXd proper_embedding(const MemHmmParams& p, int token) {
  if (token < 0 || token >= p.n_vocab)
    throw std::invalid_argument("proper_embedding: token out of range");
  return p.emission.row(token).transpose();
}

Eigen::VectorXd mask_embedding(int dim) { return Eigen::VectorXd::Ones(dim); }

EmbeddingSeq embed_tokens(const HmmParams& p, const std::vector<int>& tokens,
                          const std::set<int>& masked) {
  EmbeddingSeq v;
  v.reserve(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (masked.count(static_cast<int>(i)))
      v.push_back(mask_embedding(p.n_hidden));
    else
      v.push_back(proper_embedding(p, tokens[i]));
  }
  return v;
}

Messages compute_messages(const HmmParams& p, const EmbeddingSeq& evidence) {
  const int t = static_cast<int>(evidence.size());
  if (t == 0) throw std::invalid_argument("compute_messages: empty sequence");
  for (const auto& v : evidence)
    if (v.size() != p.n_hidden)
      throw std::invalid_argument("compute_messages: evidence dimension");
  Messages m;
  m.alpha.resize(t);
  m.beta.resize(t);
  Eigen::VectorXd a = p.transition * p.start;
  double n = a.sum();
  m.alpha[0] = n > 0.0 ? Eigen::VectorXd(a / n) : a;
  for (int i = 1; i < t; ++i) {
    a = p.transition * m.alpha[i - 1].cwiseProduct(evidence[i - 1]);
    n = a.sum();
    m.alpha[i] = n > 0.0 ? Eigen::VectorXd(a / n) : a;
  }
  m.beta[t - 1] = Eigen::VectorXd::Constant(p.n_hidden, 1.0 / p.n_hidden);
  for (int i = t - 2; i >= 0; --i) {
    Eigen::VectorXd b =
        p.transition.transpose() * m.beta[i + 1].cwiseProduct(evidence[i + 1]);
    n = b.sum();
    m.beta[i] = n > 0.0 ? Eigen::VectorXd(b / n) : b;
  }
  return m;
}

std::vector<Eigen::VectorXd> gbar(const HmmParams& p, const EmbeddingSeq& v) {
  const Messages m = compute_messages(p, v);
  std::vector<Eigen::VectorXd> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Eigen::VectorXd tau = m.alpha[i].cwiseProduct(m.beta[i]);
    const double n = tau.sum();
    out[i] = n > 0.0 ? Eigen::VectorXd(p.emission * (tau / n))
                     : Eigen::VectorXd(Eigen::VectorXd::Zero(p.n_vocab));
  }
  return out;
}

std::vector<Eigen::VectorXd> mlm_oracle(const HmmParams& p,
                                        const std::vector<int>& tokens,
                                        const std::set<int>& masked) {
  return gbar(p, embed_tokens(p, tokens, masked));
}

Eigen::VectorXd lift_embedding(const MemHmmParams& p,
                               const Eigen::VectorXd& v) {
  const int nh = p.n_hidden();
  if (v.size() != p.mem_size * nh)
    throw std::invalid_argument("lift_embedding: dimension");
  const long nmem = p.n_mem_tuples();
  Eigen::VectorXd out(nmem * nh);
  for (long mi = 0; mi < nmem; ++mi) {
    const std::vector<int> digits = mem_tuple_digits(p, mi);
    for (int j = 0; j < p.n_cells; ++j)
      for (int s = 0; s < p.syntax_size; ++s)
        out(mi * nh + j * p.syntax_size + s) =
            v(mem_emission_col(p, digits[j], j, s));
  }
  return out;
}

Eigen::VectorXd reverse_lift(const MemHmmParams& p, const Eigen::VectorXd& v) {
  const int nh = p.n_hidden();
  const long nmem = p.n_mem_tuples();
  if (v.size() != nmem * nh)
    throw std::invalid_argument("reverse_lift: dimension");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(p.mem_size * nh);
  for (long mi = 0; mi < nmem; ++mi) {
    const std::vector<int> digits = mem_tuple_digits(p, mi);
    for (int j = 0; j < p.n_cells; ++j)
      for (int s = 0; s < p.syntax_size; ++s)
        out(mem_emission_col(p, digits[j], j, s)) +=
            v(mi * nh + j * p.syntax_size + s);
  }
  double scale = 1.0;
  for (int c = 0; c < p.n_cells - 1; ++c) scale *= p.mem_size;
  return out / scale;
}

std::vector<Eigen::VectorXd> gbar_mem(const MemHmmParams& p,
                                      const HmmParams& lifted,
                                      const EmbeddingSeq& v) {
  const Messages m = compute_messages(lifted, v);
  std::vector<Eigen::VectorXd> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Eigen::VectorXd tau =
        reverse_lift(p, m.alpha[i].cwiseProduct(m.beta[i]));
    const double n = tau.sum();
    out[i] = n > 0.0 ? Eigen::VectorXd(p.emission * (tau / n))
                     : Eigen::VectorXd(Eigen::VectorXd::Zero(p.n_vocab));
  }
  return out;
}

HiddenPosteriors hidden_posteriors(const HmmParams& p, const EmbeddingSeq& v) {
  const Messages m = compute_messages(p, v);
  HiddenPosteriors out;
  out.per_position.resize(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    Eigen::VectorXd tau = m.alpha[i].cwiseProduct(m.beta[i]);
    const double n = tau.sum();
    out.per_position[i] =
        n > 0.0 ? Eigen::VectorXd(tau / n)
                : Eigen::VectorXd(Eigen::VectorXd::Zero(p.n_hidden));
  }
  const Eigen::VectorXd b0 =
      p.transition.transpose() * m.beta[0].cwiseProduct(v[0]);
  Eigen::VectorXd h0 = p.start.cwiseProduct(b0);
  const double n = h0.sum();
  out.h0 = n > 0.0 ? Eigen::VectorXd(h0 / n)
                   : Eigen::VectorXd(Eigen::VectorXd::Zero(p.n_hidden));
  return out;
}

Eigen::VectorXd full_posterior_last(const HmmParams& p,
                                    const EmbeddingSeq& v) {
  const Messages m = compute_messages(p, v);
  Eigen::VectorXd q = m.alpha.back().cwiseProduct(v.back());
  const double n = q.sum();
  return n > 0.0 ? Eigen::VectorXd(q / n)
                 : Eigen::VectorXd(Eigen::VectorXd::Zero(p.n_hidden));
}

Eigen::VectorXd mem_marginal_hidden(const MemHmmParams& p,
                                    const Eigen::VectorXd& lifted_posterior) {
  const int nh = p.n_hidden();
  const long nmem = p.n_mem_tuples();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(nh);
  for (long mi = 0; mi < nmem; ++mi)
    out += lifted_posterior.segment(mi * nh, nh);
  return out;
}

Eigen::MatrixXd mem_joint_mem_hidden(const MemHmmParams& p,
                                     const Eigen::VectorXd& lifted_posterior,
                                     int cell) {
  const int nh = p.n_hidden();
  const long nmem = p.n_mem_tuples();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(p.mem_size, nh);
  for (long mi = 0; mi < nmem; ++mi) {
    const std::vector<int> digits = mem_tuple_digits(p, mi);
    out.row(digits[cell]) += lifted_posterior.segment(mi * nh, nh).transpose();
  }
  return out;
}

ExtendedModel fake_token_extend(const HmmParams& p, const Eigen::VectorXd& pi) {
  if (pi.size() != p.n_hidden)
    throw std::invalid_argument("fake_token_extend: prompt dimension");
  if (pi.minCoeff() < 0.0 || pi.maxCoeff() > 1.0)
    throw std::invalid_argument("fake_token_extend: prompt outside [0,1]");
  ExtendedModel e;
  e.fake_token = p.n_vocab;
  e.emission_pos1.resize(p.n_vocab + 1, p.n_hidden);
  e.emission_pos1.topRows(p.n_vocab) =
      p.emission.array().rowwise() * (1.0 - pi.array()).transpose();
  e.emission_pos1.row(p.n_vocab) = pi.transpose();
  e.emission_rest.resize(p.n_vocab + 1, p.n_hidden);
  e.emission_rest.topRows(p.n_vocab) = p.emission;
  e.emission_rest.row(p.n_vocab).setZero();
  return e;
}

}  // namespace hmmtune
