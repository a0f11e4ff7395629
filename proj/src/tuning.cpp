// SPDX-License-Identifier: Apache-2.0
#include "hmmtune/tuning.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "hmmtune/inference.hpp"

namespace hmmtune {
namespace {

Eigen::VectorXd to_vector(const std::vector<int>& labels) {
  Eigen::VectorXd y(static_cast<int>(labels.size()));
  for (int i = 0; i < y.size(); ++i) y(i) = labels[i];
  return y;
}

Eigen::VectorXd sigmoid_vec(const Eigen::VectorXd& z) {
  Eigen::VectorXd out(z.size());
  for (int i = 0; i < z.size(); ++i) out(i) = stable_sigmoid(z(i));
  return out;
}

void guard_finite(double loss, int step) {
  if (!std::isfinite(loss)) {
    std::ostringstream msg;
    msg << "non-finite training loss at step " << step;
    throw std::runtime_error(msg.str());
  }
}

// Trace sampling interval: one entry per epoch regardless of overrides.
int record_every(int steps, int epochs) {
  if (epochs < 1) epochs = 1;
  return std::max(1, (steps + epochs - 1) / epochs);
}

// Forward chain through the prompt rows, shared across sequences. Scales are
// the pre-normalization sums, frozen to 1 where the sum vanishes so the
// backward pass divides by exactly what the forward pass divided by.
struct PromptChain {
  std::vector<Eigen::VectorXd> alphas;  // prompt_len + 1 entries
  std::vector<double> scales;           // prompt_len entries
};

PromptChain prompt_forward(const HmmParams& p, const Eigen::MatrixXd& prompt) {
  const int L = static_cast<int>(prompt.rows());
  PromptChain ch;
  ch.alphas.reserve(L + 1);
  ch.scales.reserve(L);
  Eigen::VectorXd a0 = p.transition * p.start;
  ch.alphas.push_back(a0 / a0.sum());
  for (int j = 0; j < L; ++j) {
    Eigen::VectorXd a =
        p.transition * ch.alphas.back().cwiseProduct(prompt.row(j).transpose());
    double s = a.sum();
    ch.scales.push_back(s > 0 ? s : 1.0);
    ch.alphas.push_back(a / ch.scales.back());
  }
  return ch;
}

// Classifier inputs for a fixed alpha at the mask: G row i is the conditional
// token distribution given beta row i, all-zeros on vanishing mass.
Eigen::MatrixXd prompt_features_at(const HmmParams& p,
                                   const Eigen::MatrixXd& beta_features,
                                   const Eigen::VectorXd& alpha_mask) {
  const int n = static_cast<int>(beta_features.rows());
  Eigen::MatrixXd tau =
      (beta_features.array().rowwise() * alpha_mask.transpose().array())
          .matrix();
  Eigen::MatrixXd g(n, p.n_vocab);
  for (int i = 0; i < n; ++i) {
    double s = tau.row(i).sum();
    if (s > 0)
      g.row(i) = (p.emission * (tau.row(i).transpose() / s)).transpose();
    else
      g.row(i).setZero();
  }
  return g;
}

struct PromptBackward {
  double loss = 0.0;
  Eigen::VectorXd d_head;
  Eigen::MatrixXd d_prompt;
};

PromptBackward prompt_loss_and_grads(const HmmParams& p,
                                     const Eigen::MatrixXd& beta_features,
                                     const Eigen::VectorXd& y,
                                     const std::vector<int>& labels,
                                     const Eigen::MatrixXd& prompt,
                                     const Eigen::VectorXd& head) {
  const int n = static_cast<int>(beta_features.rows());
  const int L = static_cast<int>(prompt.rows());
  PromptChain ch = prompt_forward(p, prompt);
  const Eigen::VectorXd& am = ch.alphas[L];

  Eigen::MatrixXd tau =
      (beta_features.array().rowwise() * am.transpose().array()).matrix();
  Eigen::VectorXd inv_s(n);
  for (int i = 0; i < n; ++i) {
    double s = tau.row(i).sum();
    inv_s(i) = s > 0 ? 1.0 / s : 0.0;
  }
  Eigen::MatrixXd g =
      (tau.array().colwise() * inv_s.array()).matrix() * p.emission.transpose();
  Eigen::VectorXd z = g * head;
  Eigen::VectorXd pr = sigmoid_vec(z);

  PromptBackward out;
  out.loss = logistic_loss(pr, labels);
  Eigen::VectorXd dz = (pr - y) / n;
  out.d_head = g.transpose() * dz;

  // d loss / d tau(i,h) = dz_i / s_i * (wb_h - z_i), wb = emission^T head.
  Eigen::VectorXd wb = p.emission.transpose() * head;
  Eigen::VectorXd coef = dz.cwiseProduct(inv_s);
  Eigen::MatrixXd d_tau =
      coef * wb.transpose() - (coef.cwiseProduct(z)) * Eigen::RowVectorXd::Ones(p.n_hidden);
  Eigen::VectorXd da =
      (d_tau.array() * beta_features.array()).colwise().sum().matrix().transpose();

  out.d_prompt.resize(L, p.n_hidden);
  for (int j = L - 1; j >= 0; --j) {
    Eigen::VectorXd du = (p.transition.transpose() * da) / ch.scales[j];
    out.d_prompt.row(j) = du.cwiseProduct(ch.alphas[j]).transpose();
    da = du.cwiseProduct(prompt.row(j).transpose());
  }
  return out;
}

Eigen::MatrixXd stack_rows(const std::vector<Eigen::MatrixXd>& blocks) {
  const long t = blocks.front().rows();
  const long cols = blocks.front().cols();
  Eigen::MatrixXd out(t * static_cast<long>(blocks.size()), cols);
  for (size_t i = 0; i < blocks.size(); ++i) {
    if (blocks[i].rows() != t || blocks[i].cols() != cols)
      throw std::invalid_argument("feature blocks must share dimensions");
    out.middleRows(static_cast<long>(i) * t, t) = blocks[i];
  }
  return out;
}

std::vector<Eigen::VectorXd> matrix_rows(const Eigen::MatrixXd& m) {
  std::vector<Eigen::VectorXd> rows;
  rows.reserve(m.rows());
  for (int i = 0; i < m.rows(); ++i) rows.push_back(m.row(i).transpose());
  return rows;
}

}  // namespace

int train_steps(const TrainConfig& cfg, int n_examples) {
  if (cfg.steps_override > 0) return cfg.steps_override;
  if (cfg.epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (cfg.batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  int per_epoch = (n_examples + cfg.batch_size - 1) / cfg.batch_size;
  return cfg.epochs * std::max(1, per_epoch);
}

double stable_sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  double ez = std::exp(z);
  return ez / (1.0 + ez);
}

double logistic_loss(const Eigen::VectorXd& probs,
                     const std::vector<int>& labels) {
  const double eps = 1e-300;
  double total = 0.0;
  for (int i = 0; i < probs.size(); ++i) {
    total -= labels[i] == 1 ? std::log(probs(i) + eps)
                            : std::log(1.0 - probs(i) + eps);
  }
  return probs.size() > 0 ? total / static_cast<double>(probs.size()) : 0.0;
}

HeadTrainResult train_linear_head(const Eigen::MatrixXd& features,
                                  const std::vector<int>& labels,
                                  const TrainConfig& cfg) {
  if (features.rows() != static_cast<long>(labels.size()))
    throw std::invalid_argument("feature/label count mismatch");
  const int n = static_cast<int>(features.rows());
  const int steps = train_steps(cfg, n);
  const int every = record_every(steps, cfg.epochs);
  Eigen::VectorXd y = to_vector(labels);

  HeadTrainResult out;
  out.head.weights = Eigen::VectorXd::Zero(features.cols());
  for (int step = 0; step < steps; ++step) {
    Eigen::VectorXd pr = sigmoid_vec(features * out.head.weights);
    double loss = logistic_loss(pr, labels);
    guard_finite(loss, step);
    if (step % every == 0) out.losses.push_back(loss);
    Eigen::VectorXd grad = features.transpose() * (pr - y) / n;
    out.head.weights -= cfg.learning_rate * grad;
  }
  out.losses.push_back(
      logistic_loss(sigmoid_vec(features * out.head.weights), labels));
  return out;
}

double head_accuracy(const Eigen::MatrixXd& features,
                     const std::vector<int>& labels, const LinearHead& head) {
  int correct = 0;
  for (int i = 0; i < features.rows(); ++i) {
    int lab = features.row(i).dot(head.weights.transpose()) >= 0 ? 1 : 0;
    correct += lab == labels[i];
  }
  return static_cast<double>(correct) /
         std::max<long>(1, static_cast<long>(features.rows()));
}

Eigen::VectorXd masked_h1_feature(const HmmParams& p,
                                  const std::vector<int>& tokens) {
  Messages msg = compute_messages(p, embed_tokens(p, tokens, {0}));
  Eigen::VectorXd tau = msg.alpha[0].cwiseProduct(msg.beta[0]);
  double s = tau.sum();
  if (s <= 0) return Eigen::VectorXd::Zero(p.n_vocab);
  return p.emission * (tau / s);
}

Eigen::VectorXd beta_at_mask(const HmmParams& p,
                             const std::vector<int>& tokens) {
  return compute_messages(p, embed_tokens(p, tokens, {0})).beta[0];
}

VanillaFeatures vanilla_features(const HmmParams& p,
                                 const std::vector<std::vector<int>>& seqs) {
  VanillaFeatures out;
  out.g1.resize(static_cast<long>(seqs.size()), p.n_vocab);
  out.beta.resize(static_cast<long>(seqs.size()), p.n_hidden);
  for (size_t i = 0; i < seqs.size(); ++i) {
    Messages msg = compute_messages(p, embed_tokens(p, seqs[i], {0}));
    Eigen::VectorXd tau = msg.alpha[0].cwiseProduct(msg.beta[0]);
    double s = tau.sum();
    if (s > 0)
      out.g1.row(i) = (p.emission * (tau / s)).transpose();
    else
      out.g1.row(i).setZero();
    out.beta.row(i) = msg.beta[0].transpose();
  }
  return out;
}

PromptTrainResult train_prompt(const HmmParams& p,
                               const Eigen::MatrixXd& beta_features,
                               const std::vector<int>& labels,
                               const TrainConfig& cfg) {
  if (cfg.prompt_len < 1)
    throw std::invalid_argument("prompt_len must be >= 1");
  if (beta_features.rows() != static_cast<long>(labels.size()))
    throw std::invalid_argument("feature/label count mismatch");
  const int n = static_cast<int>(beta_features.rows());
  const int steps = train_steps(cfg, n);
  const int every = record_every(steps, cfg.epochs);
  Eigen::VectorXd y = to_vector(labels);

  SplitMix64 rng(cfg.seed);
  PromptTrainResult out;
  out.prompt.resize(cfg.prompt_len, p.n_hidden);
  for (int j = 0; j < cfg.prompt_len; ++j)
    for (int h = 0; h < p.n_hidden; ++h)
      out.prompt(j, h) = rng.uniform(0.25, 0.75);
  out.head.weights = Eigen::VectorXd::Zero(p.n_vocab);

  const double fd_step = 1e-5;
  for (int step = 0; step < steps; ++step) {
    PromptBackward bk = prompt_loss_and_grads(p, beta_features, y, labels,
                                              out.prompt, out.head.weights);
    guard_finite(bk.loss, step);
    if (step % every == 0) out.losses.push_back(bk.loss);
    if (cfg.grad_mode == GradMode::kFiniteDifference) {
      Eigen::MatrixXd probe = out.prompt;
      for (int j = 0; j < probe.rows(); ++j) {
        for (int h = 0; h < probe.cols(); ++h) {
          double saved = probe(j, h);
          probe(j, h) = saved + fd_step;
          double hi = prompt_loss(p, beta_features, labels, probe, out.head);
          probe(j, h) = saved - fd_step;
          double lo = prompt_loss(p, beta_features, labels, probe, out.head);
          probe(j, h) = saved;
          bk.d_prompt(j, h) = (hi - lo) / (2 * fd_step);
        }
      }
    }
    out.head.weights -= cfg.learning_rate * bk.d_head;
    out.prompt = (out.prompt - cfg.learning_rate * bk.d_prompt)
                     .cwiseMax(0.0)
                     .cwiseMin(1.0);
  }
  out.losses.push_back(
      prompt_loss(p, beta_features, labels, out.prompt, out.head));
  return out;
}

Eigen::MatrixXd prompt_features(const HmmParams& p,
                                const Eigen::MatrixXd& beta_features,
                                const Eigen::MatrixXd& prompt) {
  PromptChain ch = prompt_forward(p, prompt);
  return prompt_features_at(p, beta_features, ch.alphas.back());
}

double prompt_loss(const HmmParams& p, const Eigen::MatrixXd& beta_features,
                   const std::vector<int>& labels,
                   const Eigen::MatrixXd& prompt, const LinearHead& head) {
  Eigen::MatrixXd g = prompt_features(p, beta_features, prompt);
  return logistic_loss(sigmoid_vec(g * head.weights), labels);
}

Eigen::MatrixXd prompt_gradient(const HmmParams& p,
                                const Eigen::MatrixXd& beta_features,
                                const std::vector<int>& labels,
                                const Eigen::MatrixXd& prompt,
                                const LinearHead& head) {
  Eigen::VectorXd y = to_vector(labels);
  return prompt_loss_and_grads(p, beta_features, y, labels, prompt,
                               head.weights)
      .d_prompt;
}

double prompt_accuracy(const HmmParams& p,
                       const Eigen::MatrixXd& beta_features,
                       const std::vector<int>& labels,
                       const Eigen::MatrixXd& prompt, const LinearHead& head) {
  Eigen::MatrixXd g = prompt_features(p, beta_features, prompt);
  return head_accuracy(g, labels, head);
}

Eigen::MatrixXd mem_oracle_features(const MemHmmParams& p,
                                    const HmmParams& lifted,
                                    const std::vector<int>& tokens) {
  std::vector<Eigen::VectorXd> g =
      gbar_mem(p, lifted, embed_tokens(lifted, tokens, {0}));
  Eigen::MatrixXd out(static_cast<long>(g.size()), p.n_vocab);
  for (size_t i = 0; i < g.size(); ++i) out.row(i) = g[i].transpose();
  return out;
}

Eigen::MatrixXd value_embeddings(const MemHmmParams& p,
                                 const std::vector<int>& tokens) {
  const int dim = p.mem_size * p.n_hidden();
  Eigen::MatrixXd out(static_cast<long>(tokens.size()), dim);
  out.row(0).setOnes();
  for (size_t i = 1; i < tokens.size(); ++i)
    out.row(i) = proper_embedding(p, tokens[i]).transpose();
  return out;
}

AttentionTrainResult train_attention_head(
    const MemHmmParams& p, const std::vector<Eigen::MatrixXd>& features,
    const std::vector<Eigen::MatrixXd>& value_embeds,
    const std::vector<int>& labels, const TrainConfig& cfg) {
  if (features.empty() || features.size() != value_embeds.size() ||
      features.size() != labels.size())
    throw std::invalid_argument("feature/label count mismatch");
  const int n = static_cast<int>(features.size());
  const int t_len = static_cast<int>(features.front().rows());
  const int nz = p.n_vocab;
  const int nq = p.n_hidden() + 1;
  const int nv = p.mem_size * p.n_hidden();
  const int steps = train_steps(cfg, n);
  const int every = record_every(steps, cfg.epochs);
  Eigen::VectorXd y = to_vector(labels);

  Eigen::MatrixXd g_all = stack_rows(features);        // (n*T) x nz
  Eigen::MatrixXd e_all = stack_rows(value_embeds);    // (n*T) x nv

  SplitMix64 rng(cfg.seed);
  Eigen::VectorXd q = rng.normal_vec(nq) * cfg.init_scale;
  Eigen::MatrixXd key(nq, nz);
  for (int r = 0; r < nq; ++r)
    for (int c = 0; c < nz; ++c) key(r, c) = rng.normal() * cfg.init_scale;
  Eigen::MatrixXd value(nv, nz);
  for (int r = 0; r < nv; ++r)
    for (int c = 0; c < nz; ++c) value(r, c) = rng.normal() * cfg.init_scale;
  Eigen::VectorXd b = rng.normal_vec(nv) * cfg.init_scale;

  AttentionTrainResult out;
  Eigen::VectorXd w_all(static_cast<long>(n) * t_len);
  Eigen::VectorXd dvals(static_cast<long>(n) * t_len);
  Eigen::VectorXd dsc(static_cast<long>(n) * t_len);
  for (int step = 0; step < steps; ++step) {
    double temp = cfg.temp_start *
                  std::pow(cfg.temp_end / cfg.temp_start,
                           static_cast<double>(step) / std::max(1, steps - 1));
    Eigen::MatrixXd kg = g_all * key.transpose();                 // (nT) x nq
    Eigen::VectorXd scores = kg * q;                              // (nT)
    Eigen::MatrixXd vge =
        (g_all * value.transpose()).cwiseProduct(e_all);          // (nT) x nv
    Eigen::VectorXd vals = vge * b;                               // (nT)

    Eigen::VectorXd outputs(n);
    for (int i = 0; i < n; ++i) {
      auto sc = scores.segment(static_cast<long>(i) * t_len, t_len);
      Eigen::VectorXd sm = sc / temp;
      Eigen::VectorXd w = (sm.array() - sm.maxCoeff()).exp().matrix();
      w /= w.sum();
      w_all.segment(static_cast<long>(i) * t_len, t_len) = w;
      outputs(i) =
          w.dot(vals.segment(static_cast<long>(i) * t_len, t_len));
    }
    Eigen::VectorXd pr = sigmoid_vec(outputs);
    double loss = logistic_loss(pr, labels);
    guard_finite(loss, step);
    if (step % every == 0) out.losses.push_back(loss);

    Eigen::VectorXd dout = (pr - y) / n;
    for (int i = 0; i < n; ++i) {
      auto w = w_all.segment(static_cast<long>(i) * t_len, t_len);
      auto v = vals.segment(static_cast<long>(i) * t_len, t_len);
      Eigen::VectorXd dw = dout(i) * v;
      dvals.segment(static_cast<long>(i) * t_len, t_len) = dout(i) * w;
      dsc.segment(static_cast<long>(i) * t_len, t_len) =
          ((dw.array() - dw.dot(w)) * w.array() / temp).matrix();
    }
    Eigen::VectorXd dq = kg.transpose() * dsc;
    Eigen::MatrixXd dkey = q * (dsc.transpose() * g_all);
    Eigen::MatrixXd dvg =
        ((e_all.array().rowwise() * b.transpose().array()).colwise() *
         dvals.array())
            .matrix();
    Eigen::MatrixXd dvalue = dvg.transpose() * g_all;
    Eigen::VectorXd db = vge.transpose() * dvals;

    q -= cfg.learning_rate * dq;
    key -= cfg.learning_rate * dkey;
    value -= cfg.learning_rate * dvalue;
    b -= cfg.learning_rate * db;
  }

  out.head.query = q;
  out.head.key = key;
  out.head.value = value;
  out.head.value_weights = b;
  {
    Eigen::VectorXd scores = g_all * key.transpose() * q;
    Eigen::VectorXd vals =
        (g_all * value.transpose()).cwiseProduct(e_all) * b;
    Eigen::VectorXd outputs(n);
    double temp = cfg.temp_end;
    for (int i = 0; i < n; ++i) {
      auto sc = scores.segment(static_cast<long>(i) * t_len, t_len);
      Eigen::VectorXd sm = sc / temp;
      Eigen::VectorXd w = (sm.array() - sm.maxCoeff()).exp().matrix();
      w /= w.sum();
      outputs(i) =
          w.dot(vals.segment(static_cast<long>(i) * t_len, t_len));
    }
    out.losses.push_back(logistic_loss(sigmoid_vec(outputs), labels));
  }
  return out;
}

double softmax_attention_score(const AttentionHead& head,
                               const Eigen::MatrixXd& features,
                               const Eigen::MatrixXd& value_embeds,
                               double temp) {
  const int t_len = static_cast<int>(features.rows());
  Eigen::VectorXd scores(t_len);
  for (int i = 0; i < t_len; ++i) {
    double s = head.query.dot(head.key * features.row(i).transpose());
    if (i < static_cast<int>(head.offsets.size()))
      s += head.query.dot(head.offsets[i]);
    scores(i) = s;
  }
  Eigen::VectorXd sm = scores / temp;
  Eigen::VectorXd w = (sm.array() - sm.maxCoeff()).exp().matrix();
  w /= w.sum();
  double out = 0.0;
  for (int i = 0; i < t_len; ++i) {
    Eigen::VectorXd vg = head.value * features.row(i).transpose();
    out += w(i) * head.value_weights.dot(
                      vg.cwiseProduct(value_embeds.row(i).transpose()));
  }
  return out;
}

AttentionEval eval_attention_rows(const AttentionHead& head,
                                  const Eigen::MatrixXd& features,
                                  const Eigen::MatrixXd& value_embeds) {
  return eval_attention(head, matrix_rows(features),
                        matrix_rows(value_embeds));
}

double attention_accuracy(const AttentionHead& head,
                          const std::vector<Eigen::MatrixXd>& features,
                          const std::vector<Eigen::MatrixXd>& value_embeds,
                          const std::vector<int>& labels) {
  int correct = 0;
  for (size_t i = 0; i < features.size(); ++i) {
    AttentionEval ev =
        eval_attention_rows(head, features[i], value_embeds[i]);
    correct += ev.label == labels[i];
  }
  return static_cast<double>(correct) / std::max<size_t>(1, features.size());
}

}  // namespace hmmtune
