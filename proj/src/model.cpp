// SPDX-License-Identifier: Apache-2.0
#include "hmmtune/model.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace hmmtune {

namespace {
constexpr double kStochTol = 1e-12;

void check_stochastic_vector(const Eigen::VectorXd& v, const char* what) {
  if (v.size() == 0) throw std::invalid_argument(std::string(what) + ": empty");
  if (v.minCoeff() < 0.0 || v.maxCoeff() > 1.0 + kStochTol)
    throw std::invalid_argument(std::string(what) + ": entry outside [0,1]");
  if (std::abs(v.sum() - 1.0) > kStochTol)
    throw std::invalid_argument(std::string(what) + ": does not sum to 1");
}

void check_column_stochastic(const Eigen::MatrixXd& m, const char* what) {
  for (int c = 0; c < m.cols(); ++c)
    check_stochastic_vector(m.col(c), what);
}
}  // namespace

int mem_emission_col(const MemHmmParams& p, int m, int j, int s) {
  return (m * p.n_cells + j) * p.syntax_size + s;
}

std::vector<int> mem_tuple_digits(const MemHmmParams& p, long tuple_index) {
  std::vector<int> digits(p.n_cells);
  long r = tuple_index;
  long base = 1;
  for (int c = 0; c < p.n_cells - 1; ++c) base *= p.mem_size;
  for (int c = 0; c < p.n_cells; ++c) {
    digits[c] = static_cast<int>(r / base);
    r %= base;
    if (c + 1 < p.n_cells) base /= p.mem_size;
  }
  return digits;
}

Eigen::VectorXd softmax(const Eigen::VectorXd& logits, double temp) {
  Eigen::ArrayXd v = logits.array() / temp;
  v -= v.maxCoeff();
  Eigen::ArrayXd e = v.exp();
  return e / e.sum();
}

Eigen::MatrixXd random_permutation_matrix(SplitMix64& rng, int n) {
  const std::vector<int> p = rng.permutation(n);
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) P(p[i], i) = 1.0;
  return P;
}

namespace {
Eigen::MatrixXd permutation_mixture(SplitMix64& rng, int n) {
  std::vector<Eigen::MatrixXd> perms;
  perms.reserve(n);
  for (int k = 0; k < n; ++k) perms.push_back(random_permutation_matrix(rng, n));
  const Eigen::VectorXd w = softmax(rng.uniform_vec(n), 0.01);
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
  for (int k = 0; k < n; ++k) A += w(k) * perms[k];
  return A;
}
}  // namespace

HmmParams random_hmm(SplitMix64& rng, int n_hidden, int n_vocab) {
  if (n_hidden < 1 || n_vocab < 1)
    throw std::invalid_argument("random_hmm: counts must be positive");
  HmmParams p;
  p.n_hidden = n_hidden;
  p.n_vocab = n_vocab;
  p.transition = permutation_mixture(rng, n_hidden);
  p.start = softmax(rng.uniform_vec(n_hidden), 10.0);
  p.emission.resize(n_vocab, n_hidden);
  for (int h = 0; h < n_hidden; ++h)
    p.emission.col(h) = softmax(rng.uniform_vec(n_vocab), 0.01);
  return p;
}

HmmParams random_hmm(std::uint64_t seed, int n_hidden, int n_vocab) {
  SplitMix64 rng(seed);
  return random_hmm(rng, n_hidden, n_vocab);
}

MemHmmParams random_mem_hmm(SplitMix64& rng, int n_cells, int mem_size,
                            int syntax_size, int n_vocab) {
  if (n_cells < 1 || mem_size < 1 || syntax_size < 1 || n_vocab < 1)
    throw std::invalid_argument("random_mem_hmm: counts must be positive");
  MemHmmParams p;
  p.n_cells = n_cells;
  p.mem_size = mem_size;
  p.syntax_size = syntax_size;
  p.n_vocab = n_vocab;
  const int nh = p.n_hidden();
  p.transition = permutation_mixture(rng, nh);
  p.start = softmax(rng.uniform_vec(nh), 10.0);
  p.emission.resize(n_vocab, mem_size * nh);
  for (int c = 0; c < mem_size * nh; ++c)
    p.emission.col(c) = softmax(rng.uniform_vec(n_vocab), 0.01);
  p.mem_prior = Eigen::VectorXd::Ones(1);
  for (int c = 0; c < n_cells; ++c) {
    const Eigen::VectorXd cell = softmax(rng.uniform_vec(mem_size), 10.0);
    Eigen::VectorXd next(p.mem_prior.size() * mem_size);
    for (long i = 0; i < p.mem_prior.size(); ++i)
      for (int m = 0; m < mem_size; ++m)
        next(i * mem_size + m) = p.mem_prior(i) * cell(m);
    p.mem_prior = next;
  }
  return p;
}

MemHmmParams random_mem_hmm(std::uint64_t seed, int n_cells, int mem_size,
                            int syntax_size, int n_vocab) {
  SplitMix64 rng(seed);
  return random_mem_hmm(rng, n_cells, mem_size, syntax_size, n_vocab);
}

void validate(const HmmParams& p) {
  if (p.n_hidden < 1 || p.n_vocab < 1)
    throw std::invalid_argument("HmmParams: counts must be positive");
  if (p.transition.rows() != p.n_hidden || p.transition.cols() != p.n_hidden ||
      p.emission.rows() != p.n_vocab || p.emission.cols() != p.n_hidden ||
      p.start.size() != p.n_hidden)
    throw std::invalid_argument("HmmParams: shape mismatch");
  check_column_stochastic(p.transition, "transition");
  check_column_stochastic(p.emission, "emission");
  check_stochastic_vector(p.start, "start");
}

void validate(const MemHmmParams& p) {
  if (p.n_cells < 1 || p.mem_size < 1 || p.syntax_size < 1 || p.n_vocab < 1)
    throw std::invalid_argument("MemHmmParams: counts must be positive");
  const int nh = p.n_hidden();
  if (p.transition.rows() != nh || p.transition.cols() != nh ||
      p.emission.rows() != p.n_vocab ||
      p.emission.cols() != p.mem_size * nh || p.start.size() != nh ||
      p.mem_prior.size() != p.n_mem_tuples())
    throw std::invalid_argument("MemHmmParams: shape mismatch");
  check_column_stochastic(p.transition, "transition");
  check_column_stochastic(p.emission, "emission");
  check_stochastic_vector(p.start, "start");
  check_stochastic_vector(p.mem_prior, "mem_prior");
}

Eigen::VectorXd stationary_distribution(const Eigen::MatrixXd& transition,
                                        int max_iters) {
  const int n = static_cast<int>(transition.rows());
  check_column_stochastic(transition, "transition");
  Eigen::VectorXd rho = Eigen::VectorXd::Constant(n, 1.0 / n);
  double residual = 0.0;
  for (int it = 0; it < max_iters; ++it) {
    Eigen::VectorXd next = transition * rho;
    next /= next.sum();
    residual = (transition * next - next).cwiseAbs().maxCoeff();
    rho = next;
    if (residual <= 1e-12) return rho;
  }
  std::ostringstream os;
  os << "stationary_distribution: no convergence, residual " << residual;
  throw std::runtime_error(os.str());
}

SequenceSample sample_sequence(const HmmParams& p, int t_len, SplitMix64& rng) {
  if (t_len < 1) throw std::invalid_argument("sample_sequence: t_len < 1");
  SequenceSample s;
  int h = rng.categorical(p.start);
  s.hidden_path.push_back(h);
  for (int i = 0; i < t_len; ++i) {
    h = rng.categorical(p.transition.col(h));
    s.hidden_path.push_back(h);
    s.tokens.push_back(rng.categorical(p.emission.col(h)));
  }
  return s;
}

SequenceSample sample_sequence(const MemHmmParams& p, int t_len,
                               SplitMix64& rng) {
  if (t_len < 1) throw std::invalid_argument("sample_sequence: t_len < 1");
  SequenceSample s;
  const long tuple = rng.categorical(p.mem_prior);
  s.memory = mem_tuple_digits(p, tuple);
  int h = rng.categorical(p.start);
  s.hidden_path.push_back(h);
  for (int i = 0; i < t_len; ++i) {
    h = rng.categorical(p.transition.col(h));
    s.hidden_path.push_back(h);
    const int j = h / p.syntax_size;
    const int st = h % p.syntax_size;
    const int col = mem_emission_col(p, s.memory[j], j, st);
    s.tokens.push_back(rng.categorical(p.emission.col(col)));
  }
  return s;
}

HmmParams lift_mem_hmm(const MemHmmParams& p, long state_cap) {
  const int nh = p.n_hidden();
  const long nmem = p.n_mem_tuples();
  const long ntil = nmem * nh;
  if (ntil > state_cap)
    throw std::runtime_error("lift_mem_hmm: lifted state count exceeds cap");
  HmmParams out;
  out.n_hidden = static_cast<int>(ntil);
  out.n_vocab = p.n_vocab;
  out.transition = Eigen::MatrixXd::Zero(ntil, ntil);
  out.emission.resize(p.n_vocab, ntil);
  out.start.resize(ntil);
  for (long mi = 0; mi < nmem; ++mi) {
    out.transition.block(mi * nh, mi * nh, nh, nh) = p.transition;
    const std::vector<int> digits = mem_tuple_digits(p, mi);
    for (int j = 0; j < p.n_cells; ++j)
      for (int s = 0; s < p.syntax_size; ++s) {
        const int h = j * p.syntax_size + s;
        out.emission.col(mi * nh + h) =
            p.emission.col(mem_emission_col(p, digits[j], j, s));
      }
    out.start.segment(mi * nh, nh) = p.mem_prior(mi) * p.start;
  }
  return out;
}

std::map<int, Eigen::VectorXd> enumerate_conditionals(
    const Eigen::MatrixXd& transition, const Eigen::VectorXd& start,
    const std::vector<Eigen::MatrixXd>& emission_per_pos,
    const std::vector<int>& tokens, const std::set<int>& masked,
    long path_cap) {
  const int nh = static_cast<int>(transition.rows());
  const int t = static_cast<int>(tokens.size());
  if (static_cast<int>(emission_per_pos.size()) != t)
    throw std::invalid_argument("enumerate_conditionals: emission count");
  double paths = 1.0;
  for (int k = 0; k <= t; ++k) paths *= nh;
  if (paths > static_cast<double>(path_cap))
    throw std::runtime_error("enumerate_conditionals: path cap exceeded");

  std::map<int, Eigen::VectorXd> out;
  for (int i : masked) {
    Eigen::VectorXd mass = Eigen::VectorXd::Zero(nh);
    std::vector<int> path(t + 1, 0);
    while (true) {
      double w = start(path[0]);
      if (w > 0.0) {
        for (int k = 1; k <= t; ++k) {
          w *= transition(path[k], path[k - 1]);
          if (w == 0.0) break;
          const int pos = k - 1;
          if (pos != i && masked.count(pos) == 0)
            w *= emission_per_pos[pos](tokens[pos], path[k]);
          if (w == 0.0) break;
        }
        if (w > 0.0) mass(path[i + 1]) += w;
      }
      int d = t;
      while (d >= 0 && path[d] == nh - 1) path[d--] = 0;
      if (d < 0) break;
      ++path[d];
    }
    Eigen::VectorXd dist = emission_per_pos[i] * mass;
    const double n = dist.sum();
    out[i] = n > 0.0 ? Eigen::VectorXd(dist / n)
                     : Eigen::VectorXd(Eigen::VectorXd::Zero(dist.size()));
  }
  return out;
}

}  // namespace hmmtune
