// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <set>
#include <stdexcept>
#include <vector>

#include "hmmtune/model.hpp"

namespace {

using namespace hmmtune;

bool column_stochastic(const Eigen::MatrixXd& m, double tol = 1e-12) {
  if ((m.array() < -tol).any()) return false;
  for (int c = 0; c < m.cols(); ++c)
    if (std::abs(m.col(c).sum() - 1.0) > 1e-9) return false;
  return true;
}

TEST_CASE("softmax is a distribution and sharpens with temperature") {
  Eigen::VectorXd logits(4);
  logits << 0.3, -1.2, 2.0, 0.0;
  Eigen::VectorXd warm = softmax(logits, 10.0);
  Eigen::VectorXd cold = softmax(logits, 0.01);
  CHECK(warm.sum() == doctest::Approx(1.0));
  CHECK(cold.sum() == doctest::Approx(1.0));
  CHECK((warm.array() > 0.0).all());
  int argmax = 2;
  CHECK(cold(argmax) > 0.999);
  CHECK(warm.maxCoeff() < 0.5);
}

TEST_CASE("random permutation matrix has one unit entry per row and column") {
  SplitMix64 rng(3);
  Eigen::MatrixXd p = random_permutation_matrix(rng, 6);
  for (int i = 0; i < 6; ++i) {
    CHECK(p.row(i).sum() == doctest::Approx(1.0));
    CHECK(p.col(i).sum() == doctest::Approx(1.0));
    CHECK(p.row(i).maxCoeff() == doctest::Approx(1.0));
  }
}

TEST_CASE("random hmm passes validation and is deterministic in the seed") {
  HmmParams a = random_hmm(123, 5, 7);
  HmmParams b = random_hmm(123, 5, 7);
  validate(a);
  CHECK(a.transition == b.transition);
  CHECK(a.emission == b.emission);
  CHECK(a.start == b.start);
  CHECK(column_stochastic(a.transition));
  CHECK(column_stochastic(a.emission));
  CHECK(a.start.sum() == doctest::Approx(1.0));
}

TEST_CASE("random hmm transition mixes several permutations") {
  // Convex combination of permutation matrices: every column sums to one and
  // the dominant weight shows up as the largest entry of each column.
  HmmParams p = random_hmm(7, 6, 4);
  double top = p.transition.maxCoeff();
  CHECK(top < 1.0);
  CHECK(top > 1.0 / 6.0);
}

TEST_CASE("validate rejects a broken transition") {
  HmmParams p = random_hmm(11, 3, 4);
  p.transition(0, 0) += 0.5;
  CHECK_THROWS_AS(validate(p), std::invalid_argument);
}

TEST_CASE("validate rejects a negative start weight") {
  HmmParams p = random_hmm(11, 3, 4);
  p.start(0) = -0.1;
  p.start(1) += 0.1;
  CHECK_THROWS_AS(validate(p), std::invalid_argument);
}

TEST_CASE("random mem hmm validates and indexes emissions consistently") {
  MemHmmParams p = random_mem_hmm(21, 1, 3, 4, 8);
  validate(p);
  CHECK(p.n_hidden() == 4);
  CHECK(p.n_mem_tuples() == 3);
  CHECK(p.emission.cols() == 3 * 4);
  // (m, j, s) layout: m outermost, then cell, then syntax.
  CHECK(mem_emission_col(p, 2, 0, 3) == (2 * 1 + 0) * 4 + 3);
  CHECK(mem_emission_col(p, 0, 0, 0) == 0);
}

TEST_CASE("mem tuple digits decode with cell zero outermost") {
  MemHmmParams p = random_mem_hmm(22, 2, 3, 2, 5);
  CHECK(p.n_mem_tuples() == 9);
  std::vector<int> d = mem_tuple_digits(p, 5);  // 5 = 1*3 + 2
  REQUIRE(d.size() == 2);
  CHECK(d[0] == 1);
  CHECK(d[1] == 2);
}

TEST_CASE("stationary distribution is a fixed point") {
  HmmParams p = random_hmm(31, 5, 6);
  Eigen::VectorXd pi = stationary_distribution(p.transition);
  CHECK(pi.sum() == doctest::Approx(1.0));
  CHECK((p.transition * pi - pi).lpNorm<Eigen::Infinity>() < 1e-10);
}

TEST_CASE("sampled sequences have the right shape and alphabet") {
  HmmParams p = random_hmm(41, 4, 5);
  SplitMix64 rng(1);
  SequenceSample s = sample_sequence(p, 12, rng);
  REQUIRE(s.hidden_path.size() == 13);
  REQUIRE(s.tokens.size() == 12);
  for (int h : s.hidden_path) {
    CHECK(h >= 0);
    CHECK(h < 4);
  }
  for (int z : s.tokens) {
    CHECK(z >= 0);
    CHECK(z < 5);
  }
}

TEST_CASE("memory sample fixes the memory for the whole sequence") {
  MemHmmParams p = random_mem_hmm(43, 2, 3, 2, 6);
  SplitMix64 rng(2);
  SequenceSample s = sample_sequence(p, 10, rng);
  REQUIRE(s.memory.size() == 2);
  for (int m : s.memory) {
    CHECK(m >= 0);
    CHECK(m < 3);
  }
  REQUIRE(s.tokens.size() == 10);
  for (int z : s.tokens) {
    CHECK(z >= 0);
    CHECK(z < 6);
  }
}

TEST_CASE("sampling follows the start distribution") {
  HmmParams p = random_hmm(47, 3, 4);
  SplitMix64 rng(9);
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(3);
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    SequenceSample s = sample_sequence(p, 1, rng);
    counts(s.hidden_path[0]) += 1.0;
  }
  counts /= n;
  CHECK((counts - p.start).lpNorm<Eigen::Infinity>() < 0.02);
}

TEST_CASE("lifted chain is the vanilla view of the memory model") {
  MemHmmParams p = random_mem_hmm(51, 1, 2, 2, 5);
  HmmParams lifted = lift_mem_hmm(p);
  validate(lifted);
  CHECK(lifted.n_hidden == 2 * 2);
  CHECK(lifted.n_vocab == 5);
  // Block-diagonal transition: copies of the syntax chain per memory tuple.
  for (long t = 0; t < p.n_mem_tuples(); ++t)
    CHECK((lifted.transition.block(t * 2, t * 2, 2, 2) - p.transition)
              .lpNorm<Eigen::Infinity>() == 0.0);
  CHECK(lifted.transition.block(0, 2, 2, 2).lpNorm<Eigen::Infinity>() == 0.0);
  // Start factorizes as mem_prior (x) syntax start.
  for (long t = 0; t < 2; ++t)
    for (int h = 0; h < 2; ++h)
      CHECK(lifted.start(t * 2 + h) ==
            doctest::Approx(p.mem_prior(t) * p.start(h)));
  // Emission columns line up with the (m, j, s) emission table.
  for (int m = 0; m < 2; ++m)
    for (int s = 0; s < 2; ++s)
      CHECK((lifted.emission.col(m * 2 + s) -
             p.emission.col(mem_emission_col(p, m, 0, s)))
                .lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("lift rejects oversized state spaces") {
  MemHmmParams p = random_mem_hmm(53, 3, 9, 3, 5);
  CHECK_THROWS(lift_mem_hmm(p, 100));
}

TEST_CASE("brute-force conditionals are distributions on unmasked context") {
  HmmParams p = random_hmm(61, 3, 4);
  std::vector<int> tokens = {1, 0, 3, 2};
  std::vector<Eigen::MatrixXd> ems(4, p.emission);
  auto out = enumerate_conditionals(p.transition, p.start, ems, tokens, {1, 3});
  REQUIRE(out.size() == 2);
  for (auto& [i, v] : out) {
    CHECK(v.size() == 4);
    CHECK(v.sum() == doctest::Approx(1.0));
    CHECK((v.array() >= 0.0).all());
  }
}

TEST_CASE("brute-force conditional matches a hand-built two-step chain") {
  // Two states, deterministic emissions: state h emits token h. With the
  // second position masked, P(X_2 | X_1 = 0) is the transition column 0.
  HmmParams p;
  p.n_hidden = 2;
  p.n_vocab = 2;
  p.transition.resize(2, 2);
  p.transition << 0.9, 0.4, 0.1, 0.6;
  p.emission = Eigen::MatrixXd::Identity(2, 2);
  p.start.resize(2);
  p.start << 0.7, 0.3;
  validate(p);
  std::vector<Eigen::MatrixXd> ems(2, p.emission);
  auto out =
      enumerate_conditionals(p.transition, p.start, ems, {0, 0}, {1});
  REQUIRE(out.count(1) == 1);
  // H_1 = 0 given X_1 = 0; X_2 ~ emission * transition e_0 = (0.9, 0.1).
  CHECK(out[1](0) == doctest::Approx(0.9));
  CHECK(out[1](1) == doctest::Approx(0.1));
}

}  // namespace
