// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <stdexcept>
#include <vector>

#include "hmmtune/assumptions.hpp"
#include "hmmtune/families.hpp"
#include "hmmtune/model.hpp"
#include "hmmtune/recovery.hpp"
#include "hmmtune/rng.hpp"

namespace {

using namespace hmmtune;

TEST_CASE("degenerate family fails the strict check but passes the relaxed one") {
  SplitMix64 rng(501);
  DegenerateFamily fam = build_degenerate_family(rng, 15, 10, 6);
  validate(fam.params);
  CHECK(fam.h_star == std::vector<int>{0, 1, 2, 3, 4, 5});
  CHECK(fam.b_set == std::vector<int>{6});

  // 15 states over 10 tokens cannot have independent emission columns.
  CHECK_FALSE(check_nondegenerate_emissions(fam.params.emission).pass);
  CHECK(check_regularity(fam.params));

  Eigen::VectorXd q = Eigen::VectorXd::Zero(15);
  q(0) = 1.0;
  q(5) = -2.0;
  RelaxedCertificate cert = check_relaxed_vanilla(fam.params, q, fam.h_star,
                                                  fam.b_set);
  CHECK(cert.pass);
  CHECK(cert.h_star_rank.pass);
}

TEST_CASE("degenerate family duplicates emission columns outside the targets") {
  SplitMix64 rng(503);
  DegenerateFamily fam = build_degenerate_family(rng, 12, 8, 5);
  // Every column past h_star equals one of the target columns.
  for (int h = 5; h < 12; ++h) {
    bool found = false;
    for (int t = 0; t < 5; ++t)
      found |= (fam.params.emission.col(h) - fam.params.emission.col(t))
                   .lpNorm<Eigen::Infinity>() == 0.0;
    CHECK(found);
  }
}

TEST_CASE("gate column reaches exactly the target set") {
  SplitMix64 rng(505);
  DegenerateFamily fam = build_degenerate_family(rng, 10, 8, 4);
  int gate = fam.b_set[0];
  for (int h = 0; h < 10; ++h) {
    bool in_star = h < 4;
    CHECK((fam.params.transition(h, gate) > 0.0) == in_star);
  }
}

TEST_CASE("equal state and token counts keep the strict check satisfiable") {
  // Peaked columns with pairwise-distinct peaks are independent even when
  // |H| = |Z|; a random draw may collide peaks, so assign them explicitly.
  SplitMix64 rng(507);
  Eigen::MatrixXd emission(8, 8);
  for (int h = 0; h < 8; ++h) emission.col(h) = peaked_column(rng, 8, h);
  CHECK(check_nondegenerate_emissions(emission).pass);
}

TEST_CASE("peaked columns are distributions dominated by their peak") {
  SplitMix64 rng(509);
  for (int ntry = 0; ntry < 20; ++ntry) {
    int peak = static_cast<int>(rng.below(6));
    Eigen::VectorXd col = peaked_column(rng, 6, peak);
    CHECK(col.sum() == doctest::Approx(1.0));
    CHECK((col.array() >= 0.0).all());
    int argmax = 0;
    col.maxCoeff(&argmax);
    CHECK(argmax == peak);
    // The enforced logit gap keeps off-peak mass negligible.
    CHECK(col(peak) > 0.99);
  }
}

TEST_CASE("gapped transition is doubly stochastic with a clear dominant term") {
  SplitMix64 rng(511);
  Eigen::MatrixXd t = gapped_transition(rng, 5);
  for (int c = 0; c < 5; ++c) {
    CHECK(t.col(c).sum() == doctest::Approx(1.0));
    CHECK(t.row(c).sum() == doctest::Approx(1.0));
  }
  CHECK((t.array() >= 0.0).all());
}

TEST_CASE("designed memory family passes the span-disjoint certificate") {
  SplitMix64 rng(513);
  DesignedMemFamily fam = build_designed_mem_family(rng, 1, 3, 4, 12, 2, 0);
  validate(fam.params);
  CHECK(fam.s_star == std::vector<int>{0, 1});
  Eigen::VectorXd q = Eigen::VectorXd::Ones(3);
  AttentionConstruction ac = construct_attention_thm3(fam.params, q, 0,
                                                      fam.s_star);
  CHECK(ac.ok);
  CHECK(ac.certificate.pass);
  // One primary block per pinned state, keyed by the flat syntax index.
  CHECK(ac.certificate.keys == ac.h_star);
}

TEST_CASE("designed family rejects vocabularies too small for distinct peaks") {
  SplitMix64 rng(515);
  // Needs 3*2 + 1*(4-2) = 8 peak tokens; 7 is one short.
  CHECK_THROWS_AS(build_designed_mem_family(rng, 1, 3, 4, 7, 2, 0),
                  std::invalid_argument);
}

TEST_CASE("stationary designed family starts at the fixed point") {
  SplitMix64 rng(517);
  DesignedMemFamily fam =
      build_designed_mem_family(rng, 1, 3, 4, 12, 2, 0, true);
  CHECK(check_stationary(fam.params));
  // Doubly stochastic transition fixes the uniform distribution.
  for (int h = 0; h < fam.params.n_hidden(); ++h)
    CHECK(fam.params.start(h) == doctest::Approx(1.0 / fam.params.n_hidden()));
}

TEST_CASE("two-cell designed family keeps per-cell structure consistent") {
  SplitMix64 rng(519);
  DesignedMemFamily fam = build_designed_mem_family(rng, 2, 2, 2, 10, 2, 1);
  validate(fam.params);
  CHECK(fam.params.n_hidden() == 4);
  CHECK(fam.params.n_mem_tuples() == 4);
  Eigen::VectorXd q(2);
  q << 1.0, -1.0;
  AttentionConstruction ac = construct_attention_thm3(fam.params, q, 1,
                                                      fam.s_star);
  CHECK(ac.ok);
}

TEST_CASE("smooth recipe keeps every probability well inside the simplex") {
  SplitMix64 rng(521);
  HmmParams p = smooth_random_hmm(rng, 4, 5, 0.3);
  validate(p);
  CHECK(p.transition.minCoeff() > 1e-4);
  CHECK(p.emission.minCoeff() > 1e-4);
  CHECK(check_regularity(p));
}

}  // namespace
