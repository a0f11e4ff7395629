// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "hmmtune/model.hpp"

namespace hmmtune {

// Default rank tolerance: singular value counts when > tol * sigma_max.
inline constexpr double kRankTol = 1e-8;

int column_rank(const Eigen::MatrixXd& m, double tol = kRankTol);
bool full_column_rank(const Eigen::MatrixXd& m, double tol = kRankTol);
// Moore-Penrose left inverse via SVD (no regularization; callers certify
// full column rank first).
Eigen::MatrixXd pseudo_inverse(const Eigen::MatrixXd& m, double tol = kRankTol);

struct RankCertificate {
  bool pass = false;
  int rank = 0;
  int cols = 0;
  double sigma_max = 0.0;
  double sigma_min = 0.0;  // smallest singular value of the full column set
  double tol = kRankTol;
};

// Emission columns linearly independent (fails outright when |H| > |Z|).
RankCertificate check_nondegenerate_emissions(const Eigen::MatrixXd& emission,
                                              double tol = kRankTol);

// Chain ergodic (strongly connected + aperiodic on the positive-entry graph)
// and start with full support.
bool check_regularity(const HmmParams& p);

struct RelaxedCertificate {
  bool pass = false;
  std::string reason;  // empty on pass
  RankCertificate h_star_rank;
};

// Relaxed non-degeneracy: supp(q_star) inside h_star, emission columns of
// h_star independent, and h_star equals the one-step reachable set of b_set.
RelaxedCertificate check_relaxed_vanilla(const HmmParams& p,
                                         const Eigen::VectorXd& q_star,
                                         const std::vector<int>& h_star,
                                         const std::vector<int>& b_set,
                                         double tol = kRankTol);

// Exhaustive search over subsets of size <= k_max for a set whose one-step
// reachable set equals h_star; smallest/lexicographically first match.
std::optional<std::vector<int>> search_b_set(const HmmParams& p,
                                             const std::vector<int>& h_star,
                                             int k_max = 3);

struct RecoveryCertificate {
  bool pass = false;
  // "primary_rank_deficient:<key>", "stacked_rank_deficient", or the strictly
  // weaker "stacked_rank_deficient_pairwise_ok" (pairwise intersections all
  // trivial yet the direct sum still fails).
  std::string reason;
  double tol = kRankTol;
  std::vector<int> keys;                   // one per primary block
  std::vector<Eigen::MatrixXd> recovery;   // B_key: projects onto that block's span
  Eigen::MatrixXd complement_recovery;     // projects onto the complement span
  int complement_rank = 0;
  double stacked_sigma_min = 0.0;
  double stacked_sigma_max = 0.0;
};

// Direct-sum check: each primary block full column rank, and the stack of all
// primary blocks plus an orthonormal basis of the complement span full column
// rank. On pass, least-squares recovery matrices satisfy
// B_key * (sum of one vector per span) = that key's component.
RecoveryCertificate check_span_disjoint(
    const std::vector<std::pair<int, Eigen::MatrixXd>>& primaries,
    const Eigen::MatrixXd& complement, double tol = kRankTol);

// Start distribution fixed by the transition: |transition*start - start|_inf.
bool check_stationary(const HmmParams& p, double tol = 1e-10);
bool check_stationary(const MemHmmParams& p, double tol = 1e-10);

}  // namespace hmmtune
