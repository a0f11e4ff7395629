// SPDX-License-Identifier: Apache-2.0
#include "hmmtune/assumptions.hpp"

#include <algorithm>
#include <functional>
#include <numeric>
#include <set>

#include <Eigen/SVD>

namespace hmmtune {

namespace {
Eigen::VectorXd singular_values(const Eigen::MatrixXd& m) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  return svd.singularValues();
}
}  // namespace

int column_rank(const Eigen::MatrixXd& m, double tol) {
  if (m.size() == 0) return 0;
  const Eigen::VectorXd s = singular_values(m);
  if (s.size() == 0 || s(0) <= 0.0) return 0;
  return static_cast<int>((s.array() > tol * s(0)).count());
}

bool full_column_rank(const Eigen::MatrixXd& m, double tol) {
  return m.cols() == 0 || column_rank(m, tol) == m.cols();
}

Eigen::MatrixXd pseudo_inverse(const Eigen::MatrixXd& m, double tol) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(
      m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& s = svd.singularValues();
  const double cut = s.size() > 0 ? tol * s(0) : 0.0;
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(s.size());
  for (int i = 0; i < s.size(); ++i)
    if (s(i) > cut) inv(i) = 1.0 / s(i);
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

RankCertificate check_nondegenerate_emissions(const Eigen::MatrixXd& emission,
                                              double tol) {
  RankCertificate c;
  c.cols = static_cast<int>(emission.cols());
  c.tol = tol;
  const Eigen::VectorXd s = singular_values(emission);
  c.sigma_max = s.size() > 0 ? s(0) : 0.0;
  c.sigma_min = s.size() > 0 ? s(s.size() - 1) : 0.0;
  c.rank = column_rank(emission, tol);
  // More columns than rows can never be independent; sigma_min then refers to
  // the smallest of the min(rows, cols) values and pass stays false.
  c.pass = (c.rank == c.cols) && (emission.rows() >= emission.cols());
  return c;
}

bool check_regularity(const HmmParams& p) {
  const int n = p.n_hidden;
  if ((p.start.array() <= 0.0).any()) return false;
  const auto edge = [&](int from, int to) {
    return p.transition(to, from) > 0.0;
  };
  // Strong connectivity: everything reachable from 0, forward and backward.
  const auto reach = [&](bool forward) {
    std::vector<char> seen(n, 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    int count = 1;
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      for (int v = 0; v < n; ++v) {
        const bool e = forward ? edge(u, v) : edge(v, u);
        if (e && !seen[v]) {
          seen[v] = 1;
          ++count;
          stack.push_back(v);
        }
      }
    }
    return count;
  };
  if (reach(true) != n || reach(false) != n) return false;
  // Aperiodicity: gcd over all edges (u,v) of level[u] + 1 - level[v], with
  // levels from a BFS tree; the chain is aperiodic iff the gcd is 1.
  std::vector<int> level(n, -1);
  std::vector<int> queue{0};
  level[0] = 0;
  for (std::size_t qi = 0; qi < queue.size(); ++qi) {
    const int u = queue[qi];
    for (int v = 0; v < n; ++v)
      if (edge(u, v) && level[v] < 0) {
        level[v] = level[u] + 1;
        queue.push_back(v);
      }
  }
  int g = 0;
  for (int u = 0; u < n; ++u)
    for (int v = 0; v < n; ++v)
      if (edge(u, v)) g = std::gcd(g, level[u] + 1 - level[v]);
  return std::abs(g) == 1;
}

RelaxedCertificate check_relaxed_vanilla(const HmmParams& p,
                                         const Eigen::VectorXd& q_star,
                                         const std::vector<int>& h_star,
                                         const std::vector<int>& b_set,
                                         double tol) {
  RelaxedCertificate c;
  const std::set<int> hs(h_star.begin(), h_star.end());
  for (int h : h_star)
    if (h < 0 || h >= p.n_hidden) {
      c.reason = "h_star_out_of_range";
      return c;
    }
  for (int h : b_set)
    if (h < 0 || h >= p.n_hidden) {
      c.reason = "b_set_out_of_range";
      return c;
    }
  for (int h = 0; h < p.n_hidden; ++h)
    if (q_star(h) != 0.0 && hs.count(h) == 0) {
      c.reason = "qstar_support_outside_h_star";
      return c;
    }
  Eigen::MatrixXd cols(p.n_vocab, h_star.size());
  for (std::size_t i = 0; i < h_star.size(); ++i)
    cols.col(i) = p.emission.col(h_star[i]);
  c.h_star_rank = check_nondegenerate_emissions(cols, tol);
  if (!c.h_star_rank.pass) {
    c.reason = "h_star_emission_rank_deficient";
    return c;
  }
  std::set<int> reachable;
  for (int h : b_set)
    for (int h2 = 0; h2 < p.n_hidden; ++h2)
      if (p.transition(h2, h) > 0.0) reachable.insert(h2);
  if (reachable != hs) {
    c.reason = "b_set_reachable_set_mismatch";
    return c;
  }
  c.pass = true;
  return c;
}

std::optional<std::vector<int>> search_b_set(const HmmParams& p,
                                             const std::vector<int>& h_star,
                                             int k_max) {
  const std::set<int> target(h_star.begin(), h_star.end());
  const int n = p.n_hidden;
  // Depth-first enumeration in lexicographic order, size 1 upward.
  for (int k = 1; k <= k_max; ++k) {
    std::vector<int> idx(k);
    const std::function<std::optional<std::vector<int>>(int, int)> rec =
        [&](int depth, int from) -> std::optional<std::vector<int>> {
      if (depth == k) {
        std::set<int> reachable;
        for (int h : idx)
          for (int h2 = 0; h2 < n; ++h2)
            if (p.transition(h2, h) > 0.0) reachable.insert(h2);
        if (reachable == target) return idx;
        return std::nullopt;
      }
      for (int i = from; i < n; ++i) {
        idx[depth] = i;
        if (auto r = rec(depth + 1, i + 1)) return r;
      }
      return std::nullopt;
    };
    if (auto r = rec(0, 0)) return r;
  }
  return std::nullopt;
}

RecoveryCertificate check_span_disjoint(
    const std::vector<std::pair<int, Eigen::MatrixXd>>& primaries,
    const Eigen::MatrixXd& complement, double tol) {
  RecoveryCertificate c;
  c.tol = tol;
  if (primaries.empty()) {
    c.reason = "no_primary_blocks";
    return c;
  }
  const long rows = primaries[0].second.rows();
  for (const auto& [key, block] : primaries) {
    if (!full_column_rank(block, tol)) {
      c.reason = "primary_rank_deficient:" + std::to_string(key);
      return c;
    }
  }
  // Rank-revealing orthonormal basis of the complement span.
  Eigen::MatrixXd comp_basis(rows, 0);
  if (complement.cols() > 0) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(complement, Eigen::ComputeThinU);
    const Eigen::VectorXd& s = svd.singularValues();
    int r = 0;
    if (s.size() > 0 && s(0) > 0.0)
      r = static_cast<int>((s.array() > tol * s(0)).count());
    comp_basis = svd.matrixU().leftCols(r);
  }
  c.complement_rank = static_cast<int>(comp_basis.cols());

  long total_cols = comp_basis.cols();
  for (const auto& [key, block] : primaries) total_cols += block.cols();
  Eigen::MatrixXd stacked(rows, total_cols);
  long off = 0;
  for (const auto& [key, block] : primaries) {
    stacked.middleCols(off, block.cols()) = block;
    off += block.cols();
  }
  stacked.middleCols(off, comp_basis.cols()) = comp_basis;

  {
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(stacked);
    const Eigen::VectorXd& s = svd.singularValues();
    c.stacked_sigma_max = s.size() > 0 ? s(0) : 0.0;
    c.stacked_sigma_min = s.size() > 0 ? s(s.size() - 1) : 0.0;
  }
  if (!full_column_rank(stacked, tol)) {
    // Direct sum failed; report whether every pairwise intersection is still
    // trivial (the strictly weaker condition).
    std::vector<Eigen::MatrixXd> blocks;
    for (const auto& [key, block] : primaries) blocks.push_back(block);
    if (comp_basis.cols() > 0) blocks.push_back(comp_basis);
    bool pairwise_ok = true;
    for (std::size_t a = 0; a + 1 < blocks.size() && pairwise_ok; ++a)
      for (std::size_t b = a + 1; b < blocks.size() && pairwise_ok; ++b) {
        Eigen::MatrixXd ab(rows, blocks[a].cols() + blocks[b].cols());
        ab << blocks[a], blocks[b];
        if (column_rank(ab, tol) < ab.cols()) pairwise_ok = false;
      }
    c.reason = pairwise_ok ? "stacked_rank_deficient_pairwise_ok"
                           : "stacked_rank_deficient";
    return c;
  }

  const Eigen::MatrixXd stacked_pinv = pseudo_inverse(stacked, tol);
  off = 0;
  for (const auto& [key, block] : primaries) {
    c.keys.push_back(key);
    c.recovery.push_back(block * stacked_pinv.middleRows(off, block.cols()));
    off += block.cols();
  }
  c.complement_recovery =
      comp_basis * stacked_pinv.middleRows(off, comp_basis.cols());
  if (c.complement_recovery.size() == 0)
    c.complement_recovery = Eigen::MatrixXd::Zero(rows, rows);
  c.pass = true;
  return c;
}

bool check_stationary(const HmmParams& p, double tol) {
  return (p.transition * p.start - p.start).cwiseAbs().maxCoeff() <= tol;
}

bool check_stationary(const MemHmmParams& p, double tol) {
  return (p.transition * p.start - p.start).cwiseAbs().maxCoeff() <= tol;
}

}  // namespace hmmtune
