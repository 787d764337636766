#pragma once

#include <algorithm>
#include <limits>
#include <numeric>
#include <vector>

#include "numerics.hpp"

namespace archlab {

struct RowMatching {
  std::vector<Index> assignment;  // estimate row i  ->  reference row assignment[i]
  double cost = 0.0;              // mean over matched pairs of the pairwise cost
};

/// Assignment of estimate rows to distinct reference rows minimizing the
/// mean of cost(i, j). Exhaustive over permutations; k is an archetype count.
[[nodiscard]] inline RowMatching best_matching(const Matrix &cost) {
  const Index k = cost.rows();
  if (cost.cols() != k) fail(ErrorKind::Shape, "matching cost must be square");
  if (k > 9) fail(ErrorKind::Parameter, "exhaustive matching limited to k <= 9");
  std::vector<Index> perm(static_cast<std::size_t>(k));
  std::iota(perm.begin(), perm.end(), Index{0});
  RowMatching best;
  best.cost = std::numeric_limits<double>::infinity();
  do {
    double total = 0.0;
    for (Index i = 0; i < k; ++i) total += cost(i, perm[static_cast<std::size_t>(i)]);
    if (total < best.cost) {
      best.cost = total;
      best.assignment = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  best.cost /= static_cast<double>(std::max<Index>(k, 1));
  return best;
}

/// Mean absolute per-coordinate error between estimated and reference rows
/// after the optimal row assignment.
[[nodiscard]] inline RowMatching match_rows_mean_abs(const Matrix &estimate, const Matrix &reference) {
  if (estimate.rows() != reference.rows() || estimate.cols() != reference.cols())
    fail(ErrorKind::Shape, "row matching needs equally shaped matrices");
  const Index k = estimate.rows();
  Matrix cost(k, k);
  for (Index i = 0; i < k; ++i)
    for (Index j = 0; j < k; ++j)
      cost(i, j) = (estimate.row(i) - reference.row(j)).cwiseAbs().mean();
  return best_matching(cost);
}

} // namespace archlab
