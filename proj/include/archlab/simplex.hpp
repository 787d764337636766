#pragma once

#include <cmath>

#include "numerics.hpp"

namespace archlab {

/// k vertices of a regular (k-1)-simplex: centroid at the origin, unit
/// circumradius. Row i is the centered corner e_i - 1/k expressed in the
/// Helmert basis of the sum-zero hyperplane, rescaled to unit norm.
struct SimplexFrame {
  Index k = 0;
  Matrix vertices;  // k x (k - 1)

  [[nodiscard]] Index latent_dim() const noexcept { return k - 1; }

  /// Latent point a * Z for a weight row a.
  [[nodiscard]] RowVector point(const RowVector &weights) const {
    if (weights.size() != k) fail(ErrorKind::Shape, "weight vector length must equal k");
    return weights * vertices;
  }

  /// Barycentric coordinates of a latent point: solves [Z^T; 1^T] a = [t; 1].
  [[nodiscard]] RowVector barycentric(const RowVector &t) const {
    Matrix system(k, k);
    system.topRows(k - 1) = vertices.transpose();
    system.row(k - 1).setOnes();
    Vector rhs(k);
    rhs.head(k - 1) = t.transpose();
    rhs(k - 1) = 1.0;
    return system.fullPivLu().solve(rhs).transpose();
  }
};

[[nodiscard]] inline SimplexFrame simplex_vertices(Index k) {
  if (k < 2) fail(ErrorKind::Dimension, "a simplex frame needs k >= 2");
  SimplexFrame frame;
  frame.k = k;
  frame.vertices.resize(k, k - 1);
  const double kd = static_cast<double>(k);
  const double scale = std::sqrt(kd / (kd - 1.0));
  for (Index i = 0; i < k; ++i) {
    for (Index d = 1; d < k; ++d) {
      // Helmert vector h_d = (1, .., 1, -d, 0, ..) / sqrt(d (d + 1)) with d leading ones.
      // <e_i - 1/k, h_d> = <e_i, h_d> since h_d is orthogonal to the ones vector.
      const double norm = std::sqrt(static_cast<double>(d) * static_cast<double>(d + 1));
      double coord = 0.0;
      if (i < d) coord = 1.0 / norm;
      else if (i == d) coord = -static_cast<double>(d) / norm;
      frame.vertices(i, d - 1) = coord * scale;
    }
  }
  return frame;
}

} // namespace archlab
