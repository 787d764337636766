#pragma once

// Test-only reference computations. Nothing here calls into the solver code
// paths it is used to check.

#include <archlab/autodiff.hpp>
#include <archlab/numerics.hpp>

#include <algorithm>

#include <cmath>
#include <functional>
#include <limits>
#include <vector>

namespace oracle {

using archlab::Index;
using archlab::Matrix;
using archlab::RowVector;

/// Every weight vector on the (n-1)-simplex with entries in multiples of 1/steps.
inline std::vector<RowVector> simplex_grid(Index n, int steps) {
  std::vector<RowVector> out;
  std::vector<int> counts(static_cast<std::size_t>(n), 0);
  std::function<void(Index, int)> rec = [&](Index pos, int left) {
    if (pos == n - 1) {
      counts[static_cast<std::size_t>(pos)] = left;
      RowVector w(n);
      for (Index i = 0; i < n; ++i) w(i) = counts[static_cast<std::size_t>(i)] / static_cast<double>(steps);
      out.push_back(std::move(w));
      return;
    }
    for (int c = 0; c <= left; ++c) {
      counts[static_cast<std::size_t>(pos)] = c;
      rec(pos + 1, left - c);
    }
  };
  rec(0, steps);
  return out;
}

/// Squared distance from x to the segment [u, v].
inline double segment_dist2(const RowVector &x, const RowVector &u, const RowVector &v) {
  const RowVector d = v - u;
  const double len2 = d.squaredNorm();
  double t = len2 > 0.0 ? (x - u).dot(d) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return (x - u - t * d).squaredNorm();
}

/// Minimum of ||X - A B X||^2 over a simplex grid for the rows of B (k <= 2),
/// with each A row solved exactly (point or segment projection).
inline double brute_force_rss(const Matrix &x, Index k, int steps = 50) {
  const auto grid = simplex_grid(x.rows(), steps);
  std::vector<RowVector> points;
  points.reserve(grid.size());
  for (const auto &b : grid) points.push_back(b * x);
  double best = std::numeric_limits<double>::infinity();
  if (k == 1) {
    for (const auto &z : points) {
      double r = 0.0;
      for (Index i = 0; i < x.rows(); ++i) r += (x.row(i) - z).squaredNorm();
      best = std::min(best, r);
    }
    return best;
  }
  for (std::size_t a = 0; a < points.size(); ++a)
    for (std::size_t b = a; b < points.size(); ++b) {
      double r = 0.0;
      for (Index i = 0; i < x.rows() && r < best; ++i) r += segment_dist2(x.row(i), points[a], points[b]);
      best = std::min(best, r);
    }
  return best;
}

/// Minimizer of f(a) = 1/2 a'Ha + c'a over the 1-simplex by dense grid search.
inline RowVector grid_min_2d(const Matrix &h, const RowVector &c, int steps) {
  double best = std::numeric_limits<double>::infinity();
  RowVector arg(2);
  for (int s = 0; s <= steps; ++s) {
    RowVector a(2);
    a << s / static_cast<double>(steps), 1.0 - s / static_cast<double>(steps);
    const double f = 0.5 * a.dot(a * h) + c.dot(a);
    if (f < best) {
      best = f;
      arg = a;
    }
  }
  return arg;
}

} // namespace oracle

namespace oracle {

/// Largest relative disagreement between the analytic parameter gradients and
/// central finite differences of `loss`, which rebuilds its graph on each call
/// and returns the scalar value. `analytic` runs one backward pass.
template <typename Loss, typename Analytic>
double max_fd_rel_error(std::vector<archlab::ad::Parameter *> params, Loss loss, Analytic analytic,
                        double h = 1e-5, double floor = 1e-6) {
  for (auto *p : params) p->zero_grad();
  analytic();
  double worst = 0.0;
  for (auto *p : params) {
    for (Index r = 0; r < p->value.rows(); ++r)
      for (Index c = 0; c < p->value.cols(); ++c) {
        const double keep = p->value(r, c);
        p->value(r, c) = keep + h;
        const double up = loss();
        p->value(r, c) = keep - h;
        const double down = loss();
        p->value(r, c) = keep;
        const double fd = (up - down) / (2.0 * h);
        const double an = p->grad(r, c);
        const double rel = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), floor});
        worst = std::max(worst, rel);
      }
  }
  return worst;
}

} // namespace oracle
