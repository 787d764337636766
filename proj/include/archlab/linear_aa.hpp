#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "numerics.hpp"
#include "random.hpp"

namespace archlab {

enum class AaInit { FurthestSum, RandomRows };

struct LinearAaConfig {
  Index k = 3;
  int max_outer_iters = 500;
  double rel_tol = 1e-6;
  AaInit init = AaInit::FurthestSum;
  std::uint64_t seed = 0;
  int inner_steps = 10;
};

struct LinearAaModel {
  Matrix A;  // n x k, row stochastic
  Matrix B;  // k x n, row stochastic
  Matrix Z;  // k x p, equals B * X
  double rss = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> rss_history;  // rss after init, then after every outer iteration
};

/// One Frank-Wolfe step on the unit simplex for f(a) = 1/2 a'Ha + c'a with
/// gradient `grad` = Ha + c at `current`. Vertex ties go to the lowest index;
/// the step length is the exact minimizer of f along the FW direction on [0, 1].
[[nodiscard]] inline RowVector fw_row_step(const RowVector &grad, const RowVector &current,
                                           const Matrix &quadratic) {
  const Index k = current.size();
  Index vertex = 0;
  for (Index j = 1; j < k; ++j)
    if (grad(j) < grad(vertex)) vertex = j;

  // FW gap g'(a - e_v), accumulated so a constant gradient gives exactly zero.
  double gap = 0.0;
  for (Index j = 0; j < k; ++j) gap += current(j) * (grad(j) - grad(vertex));
  if (!(gap > 0.0)) return current;

  RowVector dir = -current;
  dir(vertex) += 1.0;
  const double curvature = dir * quadratic * dir.transpose();
  const double step = curvature > 0.0 ? std::min(1.0, gap / curvature) : 1.0;

  RowVector next = (1.0 - step) * current;
  next(vertex) += step;
  return next;
}

namespace detail {

inline std::vector<Index> furthest_sum(const Matrix &x, Index k) {
  const Index n = x.rows();
  std::vector<Index> chosen;
  std::vector<char> used(static_cast<std::size_t>(n), 0);
  const RowVector mean = x.colwise().mean();
  Vector score(n);
  for (Index i = 0; i < n; ++i) score(i) = (x.row(i) - mean).norm();
  Vector accumulated = Vector::Zero(n);
  for (Index c = 0; c < k; ++c) {
    Index best = -1;
    for (Index i = 0; i < n; ++i) {
      if (used[static_cast<std::size_t>(i)]) continue;
      const double s = c == 0 ? score(i) : accumulated(i);
      const double b = best < 0 ? 0.0 : (c == 0 ? score(best) : accumulated(best));
      if (best < 0 || s > b) best = i;
    }
    chosen.push_back(best);
    used[static_cast<std::size_t>(best)] = 1;
    for (Index i = 0; i < n; ++i) accumulated(i) += (x.row(i) - x.row(best)).norm();
  }
  return chosen;
}

inline std::vector<Index> random_rows(Index n, Index k, std::uint64_t seed) {
  Rng rng(seed);
  auto perm = random_permutation(n, rng);
  perm.resize(static_cast<std::size_t>(k));
  return perm;
}

inline double frobenius_rss(const Matrix &x, const Matrix &a, const Matrix &z) {
  return (x - a * z).squaredNorm();
}

} // namespace detail

/// Residual sum of squares ||X - A B X||_F^2.
[[nodiscard]] inline double rss(const Matrix &x, const LinearAaModel &model) {
  return (x - model.A * (model.B * x)).squaredNorm();
}

[[nodiscard]] inline Matrix reconstruct(const LinearAaModel &model) { return model.A * model.Z; }

namespace detail {

/// Exact minimizer of 1/2 a'Ha + c'a on the face spanned by the support of
/// `a`, kept only if it stays feasible and does not increase the objective.
inline RowVector polish_on_support(const RowVector &a, const Matrix &h, const RowVector &c) {
  std::vector<Index> support;
  for (Index j = 0; j < a.size(); ++j)
    if (a(j) > 0.0) support.push_back(j);
  const Index s = static_cast<Index>(support.size());
  if (s < 2) return a;
  Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(s + 1, s + 1);
  Eigen::VectorXd rhs(s + 1);
  for (Index r = 0; r < s; ++r) {
    for (Index q = 0; q < s; ++q) kkt(r, q) = h(support[r], support[q]);
    kkt(r, s) = kkt(s, r) = 1.0;
    rhs(r) = -c(support[r]);
  }
  rhs(s) = 1.0;
  // Minimum-norm solve so duplicate archetypes (singular H) still qualify.
  const Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(kkt);
  const Eigen::VectorXd sol = cod.solve(rhs);
  if (!((kkt * sol - rhs).norm() <= 1e-9 * (1.0 + rhs.norm()))) return a;
  RowVector out = RowVector::Zero(a.size());
  for (Index r = 0; r < s; ++r) {
    if (!(sol(r) >= 0.0)) return a;
    out(support[r]) = sol(r);
  }
  out /= out.sum();
  auto f = [&](const RowVector &v) { return 0.5 * v.dot(v * h) + c.dot(v); };
  return f(out) <= f(a) ? out : a;
}

} // namespace detail

/// Best simplex weights of every row of `x` against fixed archetypes `z`,
/// by Frank-Wolfe warm-started at the uniform mixture.
[[nodiscard]] inline Matrix solve_weights(const Matrix &x, const Matrix &z, int steps = 200) {
  const Index k = z.rows();
  const Matrix hessian = 2.0 * z * z.transpose();
  const Matrix linear = -2.0 * x * z.transpose();  // n x k
  Matrix a = Matrix::Constant(x.rows(), k, 1.0 / static_cast<double>(k));
  for (Index i = 0; i < x.rows(); ++i) {
    RowVector row = a.row(i);
    for (int s = 0; s < steps; ++s) {
      const RowVector grad = row * hessian + linear.row(i);
      RowVector next = fw_row_step(grad, row, hessian);
      if (next == row) break;
      row = std::move(next);
    }
    a.row(i) = detail::polish_on_support(row, hessian, linear.row(i));
  }
  return a;
}

/// Alternating Frank-Wolfe solver for min ||X - A B X||_F^2 with A and B row
/// stochastic. A rows are independent quadratic programs over Z Z'; B rows are
/// updated one archetype at a time against the partial residual.
[[nodiscard]] inline LinearAaModel fit_linear_aa(const Matrix &x, const LinearAaConfig &cfg) {
  const Index n = x.rows();
  const Index k = cfg.k;
  if (k < 1) fail(ErrorKind::Dimension, "linear AA needs k >= 1");
  if (k > n) fail(ErrorKind::Dimension, "linear AA needs k <= n");
  if (!(cfg.rel_tol > 0.0)) fail(ErrorKind::Parameter, "rel_tol must be positive");
  if (cfg.max_outer_iters < 0 || cfg.inner_steps < 1) fail(ErrorKind::Parameter, "invalid iteration counts");
  require_finite(x, "input data");

  LinearAaModel model;
  const auto init = cfg.init == AaInit::FurthestSum ? detail::furthest_sum(x, k)
                                                    : detail::random_rows(n, k, cfg.seed);
  model.B = Matrix::Zero(k, n);
  for (Index j = 0; j < k; ++j) model.B(j, init[static_cast<std::size_t>(j)]) = 1.0;
  model.A = Matrix::Constant(n, k, 1.0 / static_cast<double>(k));
  model.Z = model.B * x;
  model.rss = detail::frobenius_rss(x, model.A, model.Z);
  model.rss_history.push_back(model.rss);

  for (int iter = 0; iter < cfg.max_outer_iters; ++iter) {
    // A step: row i minimizes ||x_i - a Z||^2 = a (Z Z') a' - 2 x_i Z' a' + const.
    const Matrix hessian = 2.0 * model.Z * model.Z.transpose();
    const Matrix linear = -2.0 * x * model.Z.transpose();
    for (Index i = 0; i < n; ++i) {
      RowVector row = model.A.row(i);
      for (int s = 0; s < cfg.inner_steps; ++s) {
        const RowVector grad = row * hessian + linear.row(i);
        row = fw_row_step(grad, row, hessian);
      }
      model.A.row(i) = detail::polish_on_support(row, hessian, linear.row(i));
    }

    // B step: with R_-j = X - sum_{l != j} a_l z_l the objective in b_j is
    // s ||b_j X||^2 - 2 (b_j X) . v + const, s = ||a_j||^2, v = R_-j' a_j.
    Matrix residual = x - model.A * model.Z;
    for (Index j = 0; j < k; ++j) {
      const Vector weight = model.A.col(j);
      const double s = weight.squaredNorm();
      if (!(s > 0.0)) continue;
      RowVector z = model.Z.row(j);
      const RowVector z_old = z;
      const RowVector v = weight.transpose() * residual + s * z;
      RowVector b = model.B.row(j);
      for (int step = 0; step < cfg.inner_steps; ++step) {
        const RowVector direction = s * z - v;              // half the gradient in z
        const Vector grad = 2.0 * (x * direction.transpose());  // n
        Index vertex = 0;
        for (Index i = 1; i < n; ++i)
          if (grad(i) < grad(vertex)) vertex = i;
        double gap = 0.0;
        for (Index i = 0; i < n; ++i)
          if (b(i) != 0.0) gap += b(i) * (grad(i) - grad(vertex));
        if (!(gap > 0.0)) break;
        const RowVector move = x.row(vertex) - z;
        const double curvature = 2.0 * s * move.squaredNorm();
        const double gamma = curvature > 0.0 ? std::min(1.0, gap / curvature) : 1.0;
        b *= (1.0 - gamma);
        b(vertex) += gamma;
        z += gamma * move;
      }
      model.B.row(j) = b;
      model.Z.row(j) = b * x;
      residual -= weight * (model.Z.row(j) - z_old);
    }

    model.Z = model.B * x;
    const double prev = model.rss;
    model.rss = detail::frobenius_rss(x, model.A, model.Z);
    if (!std::isfinite(model.rss)) fail(ErrorKind::Numerical, "rss became non-finite");
    model.rss_history.push_back(model.rss);
    model.iterations = iter + 1;
    if (prev <= 0.0 || (prev - model.rss) / prev < cfg.rel_tol) {
      model.converged = true;
      break;
    }
  }
  return model;
}

} // namespace archlab
