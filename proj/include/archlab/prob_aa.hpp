#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

#include "numerics.hpp"
#include "random.hpp"

namespace archlab {

/// Generative archetype model: a_i ~ Dir(alpha), x_i ~ N(a_i Z, sigma2 I).
struct ProbAaConfig {
  RowVector alpha;  // length k, entries > 0
  double sigma2 = 0.05;
  Matrix z_true;  // k x p

  [[nodiscard]] Index k() const noexcept { return z_true.rows(); }

  /// alpha_j = 1/k, the flat concentration that sums to one.
  static RowVector uniform_alpha(Index k) {
    return RowVector::Constant(k, 1.0 / static_cast<double>(k));
  }

  void validate() const {
    if (z_true.rows() < 1) fail(ErrorKind::Parameter, "need at least one archetype");
    if (alpha.size() != z_true.rows()) fail(ErrorKind::Parameter, "alpha length must equal k");
    if ((alpha.array() <= 0.0).any() || !all_finite(alpha))
      fail(ErrorKind::Parameter, "alpha entries must be positive");
    if (!(sigma2 >= 0.0) || !std::isfinite(sigma2)) fail(ErrorKind::Parameter, "sigma2 must be >= 0");
    require_finite(z_true, "archetypes");
  }
};

struct ProbAaSample {
  Matrix x;       // n x p
  Matrix a_true;  // n x k
};

/// Draws n observations. Per row: the Dirichlet weights first, then p noise
/// values, all from one stream seeded by `seed`.
[[nodiscard]] inline ProbAaSample sample(const ProbAaConfig &cfg, Index n, std::uint64_t seed) {
  cfg.validate();
  if (n < 0) fail(ErrorKind::Parameter, "sample count must be >= 0");
  const Index p = cfg.z_true.cols();
  const double sd = std::sqrt(cfg.sigma2);
  Rng rng(seed);
  ProbAaSample out{Matrix(n, p), Matrix(n, cfg.k())};
  for (Index i = 0; i < n; ++i) {
    const RowVector a = rng.dirichlet(cfg.alpha);
    out.a_true.row(i) = a;
    out.x.row(i) = a * cfg.z_true;
    for (Index j = 0; j < p; ++j) {
      const double eps = rng.gaussian();
      if (sd > 0.0) out.x(i, j) += sd * eps;
    }
  }
  return out;
}

/// Exact iid Gaussian log-density of X given means A Z and variance sigma2.
[[nodiscard]] inline double log_likelihood(const Matrix &x, const Matrix &a, const Matrix &z, double sigma2) {
  if (!(sigma2 > 0.0)) fail(ErrorKind::Parameter, "sigma2 must be > 0");
  if (a.rows() != x.rows() || a.cols() != z.rows() || z.cols() != x.cols())
    fail(ErrorKind::Shape, "log_likelihood shape mismatch");
  const double count = static_cast<double>(x.size());
  const double sq = (x - a * z).squaredNorm();
  return -0.5 * count * std::log(2.0 * std::numbers::pi * sigma2) - 0.5 * sq / sigma2;
}

} // namespace archlab
