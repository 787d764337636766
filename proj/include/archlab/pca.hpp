#pragma once

#include <Eigen/Eigenvalues>

#include "numerics.hpp"

namespace archlab {

struct PcaModel {
  RowVector mean;
  Matrix components;  // q x p, orthonormal rows
  Vector explained_variance;

  [[nodiscard]] Index dims() const noexcept { return components.rows(); }

  [[nodiscard]] Matrix project(const Matrix &x) const {
    if (x.cols() != mean.size()) fail(ErrorKind::Shape, "PCA projection width mismatch");
    return (x.rowwise() - mean) * components.transpose();
  }

  [[nodiscard]] Matrix reconstruct(const Matrix &scores) const {
    if (scores.cols() != components.rows()) fail(ErrorKind::Shape, "PCA score width mismatch");
    Matrix out = scores * components;
    out.rowwise() += mean;
    return out;
  }
};

/// Sample covariance (n - 1 denominator) of the rows of x.
[[nodiscard]] inline Matrix sample_covariance(const Matrix &x) {
  const RowVector mean = x.colwise().mean();
  const Matrix centered = x.rowwise() - mean;
  return (centered.transpose() * centered) / static_cast<double>(x.rows() - 1);
}

/// Top-q principal directions from the covariance eigendecomposition.
/// Component signs are fixed so the largest-magnitude entry is positive.
[[nodiscard]] inline PcaModel pca_fit(const Matrix &x, Index q) {
  const Index n = x.rows();
  const Index p = x.cols();
  if (n < 2) fail(ErrorKind::Dimension, "pca_fit needs at least two rows");
  if (q < 1 || q > std::min(n, p))
    fail(ErrorKind::Dimension, "pca_fit: q must lie in [1, min(n, p)]");

  const Matrix cov = sample_covariance(x);
  if (cov.diagonal().maxCoeff() <= 0.0) fail(ErrorKind::Degenerate, "data has zero variance in every column");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) fail(ErrorKind::Numerical, "covariance eigendecomposition failed");

  PcaModel model;
  model.mean = x.colwise().mean();
  model.components.resize(q, p);
  model.explained_variance.resize(q);
  // Eigen returns ascending eigenvalues.
  for (Index c = 0; c < q; ++c) {
    const Index src = p - 1 - c;
    Eigen::VectorXd dir = solver.eigenvectors().col(src);
    Index arg = 0;
    dir.cwiseAbs().maxCoeff(&arg);
    if (dir(arg) < 0.0) dir = -dir;
    model.components.row(c) = dir.transpose();
    model.explained_variance(c) = std::max(0.0, solver.eigenvalues()(src));
  }
  return model;
}

/// Fraction of total variance captured by the fitted components.
[[nodiscard]] inline double explained_fraction(const PcaModel &model, const Matrix &x) {
  return model.explained_variance.sum() / sample_covariance(x).trace();
}

} // namespace archlab
