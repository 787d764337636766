#pragma once

#include <Eigen/Core>
#include <Eigen/LU>
#include <Eigen/QR>

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "error.hpp"

namespace archlab {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using Index = Eigen::Index;

/// Observation matrix (n rows, p columns) with one name per column.
struct DataMatrix {
  Matrix values;
  std::vector<std::string> columns;

  DataMatrix() = default;
  explicit DataMatrix(Matrix v) : values(std::move(v)) {
    columns.reserve(static_cast<std::size_t>(values.cols()));
    for (Index j = 0; j < values.cols(); ++j) columns.push_back("x" + std::to_string(j));
  }
  DataMatrix(Matrix v, std::vector<std::string> names)
      : values(std::move(v)), columns(std::move(names)) {
    if (static_cast<Index>(columns.size()) != values.cols())
      fail(ErrorKind::Shape, "column name count does not match matrix width");
  }

  [[nodiscard]] Index rows() const noexcept { return values.rows(); }
  [[nodiscard]] Index cols() const noexcept { return values.cols(); }
};

template <typename Derived>
[[nodiscard]] bool all_finite(const Eigen::DenseBase<Derived> &m) {
  return m.derived().array().isFinite().all();
}

template <typename Derived>
void require_finite(const Eigen::DenseBase<Derived> &m, const char *what) {
  if (!all_finite(m)) fail(ErrorKind::Numerical, std::string(what) + " contains non-finite values");
}

/// Row-wise softmax with max subtraction; total on finite input.
[[nodiscard]] inline Matrix row_softmax(const Matrix &logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Index i = 0; i < logits.rows(); ++i) {
    const double mx = logits.row(i).maxCoeff();
    double sum = 0.0;
    for (Index j = 0; j < logits.cols(); ++j) {
      out(i, j) = std::exp(logits(i, j) - mx);
      sum += out(i, j);
    }
    out.row(i) /= sum;
  }
  return out;
}

/// True when every row is non-negative and sums to one within `tol`.
template <typename Derived>
[[nodiscard]] bool rows_on_simplex(const Eigen::MatrixBase<Derived> &m, double tol) {
  for (Index i = 0; i < m.rows(); ++i) {
    if ((m.row(i).array() < -tol).any()) return false;
    if (std::abs(m.row(i).sum() - 1.0) > tol) return false;
  }
  return true;
}

/// Parses "0.2,0.3,0.5" style lists.
[[nodiscard]] inline std::vector<double> parse_real_list(const std::string &text) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t next = text.find(',', pos);
    const std::string item = text.substr(pos, next == std::string::npos ? std::string::npos : next - pos);
    if (item.empty()) fail(ErrorKind::Parse, "empty entry in list '" + text + "'");
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception &) {
      fail(ErrorKind::Parse, "not a number: '" + item + "'");
    }
    if (used != item.size()) fail(ErrorKind::Parse, "not a number: '" + item + "'");
    out.push_back(v);
    if (next == std::string::npos) break;
    pos = next + 1;
  }
  return out;
}

[[nodiscard]] inline RowVector to_row(const std::vector<double> &v) {
  RowVector r(static_cast<Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) r(static_cast<Index>(i)) = v[i];
  return r;
}

} // namespace archlab
