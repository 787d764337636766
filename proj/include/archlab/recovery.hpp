#pragma once

#include <limits>
#include <vector>

#include "deep_aa.hpp"
#include "matching.hpp"

namespace archlab {

/// For each true archetype j, the data row that best represents it: the row
/// with the largest ground-truth weight on j when A_true is known, else the
/// row nearest to z_true[j].
[[nodiscard]] inline std::vector<Index> archetype_rows(const Dataset &ds) {
  if (!ds.z_true) fail(ErrorKind::MissingGroundTruth, "archetype rows need Z_true");
  const Index k = ds.z_true->rows();
  std::vector<Index> rows(static_cast<std::size_t>(k), 0);
  for (Index j = 0; j < k; ++j) {
    Index best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (Index i = 0; i < ds.rows(); ++i) {
      const double score = ds.a_true ? (*ds.a_true)(i, j)
                                     : -(ds.x.values.row(i) - ds.z_true->row(j)).squaredNorm();
      if (score > best_score) {
        best_score = score;
        best = i;
      }
    }
    rows[static_cast<std::size_t>(j)] = best;
  }
  return rows;
}

struct DeepRecovery {
  std::vector<Index> vertex_of_archetype;  // true archetype j -> simplex vertex
  std::vector<double> latent_distance;     // |mu(row_j) - vertex|
  double max_latent_distance = 0.0;
  std::vector<double> generation_error;    // mean |generate(vertex) - z_true[j]|
  double max_generation_error = 0.0;
  double final_at = 0.0;                  // mean l_AT over the last `at_window` steps
};

/// Matches true archetypes to distinct simplex vertices by latent distance of
/// their representative rows, then decodes each matched vertex.
[[nodiscard]] inline DeepRecovery deep_recovery(const DeepAaModel &model, const Dataset &ds,
                                                std::size_t at_window = 100) {
  const auto rows = archetype_rows(ds);
  const Index k = model.arch.k;
  if (ds.z_true->rows() != k) fail(ErrorKind::Parameter, "model k differs from the true archetype count");
  Matrix xr(k, ds.x.cols());
  for (Index j = 0; j < k; ++j) xr.row(j) = ds.x.values.row(rows[static_cast<std::size_t>(j)]);
  const Encoding enc = encode(model, xr);
  Matrix cost(k, k);
  for (Index j = 0; j < k; ++j)
    for (Index v = 0; v < k; ++v) cost(j, v) = (enc.mu.row(j) - model.frame.vertices.row(v)).norm();
  const auto match = best_matching(cost);

  DeepRecovery r;
  Rng unused(0);
  for (Index j = 0; j < k; ++j) {
    const Index v = match.assignment[static_cast<std::size_t>(j)];
    r.vertex_of_archetype.push_back(v);
    r.latent_distance.push_back(cost(j, v));
    r.max_latent_distance = std::max(r.max_latent_distance, cost(j, v));
    RowVector onehot = RowVector::Zero(k);
    onehot(v) = 1.0;
    const Decoded d = generate(model, onehot, unused, false);
    const double err = (d.x.row(0) - ds.z_true->row(j)).cwiseAbs().mean();
    r.generation_error.push_back(err);
    r.max_generation_error = std::max(r.max_generation_error, err);
  }
  const std::size_t window = std::min(at_window, model.history.size());
  for (std::size_t i = model.history.size() - window; i < model.history.size(); ++i)
    r.final_at += model.history[i].loss.at / static_cast<double>(window);
  return r;
}

} // namespace archlab
