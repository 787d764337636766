#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <optional>
#include <vector>

#include "autodiff.hpp"
#include "datasets.hpp"
#include "nn.hpp"
#include "random.hpp"
#include "simplex.hpp"

namespace archlab {

struct DeepAaArch {
  Index p = 8;
  Index k = 3;
  std::vector<Index> encoder{64, 64};
  std::vector<Index> decoder{64, 64};
  bool side_info = false;
  std::vector<Index> side_head{32};
  nn::Activation hidden = nn::Activation::Relu;
  bool standardize = true;  // fit per-column mean/scale on the training data

  [[nodiscard]] Index latent_dim() const noexcept { return k - 1; }

  void validate() const {
    if (p < 1) fail(ErrorKind::Parameter, "input dimension must be >= 1");
    if (k < 2) fail(ErrorKind::Dimension, "DeepAA needs k >= 2 (latent dim k - 1 >= 1)");
    for (auto s : encoder) if (s < 1) fail(ErrorKind::Parameter, "encoder sizes must be positive");
    for (auto s : decoder) if (s < 1) fail(ErrorKind::Parameter, "decoder sizes must be positive");
    for (auto s : side_head) if (s < 1) fail(ErrorKind::Parameter, "side head sizes must be positive");
  }
};

enum class LambdaSchedule { Auto, Constant, Geometric };

struct DeepAaHyper {
  double lambda0 = 1.0;
  double lambda_growth = 1.01;
  std::int64_t lambda_every = 500;
  LambdaSchedule schedule = LambdaSchedule::Auto;  // geometric iff side info
  double at_weight = 1.0;
  double side_weight = 1.0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  Index batch = 100;
  int epochs = 20;
  std::uint64_t seed = 0;
  double logvar_min = -10.0;
  double logvar_max = 10.0;

  void validate() const {
    if (!(lambda0 > 0.0)) fail(ErrorKind::Parameter, "lambda0 must be > 0");
    if (!(lambda_growth > 0.0) || lambda_every < 1) fail(ErrorKind::Parameter, "invalid lambda schedule");
    if (!(at_weight >= 0.0) || !(side_weight >= 0.0)) fail(ErrorKind::Parameter, "loss weights must be >= 0");
    if (!(lr > 0.0)) fail(ErrorKind::Parameter, "learning rate must be > 0");
    if (batch < 1) fail(ErrorKind::Parameter, "batch size must be >= 1");
    if (epochs < 0) fail(ErrorKind::Parameter, "epochs must be >= 0");
    if (!(logvar_min < logvar_max)) fail(ErrorKind::Parameter, "logvar clamp range is empty");
  }

  [[nodiscard]] double lambda_at(std::int64_t step, bool side_info) const {
    const bool geometric = schedule == LambdaSchedule::Geometric ||
                           (schedule == LambdaSchedule::Auto && side_info);
    if (!geometric) return lambda0;
    return lambda0 * std::pow(lambda_growth, static_cast<double>(step / lambda_every));
  }
};

struct LossParts {
  double total = 0.0;
  double recon = 0.0;
  double kl = 0.0;
  double at = 0.0;
  double side = 0.0;
  double lambda = 1.0;
};

struct HistoryEntry {
  std::int64_t step = 0;
  LossParts loss;
};

struct DeepAaModel {
  DeepAaArch arch;
  SimplexFrame frame;
  nn::Mlp encoder;  // trunk; empty when arch.encoder is empty
  nn::Dense a_head;
  nn::Dense b_head;
  nn::Dense logvar_head;
  nn::Mlp decoder;
  std::optional<nn::Mlp> side;
  double logvar_min = -10.0;
  double logvar_max = 10.0;
  RowVector generation_logvar;  // used by generate() with noise
  RowVector x_mean;             // input/output standardization, identity when unset
  RowVector x_scale;
  std::vector<HistoryEntry> history;

  [[nodiscard]] std::vector<ad::Parameter *> parameters() {
    std::vector<ad::Parameter *> out;
    encoder.collect(out);
    for (auto *d : {&a_head, &b_head, &logvar_head}) {
      out.push_back(&d->weight);
      out.push_back(&d->bias);
    }
    decoder.collect(out);
    if (side) side->collect(out);
    return out;
  }

  [[nodiscard]] Index trunk_width() const { return encoder.layers.empty() ? arch.p : encoder.out_dim(); }
};

[[nodiscard]] inline DeepAaModel make_deep_aa(const DeepAaArch &arch, std::uint64_t seed) {
  arch.validate();
  Rng rng(seed);
  DeepAaModel m;
  m.arch = arch;
  m.frame = simplex_vertices(arch.k);
  const Index latent = arch.latent_dim();
  if (!arch.encoder.empty()) {
    std::vector<Index> sizes{arch.p};
    sizes.insert(sizes.end(), arch.encoder.begin(), arch.encoder.end());
    m.encoder = nn::Mlp("encoder", sizes, arch.hidden, arch.hidden, rng);
  }
  const Index width = m.trunk_width();
  m.a_head = nn::Dense("a_head", width, arch.k, nn::Activation::Identity, rng);
  m.b_head = nn::Dense("b_head", width, arch.k, nn::Activation::Identity, rng);
  m.logvar_head = nn::Dense("logvar_head", width, latent, nn::Activation::Identity, rng);
  std::vector<Index> dec{latent};
  dec.insert(dec.end(), arch.decoder.begin(), arch.decoder.end());
  dec.push_back(arch.p);
  m.decoder = nn::Mlp("decoder", dec, arch.hidden, nn::Activation::Identity, rng);
  if (arch.side_info) {
    std::vector<Index> side{latent};
    side.insert(side.end(), arch.side_head.begin(), arch.side_head.end());
    side.push_back(1);
    m.side = nn::Mlp("side", side, arch.hidden, nn::Activation::Identity, rng);
  }
  m.generation_logvar = RowVector::Zero(latent);
  m.x_mean = RowVector::Zero(arch.p);
  m.x_scale = RowVector::Ones(arch.p);
  return m;
}

// ---------------------------------------------------------------------------
// Evaluation (tape-free)

struct Encoding {
  Matrix a;       // m x k
  Matrix b;       // k x m
  Matrix logvar;  // m x (k - 1)
  Matrix mu;      // m x (k - 1)
};

struct Decoded {
  Matrix x;
  std::optional<Vector> y;
};

/// Inputs in the model's standardized coordinates.
[[nodiscard]] inline Matrix standardized(const DeepAaModel &model, const Matrix &x) {
  Matrix out = x.rowwise() - model.x_mean;
  out.array().rowwise() /= model.x_scale.array();
  return out;
}

[[nodiscard]] inline Encoding encode(const DeepAaModel &model, const Matrix &x) {
  if (x.cols() != model.arch.p) fail(ErrorKind::Shape, "encode: input width must equal p");
  if (x.rows() < 1) fail(ErrorKind::Shape, "encode: empty batch");
  const Matrix xs = standardized(model, x);
  const Matrix h = model.encoder.layers.empty() ? xs : model.encoder.apply(xs);
  Encoding e;
  e.a = row_softmax(model.a_head.apply(h));
  e.b = row_softmax(model.b_head.apply(h).transpose());
  e.logvar = model.logvar_head.apply(h).cwiseMax(model.logvar_min).cwiseMin(model.logvar_max);
  e.mu = e.a * model.frame.vertices;
  return e;
}

[[nodiscard]] inline Decoded decode(const DeepAaModel &model, const Matrix &t) {
  if (t.cols() != model.arch.latent_dim()) fail(ErrorKind::Shape, "decode: latent width must equal k - 1");
  require_finite(t, "latent batch");
  Decoded d;
  d.x = model.decoder.apply(t);
  d.x.array().rowwise() *= model.x_scale.array();
  d.x.rowwise() += model.x_mean;
  if (model.side) d.y = model.side->apply(t).col(0);
  return d;
}

[[nodiscard]] inline double archetype_loss(const Matrix &a, const Matrix &b, const SimplexFrame &frame) {
  const Matrix predicted = (b * a) * frame.vertices;
  return (frame.vertices - predicted).squaredNorm();
}

/// Batch mean of KL(N(mu, diag exp(logvar)) || N(0, I)).
[[nodiscard]] inline double kl_term(const Matrix &mu, const Matrix &logvar) {
  if (mu.rows() != logvar.rows() || mu.cols() != logvar.cols()) fail(ErrorKind::Shape, "kl_term shape mismatch");
  if (mu.rows() == 0) return 0.0;
  const double total =
      0.5 * (logvar.array().exp() + mu.array().square() - 1.0 - logvar.array()).sum();
  return total / static_cast<double>(mu.rows());
}

/// t = mu + exp(logvar / 2) * eps, eps drawn row-major from `rng`.
[[nodiscard]] inline Matrix reparameterize(const Matrix &mu, const Matrix &logvar, Rng &rng) {
  if (mu.rows() != logvar.rows() || mu.cols() != logvar.cols()) fail(ErrorKind::Shape, "reparameterize shape mismatch");
  const Matrix eps = rng.gaussian_matrix(mu.rows(), mu.cols());
  return mu + ((0.5 * logvar.array()).exp() * eps.array()).matrix();
}

// ---------------------------------------------------------------------------
// Training objective

struct LossGraph {
  ad::Var total;
  LossParts parts;
};

/// Builds kl + lambda (recon_x + side_weight recon_y) + at_weight l_AT on
/// `tape`. Reconstruction terms are 1/2 the batch-mean squared error summed
/// over output coordinates (unit-variance Gaussian decoder). The networks see
/// standardized inputs and emit standardized outputs; the loss is in data units.
inline LossGraph build_loss(ad::Tape &tape, DeepAaModel &model, const Matrix &x, const Vector *y,
                            double lambda, const DeepAaHyper &hyper, Rng &rng) {
  const Index m = x.rows();
  if (m < 1) fail(ErrorKind::Shape, "loss needs a non-empty batch");
  if (x.cols() != model.arch.p) fail(ErrorKind::Shape, "batch width must equal p");
  if (model.side && (!y || y->size() != m)) fail(ErrorKind::Shape, "side head needs one label per row");
  const double inv_m = 1.0 / static_cast<double>(m);

  const ad::Var input = tape.constant(standardized(model, x));
  const ad::Var target = tape.constant(x);
  const ad::Var h = model.encoder.layers.empty() ? input : model.encoder.forward(tape, input);
  const ad::Var a = ad::softmax_rows(model.a_head.forward(tape, h));
  const ad::Var b = ad::softmax_rows(ad::transpose(model.b_head.forward(tape, h)));
  const ad::Var logvar = ad::clamp(model.logvar_head.forward(tape, h), model.logvar_min, model.logvar_max);
  const ad::Var frame = tape.constant(model.frame.vertices);
  const ad::Var mu = ad::matmul(a, frame);

  const ad::Var predicted = ad::matmul(ad::matmul(b, a), frame);
  const ad::Var at = ad::sum(ad::square(ad::sub(frame, predicted)));

  const ad::Var kl = ad::scale(
      ad::sum(ad::add_scalar(ad::sub(ad::add(ad::exp(logvar), ad::square(mu)), logvar), -1.0)), 0.5 * inv_m);

  const ad::Var eps = tape.constant(rng.gaussian_matrix(m, model.arch.latent_dim()));
  const ad::Var t = ad::add(mu, ad::mul(ad::exp(ad::scale(logvar, 0.5)), eps));
  const ad::Var x_hat = ad::add_row(ad::mul(model.decoder.forward(tape, t), tape.constant(model.x_scale.replicate(m, 1))),
                                    tape.constant(model.x_mean));
  const ad::Var recon = ad::scale(ad::sum(ad::square(ad::sub(x_hat, target))), 0.5 * inv_m);

  ad::Var likelihood = recon;
  LossParts parts;
  parts.lambda = lambda;
  if (model.side) {
    const ad::Var y_hat = model.side->forward(tape, t);
    const ad::Var labels = tape.constant(Matrix(*y));
    const ad::Var side = ad::scale(ad::sum(ad::square(ad::sub(y_hat, labels))), 0.5 * inv_m);
    likelihood = ad::add(recon, ad::scale(side, hyper.side_weight));
    parts.side = side.scalar();
  }
  const ad::Var total = ad::add(ad::add(kl, ad::scale(likelihood, lambda)), ad::scale(at, hyper.at_weight));

  parts.recon = recon.scalar();
  parts.kl = kl.scalar();
  parts.at = at.scalar();
  parts.total = total.scalar();
  return {total, parts};
}

/// Evaluates the objective on one batch without touching gradients.
[[nodiscard]] inline LossParts loss(DeepAaModel &model, const Matrix &x, const std::optional<Vector> &y,
                                    double lambda, const DeepAaHyper &hyper, Rng &rng) {
  ad::Tape tape;
  const auto graph = build_loss(tape, model, x, y ? &*y : nullptr, lambda, hyper, rng);
  if (!std::isfinite(graph.parts.total)) fail(ErrorKind::Numerical, "non-finite DeepAA loss");
  return graph.parts;
}

namespace detail {

inline Matrix gather_rows(const Matrix &x, const std::vector<Index> &idx, std::size_t begin, std::size_t end) {
  Matrix out(static_cast<Index>(end - begin), x.cols());
  for (std::size_t r = begin; r < end; ++r) out.row(static_cast<Index>(r - begin)) = x.row(idx[r]);
  return out;
}

inline RowVector column_median(const Matrix &m) {
  RowVector out(m.cols());
  for (Index j = 0; j < m.cols(); ++j) {
    std::vector<double> col;
    col.reserve(static_cast<std::size_t>(m.rows()));
    for (Index i = 0; i < m.rows(); ++i) col.push_back(m(i, j));
    std::sort(col.begin(), col.end());
    const std::size_t n = col.size();
    out(j) = n % 2 ? col[n / 2] : 0.5 * (col[n / 2 - 1] + col[n / 2]);
  }
  return out;
}

} // namespace detail

/// Mini-batch Adam training. Shuffle order and reparameterization noise are
/// drawn from streams derived from hyper.seed. On a non-finite loss or update
/// the model keeps the parameters of the last good step and NumericalError is
/// thrown.
inline void train(DeepAaModel &model, const Dataset &data, const DeepAaHyper &hyper) {
  hyper.validate();
  const Matrix &x = data.x.values;
  const Index n = x.rows();
  if (n < 1) fail(ErrorKind::Parameter, "training data is empty");
  if (x.cols() != model.arch.p) fail(ErrorKind::Shape, "training data width must equal p");
  if (model.side && !data.labels) fail(ErrorKind::MissingGroundTruth, "side head needs labels");
  require_finite(x, "training data");
  model.logvar_min = hyper.logvar_min;
  model.logvar_max = hyper.logvar_max;
  if (model.arch.standardize && model.history.empty()) {
    model.x_mean = x.colwise().mean();
    const Matrix centered = x.rowwise() - model.x_mean;
    model.x_scale = RowVector::Ones(x.cols());
    if (n > 1) model.x_scale = (centered.colwise().squaredNorm() / static_cast<double>(n - 1)).cwiseSqrt();
    for (Index j = 0; j < x.cols(); ++j)
      if (!(model.x_scale(j) > 0.0)) model.x_scale(j) = 1.0;
  }
  if (hyper.batch < model.arch.k)
    std::cerr << "warning: batch size " << hyper.batch << " is smaller than k = " << model.arch.k << "\n";

  Rng shuffle_rng(Rng::derive(hyper.seed, 1));
  Rng noise_rng(Rng::derive(hyper.seed, 2));
  nn::AdamState adam;
  adam.lr = hyper.lr;
  adam.beta1 = hyper.beta1;
  adam.beta2 = hyper.beta2;
  const auto params = model.parameters();
  const std::int64_t start = model.history.empty() ? 0 : model.history.back().step + 1;
  std::int64_t step = start;

  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    const auto perm = random_permutation(n, shuffle_rng);
    for (std::size_t begin = 0; begin < perm.size(); begin += static_cast<std::size_t>(hyper.batch)) {
      const std::size_t end = std::min(perm.size(), begin + static_cast<std::size_t>(hyper.batch));
      const Matrix xb = detail::gather_rows(x, perm, begin, end);
      std::optional<Vector> yb;
      if (model.side) {
        yb = Vector(static_cast<Index>(end - begin));
        for (std::size_t r = begin; r < end; ++r) (*yb)(static_cast<Index>(r - begin)) = (*data.labels)(perm[r]);
      }

      ad::zero_grads(params);
      ad::Tape tape;
      const double lambda = hyper.lambda_at(step - start, model.side.has_value());
      const auto graph = build_loss(tape, model, xb, yb ? &*yb : nullptr, lambda, hyper, noise_rng);
      if (!std::isfinite(graph.parts.total)) fail(ErrorKind::Numerical, "non-finite loss at step " + std::to_string(step));
      tape.backward(graph.total);

      std::vector<Matrix> snapshot;
      snapshot.reserve(params.size());
      for (auto *p : params) {
        if (!all_finite(p->grad)) fail(ErrorKind::Numerical, "non-finite gradient at step " + std::to_string(step));
        snapshot.push_back(p->value);
      }
      nn::adam_step(adam, params);
      for (std::size_t i = 0; i < params.size(); ++i) {
        if (!all_finite(params[i]->value)) {
          for (std::size_t j = 0; j < params.size(); ++j) params[j]->value = snapshot[j];
          fail(ErrorKind::Numerical, "non-finite parameters after step " + std::to_string(step));
        }
      }
      model.history.push_back({step, graph.parts});
      ++step;
    }
  }
  model.generation_logvar = detail::column_median(encode(model, x).logvar);
}

// ---------------------------------------------------------------------------
// Generation

namespace detail {

inline void require_weights(const RowVector &a, Index k) {
  if (a.size() != k) fail(ErrorKind::Parameter, "mixture weights must have length k");
  if (!rows_on_simplex(a, 1e-9)) fail(ErrorKind::Parameter, "mixture weights must lie on the simplex");
}

} // namespace detail

/// Decodes a * Z_fixed, optionally adding noise at the stored generation variance.
[[nodiscard]] inline Decoded generate(const DeepAaModel &model, const RowVector &a, Rng &rng, bool use_noise) {
  detail::require_weights(a, model.arch.k);
  RowVector t = model.frame.point(a);
  if (use_noise) {
    for (Index d = 0; d < t.size(); ++d) t(d) += std::exp(0.5 * model.generation_logvar(d)) * rng.gaussian();
  }
  return decode(model, Matrix(t));
}

/// Decodes `steps` evenly spaced latent means between a_start Z and a_end Z.
/// Rows are decoded one at a time so endpoints match generate() bit for bit.
[[nodiscard]] inline Decoded interpolate(const DeepAaModel &model, const RowVector &a_start,
                                         const RowVector &a_end, Index steps) {
  detail::require_weights(a_start, model.arch.k);
  detail::require_weights(a_end, model.arch.k);
  if (steps < 2) fail(ErrorKind::Parameter, "interpolation needs at least two steps");
  Decoded out;
  out.x.resize(steps, model.arch.p);
  if (model.side) out.y = Vector(steps);
  for (Index s = 0; s < steps; ++s) {
    const double frac = static_cast<double>(s) / static_cast<double>(steps - 1);
    const RowVector weights = (1.0 - frac) * a_start + frac * a_end;
    const Decoded row = decode(model, Matrix(model.frame.point(weights)));
    out.x.row(s) = row.x.row(0);
    if (out.y) (*out.y)(s) = (*row.y)(0);
  }
  return out;
}

} // namespace archlab
