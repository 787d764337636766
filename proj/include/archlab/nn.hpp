#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "autodiff.hpp"
#include "random.hpp"

namespace archlab::nn {

enum class Activation { Identity, Relu, Tanh };

inline const char *to_string(Activation a) {
  switch (a) {
  case Activation::Identity: return "identity";
  case Activation::Relu: return "relu";
  case Activation::Tanh: return "tanh";
  }
  return "identity";
}

inline Activation activation_from_string(const std::string &s) {
  if (s == "identity") return Activation::Identity;
  if (s == "relu") return Activation::Relu;
  if (s == "tanh") return Activation::Tanh;
  fail(ErrorKind::Parameter, "unknown activation '" + s + "'");
}

inline ad::Var activate(const ad::Var &x, Activation a) {
  switch (a) {
  case Activation::Relu: return ad::relu(x);
  case Activation::Tanh: return ad::tanh(x);
  case Activation::Identity: break;
  }
  return x;
}

/// y = act(x W + b), W is in x out.
struct Dense {
  ad::Parameter weight;
  ad::Parameter bias;
  Activation activation = Activation::Identity;

  Dense() = default;
  Dense(const std::string &name, Index in, Index out, Activation act, Rng &rng)
      : activation(act) {
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    Matrix w(in, out);
    for (Index i = 0; i < in; ++i)
      for (Index j = 0; j < out; ++j) w(i, j) = (2.0 * rng.uniform() - 1.0) * limit;
    weight = ad::Parameter(name + ".weight", std::move(w));
    bias = ad::Parameter(name + ".bias", Matrix::Zero(1, out));
  }

  [[nodiscard]] Index in_dim() const { return weight.value.rows(); }
  [[nodiscard]] Index out_dim() const { return weight.value.cols(); }

  ad::Var forward(ad::Tape &tape, const ad::Var &x) {
    if (x.cols() != in_dim()) fail(ErrorKind::Shape, weight.name + ": input width mismatch");
    const ad::Var w = tape.param(weight);
    const ad::Var b = tape.param(bias);
    return activate(ad::add_row(ad::matmul(x, w), b), activation);
  }

  /// Tape-free evaluation with the same arithmetic as forward().
  [[nodiscard]] Matrix apply(const Matrix &x) const {
    if (x.cols() != in_dim()) fail(ErrorKind::Shape, weight.name + ": input width mismatch");
    Matrix out = x * weight.value;
    out.rowwise() += bias.value.row(0);
    switch (activation) {
    case Activation::Relu: out = out.cwiseMax(0.0); break;
    case Activation::Tanh: out = out.array().tanh().matrix(); break;
    case Activation::Identity: break;
    }
    return out;
  }
};

/// Dense stack: sizes {in, h1, .., out}; `hidden` activation on all but the
/// last layer, `output` on the last.
struct Mlp {
  std::vector<Dense> layers;

  Mlp() = default;
  Mlp(const std::string &name, const std::vector<Index> &sizes, Activation hidden, Activation output, Rng &rng) {
    if (sizes.size() < 2) fail(ErrorKind::Shape, name + ": an MLP needs at least input and output sizes");
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
      if (sizes[l] < 1 || sizes[l + 1] < 1) fail(ErrorKind::Shape, name + ": layer sizes must be positive");
      const bool last = l + 2 == sizes.size();
      layers.emplace_back(name + "." + std::to_string(l), sizes[l], sizes[l + 1], last ? output : hidden, rng);
    }
  }

  [[nodiscard]] Index in_dim() const { return layers.front().in_dim(); }
  [[nodiscard]] Index out_dim() const { return layers.back().out_dim(); }

  ad::Var forward(ad::Tape &tape, ad::Var x) {
    for (auto &layer : layers) x = layer.forward(tape, x);
    return x;
  }

  [[nodiscard]] Matrix apply(Matrix x) const {
    for (const auto &layer : layers) x = layer.apply(x);
    return x;
  }

  void collect(std::vector<ad::Parameter *> &out) {
    for (auto &layer : layers) {
      out.push_back(&layer.weight);
      out.push_back(&layer.bias);
    }
  }
};

/// Bias-corrected Adam.
struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t step = 0;
  std::vector<Matrix> first;
  std::vector<Matrix> second;
};

inline void adam_step(AdamState &state, const std::vector<ad::Parameter *> &params) {
  if (state.first.empty()) {
    for (auto *p : params) {
      state.first.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
      state.second.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    }
  }
  if (state.first.size() != params.size()) fail(ErrorKind::Shape, "Adam state does not match parameter list");
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto &p = *params[i];
    if (p.grad.rows() != p.value.rows() || p.grad.cols() != p.value.cols() ||
        state.first[i].rows() != p.value.rows() || state.first[i].cols() != p.value.cols())
      fail(ErrorKind::Shape, "Adam: shape mismatch for " + p.name);
    state.first[i] = state.beta1 * state.first[i] + (1.0 - state.beta1) * p.grad;
    state.second[i] = state.beta2 * state.second[i] + (1.0 - state.beta2) * p.grad.cwiseAbs2();
    const auto m_hat = state.first[i].array() / c1;
    const auto v_hat = state.second[i].array() / c2;
    p.value.array() -= state.lr * m_hat / (v_hat.sqrt() + state.eps);
  }
}

} // namespace archlab::nn
