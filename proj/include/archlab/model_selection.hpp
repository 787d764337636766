#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "datasets.hpp"
#include "deep_aa.hpp"
#include "linear_aa.hpp"

namespace archlab {

enum class FitKind { Linear, Deep };

struct SweepConfig {
  FitKind fit = FitKind::Linear;
  LinearAaConfig linear;  // k is overridden per point
  DeepAaArch arch;        // k is overridden per point
  DeepAaHyper hyper;
  double train_fraction = 0.9;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

struct SweepFailure {
  Index k = 0;
  std::string message;
};

struct SelectionCurve {
  std::vector<Index> ks;
  std::vector<double> losses;
  std::optional<Index> chosen_k;
  std::vector<SweepFailure> failures;
};

/// Test-set mean squared reconstruction error of a linear fit: test rows are
/// re-expressed on the simplex of the learned archetypes.
[[nodiscard]] inline double linear_test_mse(const Matrix &test, const LinearAaModel &model) {
  if (test.rows() == 0) return 0.0;
  const Matrix a = solve_weights(test, model.Z);
  return (test - a * model.Z).squaredNorm() / static_cast<double>(test.size());
}

/// Test-set mean squared error of decoding the encoder means.
[[nodiscard]] inline double deep_test_mse(const DeepAaModel &model, const Matrix &test) {
  if (test.rows() == 0) return 0.0;
  const Encoding enc = encode(model, test);
  return (test - decode(model, enc.mu).x).squaredNorm() / static_cast<double>(test.size());
}

/// Smallest k from which every further step improves the loss by less than
/// `rel_threshold` of the largest loss on the curve.
[[nodiscard]] inline Index detect_elbow(const SelectionCurve &curve, double rel_threshold = 0.05) {
  if (curve.ks.size() < 3 || curve.losses.size() != curve.ks.size())
    fail(ErrorKind::InsufficientPoints, "elbow detection needs at least three points");
  const double scale = *std::max_element(curve.losses.begin(), curve.losses.end());
  if (!(scale > 0.0)) return curve.ks.front();
  std::size_t elbow = curve.ks.size() - 1;
  for (std::size_t i = curve.ks.size() - 1; i-- > 0;) {
    const double gain = (curve.losses[i] - curve.losses[i + 1]) / scale;
    if (gain >= rel_threshold) break;
    elbow = i;
  }
  return curve.ks[elbow];
}

/// One fit per k on a fixed 90/10 split (split seed derived from `seed`,
/// fit seed from (seed, k)). Failed fits are recorded and skipped.
[[nodiscard]] inline SelectionCurve sweep(const Dataset &ds, const std::vector<Index> &ks, const SweepConfig &cfg) {
  if (ks.empty()) fail(ErrorKind::Parameter, "sweep needs at least one k");
  for (std::size_t i = 1; i < ks.size(); ++i)
    if (ks[i] <= ks[i - 1]) fail(ErrorKind::Parameter, "sweep ks must be strictly ascending");
  const auto [train_set, test_set] = split(ds, cfg.train_fraction, Rng::derive(cfg.seed, 0));

  std::vector<std::optional<double>> losses(ks.size());
  std::vector<std::string> errors(ks.size());
  auto run = [&](std::size_t i) {
    const Index k = ks[i];
    const std::uint64_t fit_seed = Rng::derive(cfg.seed, static_cast<std::uint64_t>(k) + 1);
    try {
      if (cfg.fit == FitKind::Linear) {
        LinearAaConfig lc = cfg.linear;
        lc.k = k;
        lc.seed = fit_seed;
        const auto model = fit_linear_aa(train_set.x.values, lc);
        losses[i] = linear_test_mse(test_set.x.values, model);
      } else {
        DeepAaArch arch = cfg.arch;
        arch.k = k;
        arch.p = ds.x.cols();
        DeepAaHyper hyper = cfg.hyper;
        hyper.seed = fit_seed;
        auto model = make_deep_aa(arch, fit_seed);
        train(model, train_set, hyper);
        losses[i] = deep_test_mse(model, test_set.x.values);
      }
    } catch (const Error &e) {
      errors[i] = e.what();
    }
  };

  const unsigned threads = std::max(1u, std::min<unsigned>(cfg.threads, static_cast<unsigned>(ks.size())));
  if (threads == 1) {
    for (std::size_t i = 0; i < ks.size(); ++i) run(i);
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t)
      pool.emplace_back([&, t] {
        for (std::size_t i = t; i < ks.size(); i += threads) run(i);
      });
    for (auto &th : pool) th.join();
  }

  SelectionCurve curve;
  for (std::size_t i = 0; i < ks.size(); ++i) {
    if (losses[i]) {
      curve.ks.push_back(ks[i]);
      curve.losses.push_back(*losses[i]);
    } else {
      curve.failures.push_back({ks[i], errors[i]});
    }
  }
  if (curve.ks.size() == 1) curve.chosen_k = curve.ks.front();
  else if (curve.ks.size() >= 3) curve.chosen_k = detect_elbow(curve);
  return curve;
}

[[nodiscard]] inline std::string curve_csv(const SelectionCurve &c) {
  std::string out = "k,loss\n";
  for (std::size_t i = 0; i < c.ks.size(); ++i) out += std::to_string(c.ks[i]) + "," + format_real(c.losses[i]) + "\n";
  return out;
}

} // namespace archlab
