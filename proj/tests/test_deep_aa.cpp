#include <gtest/gtest.h>

#include <archlab/deep_aa.hpp>
#include <archlab/serialization.hpp>

#include "oracles.hpp"

#include <filesystem>

using namespace archlab;

namespace {

DeepAaArch tiny_arch(Index p = 4, Index k = 3, bool side = false) {
  DeepAaArch a;
  a.p = p;
  a.k = k;
  a.encoder = {6, 5};
  a.decoder = {5, 6};
  a.side_info = side;
  a.side_head = {4};
  a.hidden = nn::Activation::Tanh;
  return a;
}

Dataset small_data(Index n, Index p, bool labels) {
  SyntheticSpec s;
  s.n = n;
  s.p = p;
  s.k = 3;
  s.radius = 1.5;
  s.alpha = RowVector::Ones(3);
  s.embed_seed = 3;
  s.sample_seed = 4;
  auto ds = make_synthetic(s);
  if (labels) ds = make_side_info(ds, SideInfo::mixture_projection(0));
  return ds;
}

RowVector one_hot(Index k, Index j) {
  RowVector v = RowVector::Zero(k);
  v(j) = 1.0;
  return v;
}

/// KL(N(mu, diag s2) || N(0, I)) by Monte Carlo over the log-density ratio.
double monte_carlo_kl(const RowVector &mu, const RowVector &logvar, int draws, Rng &rng) {
  double acc = 0.0;
  for (int s = 0; s < draws; ++s) {
    double ratio = 0.0;
    for (Index d = 0; d < mu.size(); ++d) {
      const double sd = std::exp(0.5 * logvar(d));
      const double e = rng.gaussian();
      const double t = mu(d) + sd * e;
      ratio += -0.5 * e * e - std::log(sd) + 0.5 * t * t;
    }
    acc += ratio;
  }
  return acc / draws;
}

} // namespace

TEST(Encode, HeadsAreStochasticAndMuInHull) {
  auto model = make_deep_aa(tiny_arch(), 1);
  Rng rng(2);
  const Matrix x = 3.0 * rng.gaussian_matrix(17, 4);
  const auto e = encode(model, x);
  ASSERT_EQ(e.a.rows(), 17);
  ASSERT_EQ(e.a.cols(), 3);
  ASSERT_EQ(e.b.rows(), 3);
  ASSERT_EQ(e.b.cols(), 17);
  ASSERT_EQ(e.logvar.cols(), 2);
  EXPECT_TRUE(rows_on_simplex(e.a, 1e-12));
  EXPECT_TRUE(rows_on_simplex(e.b, 1e-12));
  EXPECT_TRUE(rows_on_simplex(e.b * e.a, 1e-12));
  for (Index i = 0; i < 17; ++i) {
    EXPECT_LE(e.mu.row(i).norm(), 1.0 + 1e-9);
    EXPECT_GE(model.frame.barycentric(e.mu.row(i)).minCoeff(), -1e-9);
  }
  EXPECT_LE(e.logvar.maxCoeff(), 10.0);
  EXPECT_GE(e.logvar.minCoeff(), -10.0);
}

TEST(Encode, ForcedOneHotSelectsVertex) {
  auto model = make_deep_aa(tiny_arch(), 1);
  model.a_head.weight.value.setZero();
  model.a_head.bias.value << -500.0, 500.0, -500.0;
  Rng rng(3);
  const auto e = encode(model, rng.gaussian_matrix(4, 4));
  for (Index i = 0; i < 4; ++i)
    EXPECT_LE((e.mu.row(i) - model.frame.vertices.row(1)).norm(), 1e-9);
}

TEST(Encode, ClampsLogvarAndRejectsBadShapes) {
  auto model = make_deep_aa(tiny_arch(), 1);
  model.logvar_head.weight.value.setZero();
  model.logvar_head.bias.value << 50.0, -50.0;
  const auto e = encode(model, Matrix::Ones(2, 4));
  EXPECT_EQ(e.logvar(0, 0), 10.0);
  EXPECT_EQ(e.logvar(0, 1), -10.0);
  EXPECT_THROW((void)encode(model, Matrix::Ones(2, 3)), Error);
  EXPECT_THROW((void)encode(model, Matrix(0, 4)), Error);
}

TEST(ArchetypeLoss, IdentityUniformAndSwap) {
  const auto frame = simplex_vertices(3);
  const Matrix eye = Matrix::Identity(3, 3);
  EXPECT_NEAR(archetype_loss(eye, eye, frame), 0.0, 1e-15);
  const Matrix uniform = Matrix::Constant(3, 3, 1.0 / 3.0);
  EXPECT_NEAR(archetype_loss(uniform, eye, frame), 3.0, 1e-12);
  Matrix swap = Matrix::Zero(3, 3);
  swap(0, 1) = swap(1, 0) = swap(2, 2) = 1.0;
  EXPECT_NEAR(archetype_loss(swap, eye, frame), 6.0, 1e-12);
}

TEST(ArchetypeLoss, ZeroExactlyWhenVerticesFixed) {
  const auto frame = simplex_vertices(4);
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    Matrix a(6, 4), b(4, 6);
    for (Index i = 0; i < 6; ++i) a.row(i) = rng.dirichlet(RowVector::Ones(4));
    for (Index j = 0; j < 4; ++j) b.row(j) = rng.dirichlet(RowVector::Ones(6));
    const double l = archetype_loss(a, b, frame);
    EXPECT_GE(l, 0.0);
    const bool identity = ((b * a) - Matrix::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-12;
    EXPECT_EQ(l < 1e-20, identity);
  }
  // Crafted: rows 0..3 are pure, B picks them out.
  Matrix a = Matrix::Zero(6, 4), b = Matrix::Zero(4, 6);
  for (Index j = 0; j < 4; ++j) a(j, j) = b(j, j) = 1.0;
  a.row(4) = RowVector::Constant(4, 0.25);
  a.row(5) << 0.5, 0.5, 0.0, 0.0;
  EXPECT_EQ(archetype_loss(a, b, frame), 0.0);
}

TEST(KlTerm, Examples) {
  EXPECT_EQ(kl_term(Matrix::Zero(3, 2), Matrix::Zero(3, 2)), 0.0);
  EXPECT_EQ(kl_term(Matrix::Ones(1, 1), Matrix::Zero(1, 1)), 0.5);
  Rng rng(1);
  for (int t = 0; t < 10; ++t) EXPECT_GE(kl_term(rng.gaussian_matrix(4, 3), rng.gaussian_matrix(4, 3)), 0.0);
  // Batch mean: duplicating rows does not change the value.
  Matrix mu(2, 1), lv(2, 1);
  mu << 1.0, 1.0;
  lv << 0.0, 0.0;
  EXPECT_EQ(kl_term(mu, lv), 0.5);
}

TEST(KlTerm, MatchesMonteCarlo) {
  Rng rng(11);
  for (int t = 0; t < 3; ++t) {
    const RowVector mu = rng.gaussian_matrix(1, 2).row(0);
    const RowVector lv = 0.5 * rng.gaussian_matrix(1, 2).row(0);
    const double closed = kl_term(Matrix(mu), Matrix(lv));
    const double mc = monte_carlo_kl(mu, lv, 200000, rng);
    EXPECT_NEAR(mc, closed, 0.02 * closed + 1e-3) << t;
  }
}

TEST(Reparameterize, ClampedVarianceStaysAtMean) {
  Rng rng(4);
  const Matrix mu = rng.gaussian_matrix(50, 2);
  const Matrix t = reparameterize(mu, Matrix::Constant(50, 2, -10.0), rng);
  EXPECT_LE((t - mu).cwiseAbs().maxCoeff(), 0.03);
}

TEST(Reparameterize, DeterministicAndUnbiased) {
  Matrix mu(1, 2), lv(1, 2);
  mu << 0.3, -1.2;
  lv << 0.4, -0.7;
  Rng r1(9), r2(9);
  EXPECT_EQ(reparameterize(mu, lv, r1), reparameterize(mu, lv, r2));
  const Index n = 100000;
  Rng rng(10);
  const Matrix t = reparameterize(mu.replicate(n, 1), lv.replicate(n, 1), rng);
  const RowVector mean = t.colwise().mean();
  for (Index d = 0; d < 2; ++d) {
    const double stderr_d = std::exp(0.5 * lv(d)) / std::sqrt(static_cast<double>(n));
    EXPECT_NEAR(mean(d), mu(d), 3.0 * stderr_d);
  }
}

TEST(Decode, ShapesAndZeroDecoder) {
  auto model = make_deep_aa(tiny_arch(4, 3, true), 2);
  for (auto &layer : model.decoder.layers) layer.weight.value.setZero();
  Rng rng(1);
  const auto d = decode(model, rng.gaussian_matrix(5, 2));
  EXPECT_EQ(d.x, Matrix::Zero(5, 4));
  ASSERT_TRUE(d.y);
  EXPECT_EQ(d.y->size(), 5);
  auto plain = make_deep_aa(tiny_arch(), 2);
  EXPECT_FALSE(decode(plain, Matrix::Zero(1, 2)).y);
  EXPECT_THROW((void)decode(plain, Matrix::Zero(1, 3)), Error);
}

TEST(Loss, PartsRecombine) {
  auto model = make_deep_aa(tiny_arch(4, 3, true), 3);
  const auto ds = small_data(20, 4, true);
  DeepAaHyper h;
  h.at_weight = 0.7;
  h.side_weight = 1.3;
  Rng rng(1);
  const auto parts = loss(model, ds.x.values, ds.labels, 2.5, h, rng);
  EXPECT_NEAR(parts.total, parts.kl + 2.5 * (parts.recon + 1.3 * parts.side) + 0.7 * parts.at, 1e-12);
  EXPECT_GE(parts.kl, 0.0);
  EXPECT_GE(parts.recon, 0.0);
  EXPECT_GE(parts.at, 0.0);
  EXPECT_GE(parts.side, 0.0);
  EXPECT_EQ(parts.lambda, 2.5);
  const auto enc = encode(model, ds.x.values);
  EXPECT_NEAR(parts.at, archetype_loss(enc.a, enc.b, model.frame), 1e-12);
  EXPECT_NEAR(parts.kl, kl_term(enc.mu, enc.logvar), 1e-12);
}

TEST(Loss, PerfectAutoencoderLeavesOnlyArchetypeTerm) {
  // Encoder output pinned to the centroid with unit variance; the decoder
  // returns the single data point whatever the latent draw.
  auto model = make_deep_aa(tiny_arch(), 4);
  model.a_head.weight.value.setZero();
  model.a_head.bias.value.setZero();
  model.logvar_head.weight.value.setZero();
  model.logvar_head.bias.value.setZero();
  RowVector point(4);
  point << 0.5, -1.0, 2.0, 0.25;
  for (auto &layer : model.decoder.layers) layer.weight.value.setZero();
  model.decoder.layers.back().bias.value = point;
  const Matrix x = point;
  DeepAaHyper h;
  Rng rng(2);
  const auto parts = loss(model, x, std::nullopt, 1.0, h, rng);
  EXPECT_NEAR(parts.kl, 0.0, 1e-15);
  EXPECT_NEAR(parts.recon, 0.0, 1e-15);
  EXPECT_NEAR(parts.total, parts.at, 1e-15);
}

TEST(Loss, VanishingLambdaIsKlDominated) {
  auto model = make_deep_aa(tiny_arch(), 5);
  const auto ds = small_data(30, 4, false);
  DeepAaHyper h;
  Rng r1(3), r2(3);
  const auto big = loss(model, ds.x.values, std::nullopt, 1.0, h, r1);
  const auto tiny = loss(model, ds.x.values, std::nullopt, 1e-12, h, r2);
  EXPECT_NEAR(tiny.total, tiny.kl + tiny.at, 1e-9);
  EXPECT_EQ(tiny.recon, big.recon);
}

TEST(Loss, GradientMatchesFiniteDifferences) {
  auto model = make_deep_aa(tiny_arch(4, 3, true), 6);
  const auto ds = small_data(5, 4, true);
  DeepAaHyper h;
  h.at_weight = 0.9;
  auto params = model.parameters();
  auto value = [&] {
    ad::Tape t;
    Rng rng(12);
    return build_loss(t, model, ds.x.values, &*ds.labels, 1.7, h, rng).parts.total;
  };
  auto analytic = [&] {
    ad::Tape t;
    Rng rng(12);
    auto g = build_loss(t, model, ds.x.values, &*ds.labels, 1.7, h, rng);
    t.backward(g.total);
  };
  EXPECT_LE(oracle::max_fd_rel_error(params, value, analytic), 1e-4);
}

TEST(Lambda, Schedules) {
  DeepAaHyper h;
  h.lambda0 = 2.0;
  EXPECT_EQ(h.lambda_at(10000, false), 2.0);
  EXPECT_EQ(h.lambda_at(499, true), 2.0);
  EXPECT_NEAR(h.lambda_at(500, true), 2.02, 1e-12);
  EXPECT_NEAR(h.lambda_at(1999, true), 2.0 * std::pow(1.01, 3), 1e-12);
  h.schedule = LambdaSchedule::Geometric;
  EXPECT_NEAR(h.lambda_at(1000, false), 2.0 * 1.01 * 1.01, 1e-12);
  h.schedule = LambdaSchedule::Constant;
  EXPECT_EQ(h.lambda_at(1000, true), 2.0);
}

TEST(Train, HistoryLengthAndDeterminism) {
  const auto ds = small_data(230, 4, false);
  DeepAaHyper h;
  h.epochs = 1;
  h.batch = 50;
  h.seed = 8;
  auto a = make_deep_aa(tiny_arch(), 1);
  auto b = make_deep_aa(tiny_arch(), 1);
  train(a, ds, h);
  train(b, ds, h);
  ASSERT_EQ(a.history.size(), 5u);
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    EXPECT_EQ(a.history[i].step, static_cast<std::int64_t>(i));
    EXPECT_TRUE(std::isfinite(a.history[i].loss.total));
  }
  const auto pa = a.parameters(), pb = b.parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_EQ(pa[i]->value, pb[i]->value);
  EXPECT_EQ(a.generation_logvar, b.generation_logvar);
  EXPECT_EQ(a.generation_logvar.size(), 2);
}

TEST(Train, NoiselessDatasetRuns) {
  SyntheticSpec s;
  s.n = 120;
  s.p = 4;
  s.sigma2 = 0.0;
  const auto ds = make_synthetic(s);
  DeepAaHyper h;
  h.epochs = 1;
  auto m = make_deep_aa(tiny_arch(), 2);
  train(m, ds, h);
  EXPECT_EQ(m.history.size(), 2u);
}

TEST(Train, ReducesLossAndUsesSideLabels) {
  const auto ds = small_data(400, 4, true);
  DeepAaHyper h;
  h.epochs = 15;
  h.batch = 40;
  h.lr = 5e-3;
  auto m = make_deep_aa(tiny_arch(4, 3, true), 3);
  train(m, ds, h);
  double first = 0.0, last = 0.0;
  for (std::size_t i = 0; i < 10; ++i) {
    first += m.history[i].loss.total;
    last += m.history[m.history.size() - 1 - i].loss.total;
  }
  EXPECT_LT(last, first);
  Dataset unlabeled = ds;
  unlabeled.labels.reset();
  auto fresh = make_deep_aa(tiny_arch(4, 3, true), 3);
  try {
    train(fresh, unlabeled, h);
    FAIL();
  } catch (const Error &e) {
    EXPECT_EQ(e.kind(), ErrorKind::MissingGroundTruth);
  }
}

TEST(Train, NonFiniteLossKeepsLastGoodParameters) {
  auto ds = small_data(50, 4, false);
  auto m = make_deep_aa(tiny_arch(), 4);
  m.decoder.layers.back().bias.value(0, 0) = 1e300;
  const auto before = m.parameters().front()->value;
  DeepAaHyper h;
  h.epochs = 1;
  try {
    train(m, ds, h);
    FAIL();
  } catch (const Error &e) {
    EXPECT_EQ(e.kind(), ErrorKind::Numerical);
  }
  EXPECT_TRUE(all_finite(m.parameters().front()->value));
  EXPECT_EQ(m.parameters().front()->value, before);
}

TEST(Generate, VerticesCentroidAndNoise) {
  auto model = make_deep_aa(tiny_arch(), 5);
  Rng rng(1);
  for (Index j = 0; j < 3; ++j) {
    const auto g = generate(model, one_hot(3, j), rng, false);
    EXPECT_EQ(g.x, decode(model, Matrix(model.frame.vertices.row(j))).x);
  }
  const auto c = generate(model, RowVector::Constant(3, 1.0 / 3.0), rng, false);
  EXPECT_LE((c.x - decode(model, Matrix::Zero(1, 2)).x).cwiseAbs().maxCoeff(), 1e-12);
  Rng n1(4), n2(4);
  const auto a = generate(model, one_hot(3, 0), n1, true);
  const auto b = generate(model, one_hot(3, 0), n2, true);
  EXPECT_EQ(a.x, b.x);
  EXPECT_NE(a.x, generate(model, one_hot(3, 0), rng, false).x);
  RowVector bad(3);
  bad << 0.5, 0.6, -0.1;
  try {
    (void)generate(model, bad, rng, false);
    FAIL();
  } catch (const Error &e) {
    EXPECT_EQ(e.kind(), ErrorKind::Parameter);
  }
}

TEST(Interpolate, Contract) {
  auto model = make_deep_aa(tiny_arch(4, 3, true), 6);
  Rng rng(0);
  RowVector start(3);
  start << 0.2, 0.5, 0.3;
  const RowVector end = one_hot(3, 2);
  const auto path = interpolate(model, start, end, 6);
  ASSERT_EQ(path.x.rows(), 6);
  ASSERT_TRUE(path.y);
  EXPECT_EQ(path.x.row(0), generate(model, start, rng, false).x.row(0));
  EXPECT_EQ(path.x.row(5), generate(model, end, rng, false).x.row(0));
  EXPECT_EQ((*path.y)(5), (*generate(model, end, rng, false).y)(0));

  const auto two = interpolate(model, start, end, 2);
  EXPECT_EQ(two.x.row(0), decode(model, Matrix(model.frame.point(start))).x.row(0));
  EXPECT_EQ(two.x.row(1), decode(model, Matrix(model.frame.point(end))).x.row(0));

  const auto flat = interpolate(model, start, start, 4);
  for (Index s = 1; s < 4; ++s) EXPECT_EQ(flat.x.row(s), flat.x.row(0));

  for (int s = 0; s <= 10; ++s) {
    const double f = s / 10.0;
    EXPECT_GE(model.frame.barycentric(model.frame.point((1.0 - f) * start + f * end)).minCoeff(), -1e-12);
  }
  EXPECT_THROW((void)interpolate(model, start, end, 1), Error);
}

TEST(ModelJson, DeepRoundTripPreservesOutputs) {
  const auto ds = small_data(60, 4, true);
  auto model = make_deep_aa(tiny_arch(4, 3, true), 7);
  DeepAaHyper h;
  h.epochs = 1;
  h.batch = 20;
  train(model, ds, h);
  const auto path = std::filesystem::temp_directory_path() / "archlab_test_deep_model.json";
  write_model(model, path);
  EXPECT_EQ(model_kind(path), "deep_aa");
  const auto back = read_deep_model(path);
  const auto e1 = encode(model, ds.x.values), e2 = encode(back, ds.x.values);
  EXPECT_EQ(e1.a, e2.a);
  EXPECT_EQ(e1.b, e2.b);
  EXPECT_EQ(e1.logvar, e2.logvar);
  const auto d1 = decode(model, e1.mu), d2 = decode(back, e2.mu);
  EXPECT_EQ(d1.x, d2.x);
  EXPECT_EQ(*d1.y, *d2.y);
  EXPECT_EQ(back.generation_logvar, model.generation_logvar);
  ASSERT_EQ(back.history.size(), model.history.size());
  EXPECT_EQ(back.history.back().loss.total, model.history.back().loss.total);
  EXPECT_THROW((void)read_linear_model(path), Error);
  std::filesystem::remove(path);
}
