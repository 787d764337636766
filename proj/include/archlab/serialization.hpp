#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "datasets.hpp"
#include "deep_aa.hpp"
#include "io.hpp"
#include "linear_aa.hpp"

namespace archlab {

inline constexpr int kSchemaVersion = 1;

namespace json_io {

using nlohmann::json;

inline json matrix(const Matrix &m) {
  json data = json::array();
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) data.push_back(m(i, j));
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

inline Matrix matrix(const json &j) {
  const Index rows = j.at("rows").get<Index>();
  const Index cols = j.at("cols").get<Index>();
  const auto &data = j.at("data");
  if (rows < 0 || cols < 0 || static_cast<Index>(data.size()) != rows * cols)
    fail(ErrorKind::Parse, "matrix payload size does not match its shape");
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index c = 0; c < cols; ++c) m(i, c) = data[static_cast<std::size_t>(i * cols + c)].get<double>();
  return m;
}

inline json row(const RowVector &v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline RowVector row(const json &j) { return to_row(j.get<std::vector<double>>()); }

inline json dense(const nn::Dense &d) {
  return {{"activation", nn::to_string(d.activation)},
          {"weight", matrix(d.weight.value)},
          {"bias", matrix(d.bias.value)}};
}

inline nn::Dense dense(const json &j, const std::string &name) {
  nn::Dense d;
  d.activation = nn::activation_from_string(j.at("activation").get<std::string>());
  d.weight = ad::Parameter(name + ".weight", matrix(j.at("weight")));
  d.bias = ad::Parameter(name + ".bias", matrix(j.at("bias")));
  if (d.bias.value.rows() != 1 || d.bias.value.cols() != d.weight.value.cols())
    fail(ErrorKind::Parse, name + ": bias shape does not match weight");
  return d;
}

inline json mlp(const nn::Mlp &m) {
  json layers = json::array();
  for (const auto &l : m.layers) layers.push_back(dense(l));
  return layers;
}

inline nn::Mlp mlp(const json &j, const std::string &name) {
  nn::Mlp m;
  for (std::size_t l = 0; l < j.size(); ++l) m.layers.push_back(dense(j[l], name + "." + std::to_string(l)));
  for (std::size_t l = 1; l < m.layers.size(); ++l)
    if (m.layers[l].in_dim() != m.layers[l - 1].out_dim()) fail(ErrorKind::Parse, name + ": inconsistent layer sizes");
  return m;
}

inline json sizes(const std::vector<Index> &s) { return s; }

inline json arch(const DeepAaArch &a) {
  return {{"p", a.p},
          {"k", a.k},
          {"encoder", a.encoder},
          {"decoder", a.decoder},
          {"side_info", a.side_info},
          {"side_head", a.side_head},
          {"hidden", nn::to_string(a.hidden)},
          {"standardize", a.standardize}};
}

/// Architecture from JSON; missing fields keep their defaults.
inline DeepAaArch arch(const json &j, DeepAaArch a = {}) {
  if (j.contains("p")) a.p = j.at("p").get<Index>();
  if (j.contains("k")) a.k = j.at("k").get<Index>();
  if (j.contains("encoder")) a.encoder = j.at("encoder").get<std::vector<Index>>();
  if (j.contains("decoder")) a.decoder = j.at("decoder").get<std::vector<Index>>();
  if (j.contains("side_info")) a.side_info = j.at("side_info").get<bool>();
  if (j.contains("side_head")) a.side_head = j.at("side_head").get<std::vector<Index>>();
  if (j.contains("standardize")) a.standardize = j.at("standardize").get<bool>();
  if (j.contains("hidden")) a.hidden = nn::activation_from_string(j.at("hidden").get<std::string>());
  return a;
}

inline const char *to_string(LambdaSchedule s) {
  switch (s) {
  case LambdaSchedule::Auto: return "auto";
  case LambdaSchedule::Constant: return "constant";
  case LambdaSchedule::Geometric: return "geometric";
  }
  return "auto";
}

inline json hyper(const DeepAaHyper &h) {
  return {{"lambda0", h.lambda0},       {"lambda_growth", h.lambda_growth},
          {"lambda_every", h.lambda_every}, {"schedule", to_string(h.schedule)},
          {"at_weight", h.at_weight},   {"side_weight", h.side_weight},
          {"lr", h.lr},                 {"beta1", h.beta1},
          {"beta2", h.beta2},           {"batch", h.batch},
          {"epochs", h.epochs},         {"seed", h.seed},
          {"logvar_min", h.logvar_min}, {"logvar_max", h.logvar_max}};
}

inline DeepAaHyper hyper(const json &j, DeepAaHyper h = {}) {
  auto get = [&](const char *key, auto &field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("lambda0", h.lambda0);
  get("lambda_growth", h.lambda_growth);
  get("lambda_every", h.lambda_every);
  get("at_weight", h.at_weight);
  get("side_weight", h.side_weight);
  get("lr", h.lr);
  get("beta1", h.beta1);
  get("beta2", h.beta2);
  get("batch", h.batch);
  get("epochs", h.epochs);
  get("seed", h.seed);
  get("logvar_min", h.logvar_min);
  get("logvar_max", h.logvar_max);
  if (j.contains("schedule")) {
    const auto s = j.at("schedule").get<std::string>();
    if (s == "auto") h.schedule = LambdaSchedule::Auto;
    else if (s == "constant") h.schedule = LambdaSchedule::Constant;
    else if (s == "geometric") h.schedule = LambdaSchedule::Geometric;
    else fail(ErrorKind::Parameter, "unknown lambda schedule '" + s + "'");
  }
  return h;
}

inline json spec(const SyntheticSpec &s) {
  json warp = {{"kind", s.warp.kind == Warp::Kind::Exp ? "exp" : "none"}, {"dim", s.warp.dim}};
  return {{"n", s.n},
          {"p", s.p},
          {"k", s.k},
          {"sigma2", s.sigma2},
          {"radius", s.radius},
          {"shift", s.shift},
          {"alpha", s.alpha ? row(*s.alpha) : json(nullptr)},
          {"embed_seed", s.embed_seed},
          {"sample_seed", s.sample_seed},
          {"warp", std::move(warp)}};
}

/// Synthetic spec from JSON; missing fields keep their defaults.
inline SyntheticSpec spec(const json &j, SyntheticSpec s = {}) {
  if (j.contains("n")) s.n = j.at("n").get<Index>();
  if (j.contains("p")) s.p = j.at("p").get<Index>();
  if (j.contains("k")) s.k = j.at("k").get<Index>();
  if (j.contains("sigma2")) s.sigma2 = j.at("sigma2").get<double>();
  if (j.contains("radius")) s.radius = j.at("radius").get<double>();
  if (j.contains("shift")) s.shift = j.at("shift").get<double>();
  if (j.contains("alpha")) {
    if (j.at("alpha").is_null()) s.alpha.reset();
    else s.alpha = row(j.at("alpha"));
  }
  if (j.contains("embed_seed")) s.embed_seed = j.at("embed_seed").get<std::uint64_t>();
  if (j.contains("sample_seed")) s.sample_seed = j.at("sample_seed").get<std::uint64_t>();
  if (j.contains("warp")) {
    const auto &w = j.at("warp");
    const auto kind = w.value("kind", std::string("none"));
    if (kind == "none") s.warp = Warp::none();
    else if (kind == "exp") s.warp = Warp::exp(w.value("dim", Index{0}));
    else fail(ErrorKind::Parameter, "warp.kind must be 'none' or 'exp', got '" + kind + "'");
  }
  return s;
}

inline const char *to_string(AaInit init) { return init == AaInit::FurthestSum ? "furthest_sum" : "random_rows"; }

inline json linear_config(const LinearAaConfig &c) {
  return {{"k", c.k},
          {"max_iters", c.max_outer_iters},
          {"tol", c.rel_tol},
          {"init", to_string(c.init)},
          {"seed", c.seed},
          {"inner_steps", c.inner_steps}};
}

inline LinearAaConfig linear_config(const json &j, LinearAaConfig c = {}) {
  if (j.contains("k")) c.k = j.at("k").get<Index>();
  if (j.contains("max_iters")) c.max_outer_iters = j.at("max_iters").get<int>();
  if (j.contains("tol")) c.rel_tol = j.at("tol").get<double>();
  if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("inner_steps")) c.inner_steps = j.at("inner_steps").get<int>();
  if (j.contains("init")) {
    const auto s = j.at("init").get<std::string>();
    if (s == "furthest_sum") c.init = AaInit::FurthestSum;
    else if (s == "random_rows") c.init = AaInit::RandomRows;
    else fail(ErrorKind::Parameter, "init must be 'furthest_sum' or 'random_rows', got '" + s + "'");
  }
  return c;
}

/// Rejects keys of `j` that `defaults` does not have, naming them as `where.key`.
inline void require_known_keys(const json &j, const json &defaults, const std::string &where) {
  if (!j.is_object()) fail(ErrorKind::Parameter, where + " must be a JSON object");
  for (const auto &[key, value] : j.items()) {
    const std::string name = where.empty() ? key : where + "." + key;
    if (!defaults.contains(key)) fail(ErrorKind::Parameter, "unknown field '" + name + "'");
    if (value.is_object() && defaults.at(key).is_object()) require_known_keys(value, defaults.at(key), name);
  }
}

inline void check_header(const json &j, const std::string &kind) {
  if (!j.contains("schema_version")) fail(ErrorKind::SchemaVersion, "missing schema_version");
  const int v = j.at("schema_version").get<int>();
  if (v != kSchemaVersion)
    fail(ErrorKind::SchemaVersion, "unsupported schema_version " + std::to_string(v) + " (expected " +
                                       std::to_string(kSchemaVersion) + ")");
  if (j.value("kind", std::string()) != kind)
    fail(ErrorKind::Parse, "model kind is '" + j.value("kind", std::string()) + "', expected '" + kind + "'");
}

inline json parse(const std::string &text, const std::string &source) {
  try {
    return json::parse(text);
  } catch (const json::parse_error &e) {
    fail(ErrorKind::Parse, source + ": " + e.what());
  }
}

template <typename F>
auto guarded(const std::string &source, F &&f) {
  try {
    return f();
  } catch (const json::exception &e) {
    fail(ErrorKind::Parse, source + ": " + e.what());
  }
}

} // namespace json_io

[[nodiscard]] inline nlohmann::json to_json(const LinearAaModel &m) {
  using json_io::matrix;
  return {{"schema_version", kSchemaVersion},
          {"kind", "linear_aa"},
          {"k", m.Z.rows()},
          {"A", matrix(m.A)},
          {"B", matrix(m.B)},
          {"Z", matrix(m.Z)},
          {"rss", m.rss},
          {"iterations", m.iterations},
          {"converged", m.converged},
          {"rss_history", m.rss_history}};
}

[[nodiscard]] inline LinearAaModel linear_model_from_json(const nlohmann::json &j) {
  json_io::check_header(j, "linear_aa");
  return json_io::guarded("linear model", [&] {
    LinearAaModel m;
    m.A = json_io::matrix(j.at("A"));
    m.B = json_io::matrix(j.at("B"));
    m.Z = json_io::matrix(j.at("Z"));
    m.rss = j.at("rss").get<double>();
    m.iterations = j.at("iterations").get<int>();
    m.converged = j.at("converged").get<bool>();
    m.rss_history = j.at("rss_history").get<std::vector<double>>();
    if (m.A.cols() != m.Z.rows() || m.B.rows() != m.Z.rows() || m.B.cols() != m.A.rows())
      fail(ErrorKind::Parse, "linear model matrices have inconsistent shapes");
    return m;
  });
}

[[nodiscard]] inline nlohmann::json to_json(const DeepAaModel &m) {
  using nlohmann::json;
  json history = json::array();
  for (const auto &h : m.history)
    history.push_back({h.step, h.loss.total, h.loss.recon, h.loss.kl, h.loss.at, h.loss.side, h.loss.lambda});
  json params = {{"encoder", json_io::mlp(m.encoder)},
                 {"a_head", json_io::dense(m.a_head)},
                 {"b_head", json_io::dense(m.b_head)},
                 {"logvar_head", json_io::dense(m.logvar_head)},
                 {"decoder", json_io::mlp(m.decoder)}};
  if (m.side) params["side"] = json_io::mlp(*m.side);
  return {{"schema_version", kSchemaVersion},
          {"kind", "deep_aa"},
          {"arch", json_io::arch(m.arch)},
          {"frame", json_io::matrix(m.frame.vertices)},
          {"logvar_min", m.logvar_min},
          {"logvar_max", m.logvar_max},
          {"generation_logvar", json_io::row(m.generation_logvar)},
          {"x_mean", json_io::row(m.x_mean)},
          {"x_scale", json_io::row(m.x_scale)},
          {"params", std::move(params)},
          {"history_columns", {"step", "total", "recon", "kl", "at", "side", "lambda"}},
          {"history", std::move(history)}};
}

[[nodiscard]] inline DeepAaModel deep_model_from_json(const nlohmann::json &j) {
  json_io::check_header(j, "deep_aa");
  return json_io::guarded("deep model", [&] {
    DeepAaModel m;
    m.arch = json_io::arch(j.at("arch"));
    m.arch.validate();
    m.frame = simplex_vertices(m.arch.k);
    if (json_io::matrix(j.at("frame")) != m.frame.vertices)
      fail(ErrorKind::Parse, "stored simplex frame differs from the canonical frame");
    m.logvar_min = j.at("logvar_min").get<double>();
    m.logvar_max = j.at("logvar_max").get<double>();
    m.generation_logvar = json_io::row(j.at("generation_logvar"));
    m.x_mean = json_io::row(j.at("x_mean"));
    m.x_scale = json_io::row(j.at("x_scale"));
    const auto &p = j.at("params");
    m.encoder = json_io::mlp(p.at("encoder"), "encoder");
    m.a_head = json_io::dense(p.at("a_head"), "a_head");
    m.b_head = json_io::dense(p.at("b_head"), "b_head");
    m.logvar_head = json_io::dense(p.at("logvar_head"), "logvar_head");
    m.decoder = json_io::mlp(p.at("decoder"), "decoder");
    if (p.contains("side")) m.side = json_io::mlp(p.at("side"), "side");
    if (m.side.has_value() != m.arch.side_info) fail(ErrorKind::Parse, "side head presence disagrees with arch");
    if (m.trunk_width() != m.a_head.in_dim() || m.a_head.out_dim() != m.arch.k ||
        m.b_head.out_dim() != m.arch.k || m.logvar_head.out_dim() != m.arch.latent_dim() ||
        m.decoder.in_dim() != m.arch.latent_dim() || m.decoder.out_dim() != m.arch.p ||
        m.generation_logvar.size() != m.arch.latent_dim() || m.x_mean.size() != m.arch.p ||
        m.x_scale.size() != m.arch.p)
      fail(ErrorKind::Parse, "deep model parameters disagree with arch");
    for (const auto &h : j.at("history")) {
      HistoryEntry e;
      e.step = h.at(0).get<std::int64_t>();
      e.loss = {h.at(1).get<double>(), h.at(2).get<double>(), h.at(3).get<double>(),
                h.at(4).get<double>(), h.at(5).get<double>(), h.at(6).get<double>()};
      m.history.push_back(e);
    }
    return m;
  });
}

inline void write_model(const LinearAaModel &m, const std::filesystem::path &path) {
  atomic_write(path, to_json(m).dump() + "\n");
}

inline void write_model(const DeepAaModel &m, const std::filesystem::path &path) {
  atomic_write(path, to_json(m).dump() + "\n");
}

/// Model kind stored in a model file ("linear_aa" or "deep_aa").
[[nodiscard]] inline std::string model_kind(const std::filesystem::path &path) {
  const auto j = json_io::parse(read_file(path), path.string());
  json_io::check_header(j, j.value("kind", std::string()));
  return j.at("kind").get<std::string>();
}

[[nodiscard]] inline LinearAaModel read_linear_model(const std::filesystem::path &path) {
  return linear_model_from_json(json_io::parse(read_file(path), path.string()));
}

[[nodiscard]] inline DeepAaModel read_deep_model(const std::filesystem::path &path) {
  return deep_model_from_json(json_io::parse(read_file(path), path.string()));
}

/// Training history as CSV: step,total,recon,kl,at,side,lambda.
[[nodiscard]] inline std::string history_csv(const DeepAaModel &m) {
  std::string out = "step,total,recon,kl,at,side,lambda\n";
  for (const auto &h : m.history) {
    out += std::to_string(h.step);
    for (double v : {h.loss.total, h.loss.recon, h.loss.kl, h.loss.at, h.loss.side, h.loss.lambda}) {
      out += ',';
      out += format_real(v);
    }
    out += '\n';
  }
  return out;
}

} // namespace archlab
