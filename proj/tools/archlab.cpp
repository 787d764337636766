// archlab command-line driver.

#include <CLI11.hpp>
#include <archlab/archlab.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "svg_plot.hpp"

#ifndef ARCHLAB_GIT_DESCRIBE
#define ARCHLAB_GIT_DESCRIBE "unknown"
#endif

namespace fs = std::filesystem;
using nlohmann::json;
using namespace archlab;

namespace {

enum Exit : int { kOk = 0, kConfig = 2, kIo = 3, kNumerical = 4 };

int exit_code(ErrorKind kind) {
  switch (kind) {
  case ErrorKind::Io: return kIo;
  case ErrorKind::Numerical:
  case ErrorKind::Degenerate:
  case ErrorKind::Graph: return kNumerical;
  default: return kConfig;
  }
}

json load_json(const std::string &path) { return json_io::parse(read_file(path), path); }

/// Config file contents (empty object when no file), checked for unknown keys.
json load_config(const std::string &path, const json &defaults, const std::string &where) {
  if (path.empty()) return json::object();
  json j = load_json(path);
  json_io::require_known_keys(j, defaults, where);
  return j;
}

std::vector<double> parse_numbers(const std::string &text, const std::string &what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(cell, &used));
      if (used != cell.size()) throw std::invalid_argument(cell);
    } catch (const std::exception &) {
      fail(ErrorKind::Parameter, what + ": not a number '" + cell + "'");
    }
  }
  if (out.empty()) fail(ErrorKind::Parameter, what + " is empty");
  return out;
}

/// "3,4,5" or "3..6".
std::vector<Index> parse_ks(const std::string &text) {
  std::vector<Index> ks;
  const auto dots = text.find("..");
  if (dots != std::string::npos) {
    const auto lo = parse_numbers(text.substr(0, dots), "--ks");
    const auto hi = parse_numbers(text.substr(dots + 2), "--ks");
    if (lo.size() != 1 || hi.size() != 1 || lo[0] > hi[0]) fail(ErrorKind::Parameter, "--ks range must be 'a..b'");
    for (auto k = static_cast<Index>(lo[0]); k <= static_cast<Index>(hi[0]); ++k) ks.push_back(k);
    return ks;
  }
  for (double v : parse_numbers(text, "--ks")) {
    if (v != static_cast<double>(static_cast<Index>(v))) fail(ErrorKind::Parameter, "--ks must be integers");
    ks.push_back(static_cast<Index>(v));
  }
  return ks;
}

std::vector<std::string> numbered(const std::string &prefix, Index count) {
  std::vector<std::string> out;
  for (Index j = 0; j < count; ++j) out.push_back(prefix + std::to_string(j));
  return out;
}

unsigned thread_cap() {
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char *env = std::getenv("ARCHLAB_THREADS")) {
    const int v = std::atoi(env);
    if (v < 1) fail(ErrorKind::Parameter, "ARCHLAB_THREADS must be a positive integer");
    n = std::min(n, static_cast<unsigned>(v));
  }
  return n;
}

class Run {
public:
  Run(std::string command, fs::path out) : command_(std::move(command)), out_(std::move(out)) {
    start_ = std::chrono::steady_clock::now();
  }

  json config = json::object();
  json seeds = json::object();
  json inputs = json::object();

  void write(const std::string &name, const std::string &content) {
    atomic_write(out_ / name, content);
    record(name);
  }

  void record(const std::string &name) { outputs_[name] = (out_ / name).string(); }

  void finish() {
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    json manifest = {{"schema_version", kSchemaVersion},
                     {"command", command_},
                     {"config", config},
                     {"seeds", seeds},
                     {"inputs", inputs},
                     {"outputs", outputs_},
                     {"git_describe", ARCHLAB_GIT_DESCRIBE},
                     {"duration_seconds", secs}};
    atomic_write(out_ / "manifest.json", manifest.dump(2) + "\n");
  }

private:
  std::string command_;
  fs::path out_;
  json outputs_ = json::object();
  std::chrono::steady_clock::time_point start_;
};

std::string to_json_text(const json &j) { return j.dump(2) + "\n"; }

// ---------------------------------------------------------------------------
// gen-data

struct GenDataArgs {
  std::string spec;
  std::string out;
  std::optional<Index> side_component;
};

void gen_data(const GenDataArgs &args) {
  const json j = load_config(args.spec, json_io::spec(SyntheticSpec{}), "spec");
  const SyntheticSpec spec = json_io::guarded(args.spec, [&] { return json_io::spec(j); });
  Dataset ds = make_synthetic(spec);
  if (args.side_component) ds = make_side_info(std::move(ds), SideInfo::mixture_projection(*args.side_component));

  Run run("gen-data", args.out);
  run.config = {{"spec", json_io::spec(spec)}};
  if (args.side_component) run.config["side_component"] = *args.side_component;
  run.seeds = {{"embed_seed", spec.embed_seed}, {"sample_seed", spec.sample_seed}};
  run.inputs = {{"spec", args.spec}};
  const fs::path x_path = fs::path(args.out) / "X.csv";
  write_csv(ds, x_path);
  for (const char *name : {"X.csv", "atrue.csv", "ztrue.csv"}) run.record(name);
  run.finish();
}

// ---------------------------------------------------------------------------
// fit-linear

struct FitLinearArgs {
  std::string data;
  std::string out;
  std::string config;
  std::optional<Index> k;
  std::optional<std::string> init;
  std::optional<double> tol;
  std::optional<int> max_iters;
  std::optional<std::uint64_t> seed;
};

std::string scatter_csv(const Matrix &x, const Matrix &z, const std::optional<Matrix> &z_true) {
  const PcaModel pca = pca_fit(x, std::min<Index>(2, x.cols()));
  auto emit = [&](std::string &out, const Matrix &m, const char *group) {
    const Matrix s = pca.project(m);
    for (Index i = 0; i < s.rows(); ++i) {
      out += format_real(s(i, 0)) + "," + format_real(s.cols() > 1 ? s(i, 1) : 0.0) + "," + group + "\n";
    }
  };
  std::string out = "pc1,pc2,group\n";
  emit(out, x, "data");
  emit(out, z, "archetype");
  if (z_true) emit(out, *z_true, "truth");
  return out;
}

void fit_linear(const FitLinearArgs &args) {
  const json defaults = json_io::linear_config(LinearAaConfig{});
  const json j = load_config(args.config, defaults, "config");
  LinearAaConfig cfg = json_io::guarded(args.config, [&] { return json_io::linear_config(j); });
  json overrides = json::object();
  if (args.k) overrides["k"] = *args.k;
  if (args.init) overrides["init"] = *args.init;
  if (args.tol) overrides["tol"] = *args.tol;
  if (args.max_iters) overrides["max_iters"] = *args.max_iters;
  if (args.seed) overrides["seed"] = *args.seed;
  cfg = json_io::linear_config(overrides, cfg);

  const Dataset ds = read_csv(args.data);
  const LinearAaModel model = fit_linear_aa(ds.x.values, cfg);

  Run run("fit-linear", args.out);
  run.config = json_io::linear_config(cfg);
  run.seeds = {{"seed", cfg.seed}};
  run.inputs = {{"data", args.data}};
  if (!args.config.empty()) run.inputs["config"] = args.config;
  run.write("model.json", to_json(model).dump() + "\n");
  std::string log = "iter,rss\n";
  for (std::size_t i = 0; i < model.rss_history.size(); ++i)
    log += std::to_string(i) + "," + format_real(model.rss_history[i]) + "\n";
  run.write("rss_log.csv", log);
  run.write("scatter.csv", scatter_csv(ds.x.values, model.Z, ds.z_true));
  if (ds.z_true && ds.z_true->rows() == model.Z.rows()) {
    const RowMatching m = match_rows_mean_abs(model.Z, *ds.z_true);
    run.write("recovery.json", to_json_text({{"assignment", m.assignment}, {"mean_abs_error", m.cost}}));
  }
  run.finish();
}

// ---------------------------------------------------------------------------
// fit-deep

struct FitDeepArgs {
  std::string data;
  std::string out;
  std::string arch;
  std::string hyper;
  std::optional<Index> k;
  std::optional<std::uint64_t> seed;
  std::optional<int> epochs;
  bool side_info = false;
};

std::string latent_csv(const DeepAaModel &model, const Matrix &x) {
  const Encoding enc = encode(model, x);
  std::vector<std::string> header = numbered("mu", model.arch.latent_dim());
  std::string out;
  for (std::size_t j = 0; j < header.size(); ++j) out += (j ? "," : "") + header[j];
  out += ",group\n";
  auto emit = [&](const Matrix &m, const char *group) {
    for (Index i = 0; i < m.rows(); ++i) {
      for (Index d = 0; d < m.cols(); ++d) out += (d ? "," : "") + format_real(m(i, d));
      out += std::string(",") + group + "\n";
    }
  };
  emit(enc.mu, "data");
  emit(model.frame.vertices, "vertex");
  return out;
}

void fit_deep(const FitDeepArgs &args) {
  const json arch_j = load_config(args.arch, json_io::arch(DeepAaArch{}), "arch");
  const json hyper_j = load_config(args.hyper, json_io::hyper(DeepAaHyper{}), "hyper");
  DeepAaArch arch = json_io::guarded(args.arch, [&] { return json_io::arch(arch_j); });
  DeepAaHyper hyper = json_io::guarded(args.hyper, [&] { return json_io::hyper(hyper_j); });
  if (args.k) arch.k = *args.k;
  if (args.seed) hyper.seed = *args.seed;
  if (args.epochs) hyper.epochs = *args.epochs;
  if (args.side_info) arch.side_info = true;

  const Dataset ds = read_csv(args.data);
  if (arch.side_info && !ds.labels) fail(ErrorKind::Parameter, "--side-info needs a 'label' column in the data");
  arch.p = ds.x.cols();
  DeepAaModel model = make_deep_aa(arch, hyper.seed);
  train(model, ds, hyper);

  Run run("fit-deep", args.out);
  run.config = {{"arch", json_io::arch(arch)}, {"hyper", json_io::hyper(hyper)}};
  run.seeds = {{"seed", hyper.seed}};
  run.inputs = {{"data", args.data}};
  if (!args.arch.empty()) run.inputs["arch"] = args.arch;
  if (!args.hyper.empty()) run.inputs["hyper"] = args.hyper;
  run.write("model.json", to_json(model).dump() + "\n");
  run.write("history.csv", history_csv(model));
  run.write("latent.csv", latent_csv(model, ds.x.values));
  if (ds.z_true && ds.z_true->rows() == arch.k) {
    const DeepRecovery r = deep_recovery(model, ds);
    run.write("recovery.json", to_json_text({{"vertex_of_archetype", r.vertex_of_archetype},
                                             {"latent_distance", r.latent_distance},
                                             {"max_latent_distance", r.max_latent_distance},
                                             {"generation_error", r.generation_error},
                                             {"max_generation_error", r.max_generation_error},
                                             {"final_at", r.final_at}}));
  }
  run.finish();
}

// ---------------------------------------------------------------------------
// sweep

struct SweepArgs {
  std::string data;
  std::string out;
  std::string config;
  std::optional<std::string> ks;
  std::optional<std::string> fit;
  std::optional<std::uint64_t> seed;
};

json sweep_defaults() {
  SweepConfig c;
  return {{"ks", std::vector<Index>{}},
          {"fit", "linear"},
          {"seed", c.seed},
          {"train_fraction", c.train_fraction},
          {"linear", json_io::linear_config(c.linear)},
          {"arch", json_io::arch(c.arch)},
          {"hyper", json_io::hyper(c.hyper)}};
}

void run_sweep(const SweepArgs &args) {
  const json j = load_config(args.config, sweep_defaults(), "config");
  SweepConfig cfg = json_io::guarded(args.config, [&] {
    SweepConfig c;
    c.seed = j.value("seed", c.seed);
    c.train_fraction = j.value("train_fraction", c.train_fraction);
    if (j.contains("linear")) c.linear = json_io::linear_config(j.at("linear"));
    if (j.contains("arch")) c.arch = json_io::arch(j.at("arch"));
    if (j.contains("hyper")) c.hyper = json_io::hyper(j.at("hyper"));
    return c;
  });
  std::string fit = json_io::guarded(args.config, [&] { return j.value("fit", std::string("linear")); });
  if (args.fit) fit = *args.fit;
  if (fit == "linear") cfg.fit = FitKind::Linear;
  else if (fit == "deep") cfg.fit = FitKind::Deep;
  else fail(ErrorKind::Parameter, "--fit must be 'linear' or 'deep', got '" + fit + "'");
  if (args.seed) cfg.seed = *args.seed;
  std::vector<Index> ks;
  if (args.ks) ks = parse_ks(*args.ks);
  else if (j.contains("ks")) ks = json_io::guarded(args.config, [&] { return j.at("ks").get<std::vector<Index>>(); });
  if (ks.empty()) fail(ErrorKind::Parameter, "sweep needs --ks");
  if (!(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0))
    fail(ErrorKind::Parameter, "train_fraction must lie in (0, 1)");
  cfg.threads = thread_cap();

  const Dataset ds = read_csv(args.data);
  const SelectionCurve curve = sweep(ds, ks, cfg);
  if (curve.ks.empty()) {
    std::string why = "every fit failed";
    if (!curve.failures.empty()) why += ": " + curve.failures.front().message;
    fail(ErrorKind::Numerical, why);
  }

  Run run("sweep", args.out);
  run.config = {{"ks", ks},
                {"fit", fit},
                {"seed", cfg.seed},
                {"train_fraction", cfg.train_fraction},
                {"linear", json_io::linear_config(cfg.linear)},
                {"arch", json_io::arch(cfg.arch)},
                {"hyper", json_io::hyper(cfg.hyper)}};
  run.seeds = {{"seed", cfg.seed}};
  run.inputs = {{"data", args.data}};
  if (!args.config.empty()) run.inputs["config"] = args.config;
  json failures = json::array();
  for (const auto &f : curve.failures) failures.push_back({{"k", f.k}, {"message", f.message}});
  run.write("curve.csv", curve_csv(curve));
  run.write("sweep.json", to_json_text({{"ks", curve.ks},
                                        {"losses", curve.losses},
                                        {"chosen_k", curve.chosen_k ? json(*curve.chosen_k) : json(nullptr)},
                                        {"failures", failures}}));
  run.finish();
}

// ---------------------------------------------------------------------------
// interpolate / sample

struct LoadedModel {
  std::string kind;
  std::optional<LinearAaModel> linear;
  std::optional<DeepAaModel> deep;

  [[nodiscard]] Index k() const { return linear ? linear->Z.rows() : deep->arch.k; }
  [[nodiscard]] Index p() const { return linear ? linear->Z.cols() : deep->arch.p; }
};

LoadedModel load_model(const std::string &path) {
  LoadedModel m;
  m.kind = model_kind(path);
  if (m.kind == "linear_aa") m.linear = read_linear_model(path);
  else if (m.kind == "deep_aa") m.deep = read_deep_model(path);
  else fail(ErrorKind::Parse, path + ": unknown model kind '" + m.kind + "'");
  return m;
}

RowVector parse_weights(const std::string &text, Index k, const std::string &what) {
  const auto v = parse_numbers(text, what);
  if (static_cast<Index>(v.size()) != k)
    fail(ErrorKind::Parameter, what + " needs " + std::to_string(k) + " weights, got " + std::to_string(v.size()));
  RowVector w = to_row(v);
  if (!rows_on_simplex(w, 1e-9)) fail(ErrorKind::Parameter, what + " must be non-negative and sum to 1");
  return w;
}

struct InterpolateArgs {
  std::string model;
  std::string from;
  std::string to;
  Index steps = 6;
  std::string out;
};

void run_interpolate(const InterpolateArgs &args) {
  const LoadedModel m = load_model(args.model);
  const RowVector a0 = parse_weights(args.from, m.k(), "--from");
  const RowVector a1 = parse_weights(args.to, m.k(), "--to");
  if (args.steps < 2) fail(ErrorKind::Parameter, "--steps must be >= 2");

  Matrix x;
  std::optional<Vector> y;
  if (m.deep) {
    Decoded d = interpolate(*m.deep, a0, a1, args.steps);
    x = std::move(d.x);
    y = std::move(d.y);
  } else {
    x.resize(args.steps, m.p());
    for (Index s = 0; s < args.steps; ++s) {
      const double frac = static_cast<double>(s) / static_cast<double>(args.steps - 1);
      x.row(s) = ((1.0 - frac) * a0 + frac * a1) * m.linear->Z;
    }
  }
  Matrix table(args.steps, x.cols() + 1);
  for (Index s = 0; s < args.steps; ++s) table(s, 0) = static_cast<double>(s) / static_cast<double>(args.steps - 1);
  table.rightCols(x.cols()) = x;
  std::vector<std::string> header{"t"};
  for (const auto &c : numbered("x", x.cols())) header.push_back(c);
  if (y) header.push_back("y");

  Run run("interpolate", args.out);
  run.config = {{"from", json_io::row(a0)}, {"to", json_io::row(a1)}, {"steps", args.steps}};
  run.inputs = {{"model", args.model}};
  run.write("interpolation.csv", csv::write_matrix(header, table, y ? &*y : nullptr));
  run.finish();
}

struct SampleArgs {
  std::string model;
  std::string weights;
  std::string out;
  Index count = 1;
  bool noise = false;
  std::uint64_t seed = 0;
};

void run_sample(const SampleArgs &args) {
  const LoadedModel m = load_model(args.model);
  if (args.count < 1) fail(ErrorKind::Parameter, "--count must be >= 1");
  Matrix w;
  if (fs::exists(args.weights)) {
    const auto t = csv::read(args.weights);
    w = csv::to_matrix(t, 0, t.header.size());
    if (w.cols() != m.k()) fail(ErrorKind::Parameter, args.weights + ": weight columns must equal k");
    if (!rows_on_simplex(w, 1e-9)) fail(ErrorKind::Parameter, args.weights + ": weights must lie on the simplex");
  } else {
    w = parse_weights(args.weights, m.k(), "--weights");
  }

  Rng rng(args.seed);
  const Index rows = w.rows() * args.count;
  Matrix x(rows, m.p());
  std::optional<Vector> y;
  if (m.deep && m.deep->side) y = Vector(rows);
  double linear_sd = 0.0;
  if (m.linear && m.linear->A.size() > 0) linear_sd = std::sqrt(m.linear->rss / static_cast<double>(m.linear->A.rows() * m.p()));
  for (Index i = 0; i < w.rows(); ++i)
    for (Index c = 0; c < args.count; ++c) {
      const Index r = i * args.count + c;
      if (m.deep) {
        const Decoded d = generate(*m.deep, w.row(i), rng, args.noise);
        x.row(r) = d.x.row(0);
        if (y) (*y)(r) = (*d.y)(0);
      } else {
        x.row(r) = w.row(i) * m.linear->Z;
        if (args.noise)
          for (Index d = 0; d < m.p(); ++d) x(r, d) += linear_sd * rng.gaussian();
      }
    }
  std::vector<std::string> header = numbered("x", m.p());
  if (y) header.push_back("y");

  Run run("sample", args.out);
  run.config = {{"weights", json_io::matrix(w)}, {"count", args.count}, {"noise", args.noise}};
  run.seeds = {{"seed", args.seed}};
  run.inputs = {{"model", args.model}};
  if (fs::exists(args.weights)) run.inputs["weights"] = args.weights;
  run.write("samples.csv", csv::write_matrix(header, x, y ? &*y : nullptr));
  run.finish();
}

// ---------------------------------------------------------------------------
// plot

struct TextTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

TextTable read_text_table(const std::string &path) {
  const std::string text = read_file(path);
  TextTable t;
  std::stringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    for (auto c : csv::split_line(line)) cells.emplace_back(c);
    if (t.header.empty()) {
      t.header = std::move(cells);
      continue;
    }
    if (cells.size() != t.header.size())
      fail(ErrorKind::Parse, path + ": row " + std::to_string(t.rows.size() + 1) + " has " +
                                 std::to_string(cells.size()) + " columns, expected " +
                                 std::to_string(t.header.size()));
    t.rows.push_back(std::move(cells));
  }
  if (t.header.empty()) fail(ErrorKind::Parse, path + ": missing header row");
  return t;
}

double cell_number(const TextTable &t, std::size_t r, std::size_t c, const std::string &path) {
  const std::string &s = t.rows[r][c];
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception &) {
  }
  fail(ErrorKind::Parse, path + ": row " + std::to_string(r + 1) + ", column " + std::to_string(c + 1) +
                             ": not a number '" + s + "'");
}

/// CSV kind from its header: curve, rss, history, scatter, latent or xy.
std::string detect_kind(const TextTable &t) {
  const auto &h = t.header;
  if (h == std::vector<std::string>{"k", "loss"}) return "curve";
  if (h == std::vector<std::string>{"iter", "rss"}) return "rss";
  if (!h.empty() && h.front() == "step" && h.size() > 1) return "history";
  if (h == std::vector<std::string>{"pc1", "pc2", "group"}) return "scatter";
  if (h.size() >= 2 && h.front() == "mu0" && h.back() == "group") return "latent";
  if (h.size() >= 2 && std::find(h.begin(), h.end(), "group") == h.end()) return "xy";
  return "";
}

svg::Chart grouped_scatter(const TextTable &t, const std::string &path, std::size_t xc, std::size_t yc) {
  svg::Chart chart;
  chart.style = svg::Style::Scatter;
  const std::size_t gc = t.header.size() - 1;
  std::map<std::string, std::size_t> index;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const std::string &g = t.rows[r][gc];
    auto it = index.find(g);
    if (it == index.end()) {
      it = index.emplace(g, chart.series.size()).first;
      chart.series.push_back({g, {}, {}});
    }
    chart.series[it->second].x.push_back(cell_number(t, r, xc, path));
    chart.series[it->second].y.push_back(yc == xc ? 0.0 : cell_number(t, r, yc, path));
  }
  chart.x_label = t.header[xc];
  chart.y_label = yc == xc ? "" : t.header[yc];
  return chart;
}

svg::Chart columns_against_first(const TextTable &t, const std::string &path, svg::Style style) {
  svg::Chart chart;
  chart.style = style;
  chart.x_label = t.header[0];
  chart.y_label = t.header.size() == 2 ? t.header[1] : "value";
  for (std::size_t c = 1; c < t.header.size(); ++c) {
    svg::Series s{t.header[c], {}, {}};
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
      s.x.push_back(cell_number(t, r, 0, path));
      s.y.push_back(cell_number(t, r, c, path));
    }
    chart.series.push_back(std::move(s));
  }
  return chart;
}

struct PlotArgs {
  std::string in;
  std::string out;
  std::string kind = "auto";
  std::string title;
};

void run_plot(const PlotArgs &args) {
  static const std::set<std::string> kinds{"auto", "curve", "rss", "history", "scatter", "latent", "xy"};
  if (!kinds.count(args.kind)) fail(ErrorKind::Parameter, "unknown plot kind '" + args.kind + "'");
  const TextTable t = read_text_table(args.in);
  const std::string kind = args.kind == "auto" ? detect_kind(t) : args.kind;
  if (kind.empty()) fail(ErrorKind::Parameter, args.in + ": unrecognized CSV kind (header '" +
                                                   (t.header.empty() ? "" : t.header.front()) + ",...')");
  const bool grouped = kind == "scatter" || kind == "latent";
  if (grouped && (t.header.size() < 2 || t.header.back() != "group"))
    fail(ErrorKind::Parameter, args.in + ": " + kind + " plots need a trailing 'group' column");
  if (!grouped && t.header.size() < 2) fail(ErrorKind::Parameter, args.in + ": need at least two columns");

  svg::Chart chart;
  if (grouped) chart = grouped_scatter(t, args.in, 0, t.header.size() > 2 ? 1 : 0);
  else if (kind == "xy") chart = columns_against_first(t, args.in, svg::Style::Scatter);
  else chart = columns_against_first(t, args.in, svg::Style::Line);
  chart.title = args.title.empty() ? fs::path(args.in).filename().string() : args.title;
  atomic_write(args.out, svg::render(chart));
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Archetypal analysis toolkit: linear AA, probabilistic AA and Deep AA"};
  app.require_subcommand(1);
  app.set_version_flag("--version", ARCHLAB_GIT_DESCRIBE);
  std::function<void()> action;

  GenDataArgs gd;
  auto *c_gen = app.add_subcommand("gen-data", "Generate a synthetic archetype dataset");
  c_gen->add_option("--spec", gd.spec, "Dataset spec JSON (missing fields take defaults)");
  c_gen->add_option("--out", gd.out, "Output directory")->required();
  c_gen->add_option("--side-component", gd.side_component, "Add a label column equal to a_true[j]");
  c_gen->callback([&] { action = [&] { gen_data(gd); }; });

  FitLinearArgs fl;
  auto *c_fl = app.add_subcommand("fit-linear", "Fit linear archetypal analysis");
  c_fl->add_option("--data", fl.data, "Data CSV")->required();
  c_fl->add_option("--out", fl.out, "Output directory")->required();
  c_fl->add_option("--config", fl.config, "Fit config JSON");
  c_fl->add_option("--k", fl.k, "Number of archetypes");
  c_fl->add_option("--init", fl.init, "furthest_sum | random_rows");
  c_fl->add_option("--tol", fl.tol, "Relative RSS tolerance");
  c_fl->add_option("--max-iters", fl.max_iters, "Outer iteration cap");
  c_fl->add_option("--seed", fl.seed, "Seed for random_rows init");
  c_fl->callback([&] { action = [&] { fit_linear(fl); }; });

  FitDeepArgs fd;
  auto *c_fd = app.add_subcommand("fit-deep", "Train Deep Archetypal Analysis");
  c_fd->add_option("--data", fd.data, "Data CSV")->required();
  c_fd->add_option("--out", fd.out, "Output directory")->required();
  c_fd->add_option("--arch", fd.arch, "Architecture JSON");
  c_fd->add_option("--hyper", fd.hyper, "Training hyperparameter JSON");
  c_fd->add_option("--k", fd.k, "Number of archetypes");
  c_fd->add_option("--seed", fd.seed, "Training seed");
  c_fd->add_option("--epochs", fd.epochs, "Training epochs");
  c_fd->add_flag("--side-info", fd.side_info, "Reconstruct the 'label' column as side information");
  c_fd->callback([&] { action = [&] { fit_deep(fd); }; });

  SweepArgs sw;
  auto *c_sw = app.add_subcommand("sweep", "Loss curve over k and elbow choice");
  c_sw->add_option("--data", sw.data, "Data CSV")->required();
  c_sw->add_option("--out", sw.out, "Output directory")->required();
  c_sw->add_option("--config", sw.config, "Sweep config JSON");
  c_sw->add_option("--ks", sw.ks, "k values: '3,4,5' or '3..6'");
  c_sw->add_option("--fit", sw.fit, "linear | deep");
  c_sw->add_option("--seed", sw.seed, "Split and fit seed");
  c_sw->callback([&] { action = [&] { run_sweep(sw); }; });

  InterpolateArgs ip;
  auto *c_ip = app.add_subcommand("interpolate", "Decode evenly spaced mixtures between two weight vectors");
  c_ip->add_option("--model", ip.model, "Model JSON")->required();
  c_ip->add_option("--from", ip.from, "Start weights, comma separated")->required();
  c_ip->add_option("--to", ip.to, "End weights, comma separated")->required();
  c_ip->add_option("--steps", ip.steps, "Number of rows")->capture_default_str();
  c_ip->add_option("--out", ip.out, "Output directory")->required();
  c_ip->callback([&] { action = [&] { run_interpolate(ip); }; });

  SampleArgs sa;
  auto *c_sa = app.add_subcommand("sample", "Generate data from mixture weights");
  c_sa->add_option("--model", sa.model, "Model JSON")->required();
  c_sa->add_option("--weights", sa.weights, "Weights 'w0,w1,...' or a CSV of weight rows")->required();
  c_sa->add_option("--out", sa.out, "Output directory")->required();
  c_sa->add_option("--count", sa.count, "Samples per weight row")->capture_default_str();
  c_sa->add_flag("--noise", sa.noise, "Add latent (deep) or residual (linear) noise");
  c_sa->add_option("--seed", sa.seed, "Noise seed")->capture_default_str();
  c_sa->callback([&] { action = [&] { run_sample(sa); }; });

  PlotArgs pl;
  auto *c_pl = app.add_subcommand("plot", "Render a CSV artifact to SVG");
  c_pl->add_option("--in", pl.in, "Input CSV")->required();
  c_pl->add_option("--out", pl.out, "Output SVG")->required();
  c_pl->add_option("--kind", pl.kind, "auto | curve | rss | history | scatter | latent | xy")->capture_default_str();
  c_pl->add_option("--title", pl.title, "Chart title");
  c_pl->callback([&] { action = [&] { run_plot(pl); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp &e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp &e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion &e) {
    return app.exit(e);
  } catch (const CLI::ParseError &e) {
    app.exit(e);
    return kConfig;
  }

  try {
    action();
    return kOk;
  } catch (const Error &e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const nlohmann::json::exception &e) {
    std::cerr << "error: ParseError: " << e.what() << "\n";
    return kConfig;
  } catch (const fs::filesystem_error &e) {
    std::cerr << "error: IoError: " << e.what() << "\n";
    return kIo;
  }
}
