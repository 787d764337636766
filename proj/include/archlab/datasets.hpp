#pragma once

#include <Eigen/QR>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "io.hpp"
#include "numerics.hpp"
#include "prob_aa.hpp"
#include "random.hpp"
#include "simplex.hpp"

namespace archlab {

struct Warp {
  enum class Kind { None, Exp } kind = Kind::None;
  Index dim = 0;

  static Warp none() { return {}; }
  static Warp exp(Index d) { return {Kind::Exp, d}; }
  [[nodiscard]] bool active() const noexcept { return kind != Kind::None; }
};

/// Synthetic benchmark: k archetypes at radius `radius` on a regular simplex,
/// rotated into p dimensions by a random orthonormal frame (embed_seed) and
/// translated by `shift` in every coordinate, sampled from the probabilistic
/// model (sample_seed), then optionally warped.
struct SyntheticSpec {
  Index n = 10000;
  Index p = 8;
  Index k = 3;
  double sigma2 = 0.05;
  double radius = 10.0;
  double shift = 0.0;
  std::optional<RowVector> alpha;  // defaults to 1/k per archetype
  std::uint64_t embed_seed = 1;
  std::uint64_t sample_seed = 2;
  Warp warp;

  void validate() const {
    if (k < 1) fail(ErrorKind::Parameter, "k must be >= 1");
    if (p < 1) fail(ErrorKind::Parameter, "p must be >= 1");
    if (n < 0) fail(ErrorKind::Parameter, "n must be >= 0");
    if (k - 1 > p) fail(ErrorKind::Parameter, "k - 1 must not exceed p");
    if (!(sigma2 >= 0.0)) fail(ErrorKind::Parameter, "sigma2 must be >= 0");
    if (!(radius > 0.0)) fail(ErrorKind::Parameter, "radius must be > 0");
    if (!std::isfinite(shift)) fail(ErrorKind::Parameter, "shift must be finite");
    if (warp.active() && (warp.dim < 0 || warp.dim >= p))
      fail(ErrorKind::Parameter, "warp.dim must lie in [0, p)");
    if (alpha && alpha->size() != k) fail(ErrorKind::Parameter, "alpha length must equal k");
  }
};

struct Dataset {
  DataMatrix x;
  std::optional<Matrix> a_true;  // n x k
  std::optional<Matrix> z_true;  // k x p, in observed (post-warp) coordinates
  std::optional<Vector> labels;  // side information, one per row

  [[nodiscard]] Index rows() const noexcept { return x.rows(); }
};

/// Applies the warp to every row in place.
inline void apply_warp(Matrix &m, const Warp &warp) {
  if (warp.kind == Warp::Kind::Exp) m.col(warp.dim) = m.col(warp.dim).array().exp().matrix();
}

inline void undo_warp(Matrix &m, const Warp &warp) {
  if (warp.kind == Warp::Kind::Exp) m.col(warp.dim) = m.col(warp.dim).array().log().matrix();
}

/// Archetypes before warping: radius * simplex vertices rotated into p dims.
[[nodiscard]] inline Matrix synthetic_archetypes(const SyntheticSpec &spec) {
  if (spec.k == 1) return Matrix::Constant(1, spec.p, spec.shift);
  Rng rng(spec.embed_seed);
  const Matrix gauss = rng.gaussian_matrix(spec.p, spec.p);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(gauss);
  Eigen::MatrixXd q = qr.householderQ();
  // Fix column signs from R's diagonal so the rotation is unique.
  const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Index c = 0; c < spec.p; ++c)
    if (r(c, c) < 0.0) q.col(c) = -q.col(c);
  const Matrix basis = q.leftCols(spec.k - 1).transpose();  // (k-1) x p
  Matrix z = spec.radius * simplex_vertices(spec.k).vertices * basis;
  z.array() += spec.shift;
  return z;
}

[[nodiscard]] inline Dataset make_synthetic(const SyntheticSpec &spec) {
  spec.validate();
  ProbAaConfig cfg;
  cfg.z_true = synthetic_archetypes(spec);
  cfg.alpha = spec.alpha.value_or(ProbAaConfig::uniform_alpha(spec.k));
  cfg.sigma2 = spec.sigma2;
  auto drawn = sample(cfg, spec.n, spec.sample_seed);
  apply_warp(drawn.x, spec.warp);
  Matrix z = cfg.z_true;
  apply_warp(z, spec.warp);
  Dataset ds;
  ds.x = DataMatrix(std::move(drawn.x));
  ds.a_true = std::move(drawn.a_true);
  ds.z_true = std::move(z);
  return ds;
}

/// Noiseless data whose hull is exactly the archetype simplex: the spec is
/// sampled with sigma2 = 0 and each archetype row is appended `copies` times.
[[nodiscard]] inline Dataset make_exact_convex(SyntheticSpec spec, Index copies = 5) {
  if (copies < 1) fail(ErrorKind::Parameter, "copies must be >= 1");
  if (spec.warp.active()) fail(ErrorKind::Parameter, "exact-convex data cannot be warped");
  spec.sigma2 = 0.0;
  Dataset base = make_synthetic(spec);
  const Index n = base.rows(), k = spec.k, extra = k * copies;
  Matrix x(n + extra, spec.p);
  Matrix a = Matrix::Zero(n + extra, k);
  x.topRows(n) = base.x.values;
  a.topRows(n) = *base.a_true;
  for (Index j = 0; j < k; ++j)
    for (Index c = 0; c < copies; ++c) {
      x.row(n + j * copies + c) = base.z_true->row(j);
      a(n + j * copies + c, j) = 1.0;
    }
  base.x = DataMatrix(std::move(x), base.x.columns);
  base.a_true = std::move(a);
  return base;
}

struct SideInfo {
  enum class Kind { MixtureProjection, LinearCombo } kind = Kind::MixtureProjection;
  Index component = 0;
  RowVector weights;

  static SideInfo mixture_projection(Index j) { return {Kind::MixtureProjection, j, {}}; }
  static SideInfo linear_combo(RowVector w) { return {Kind::LinearCombo, 0, std::move(w)}; }
};

/// Labels derived from the ground-truth mixture weights.
[[nodiscard]] inline Dataset make_side_info(Dataset ds, const SideInfo &kind) {
  if (!ds.a_true) fail(ErrorKind::MissingGroundTruth, "side information needs A_true");
  const Matrix &a = *ds.a_true;
  if (kind.kind == SideInfo::Kind::MixtureProjection) {
    if (kind.component < 0 || kind.component >= a.cols())
      fail(ErrorKind::Parameter, "mixture component out of range");
    ds.labels = a.col(kind.component);
  } else {
    if (kind.weights.size() != a.cols()) fail(ErrorKind::Parameter, "weight length must equal k");
    ds.labels = a * kind.weights.transpose();
  }
  return ds;
}

/// Deterministic train/test split; `train_fraction` of the rows (rounded
/// down, at least one) go to the training set.
[[nodiscard]] inline std::pair<Dataset, Dataset> split(const Dataset &ds, double train_fraction,
                                                       std::uint64_t seed) {
  const Index n = ds.rows();
  Rng rng(seed);
  const auto perm = random_permutation(n, rng);
  Index n_train = static_cast<Index>(std::floor(train_fraction * static_cast<double>(n)));
  n_train = std::clamp<Index>(n_train, std::min<Index>(1, n), n);
  auto take = [&](Index begin, Index end) {
    Dataset out;
    const Index m = end - begin;
    Matrix x(m, ds.x.cols());
    std::optional<Matrix> a;
    std::optional<Vector> y;
    if (ds.a_true) a = Matrix(m, ds.a_true->cols());
    if (ds.labels) y = Vector(m);
    for (Index r = 0; r < m; ++r) {
      const Index src = perm[static_cast<std::size_t>(begin + r)];
      x.row(r) = ds.x.values.row(src);
      if (a) a->row(r) = ds.a_true->row(src);
      if (y) (*y)(r) = (*ds.labels)(src);
    }
    out.x = DataMatrix(std::move(x), ds.x.columns);
    out.a_true = std::move(a);
    out.z_true = ds.z_true;
    out.labels = std::move(y);
    return out;
  };
  return {take(0, n_train), take(n_train, n)};
}

// ---------------------------------------------------------------------------
// CSV

namespace csv {

inline std::string write_matrix(const std::vector<std::string> &header, const Matrix &m,
                                const Vector *extra = nullptr) {
  std::string out;
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (j) out += ',';
    out += header[j];
  }
  out += '\n';
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j) out += ',';
      out += format_real(m(i, j));
    }
    if (extra) {
      if (m.cols()) out += ',';
      out += format_real((*extra)(i));
    }
    out += '\n';
  }
  return out;
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

inline std::vector<std::string_view> split_line(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t pos = 0;
  for (;;) {
    const std::size_t next = line.find(',', pos);
    cells.push_back(line.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos));
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return cells;
}

/// Numeric table with a header row. Errors name the 1-based data row and column.
inline Table parse(const std::string &text, const std::string &source) {
  Table table;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  bool have_header = false;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::string_view line(text.data() + pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    const auto cells = split_line(line);
    if (!have_header) {
      for (auto c : cells) table.header.emplace_back(c);
      have_header = true;
      continue;
    }
    const std::size_t row_no = table.rows.size() + 1;
    if (cells.size() != table.header.size())
      fail(ErrorKind::Parse, source + ": row " + std::to_string(row_no) + " has " +
                                 std::to_string(cells.size()) + " columns, expected " +
                                 std::to_string(table.header.size()));
    std::vector<double> values(cells.size());
    for (std::size_t j = 0; j < cells.size(); ++j) {
      const auto cell = cells[j];
      const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), values[j]);
      if (res.ec != std::errc() || res.ptr != cell.data() + cell.size() || cell.empty())
        fail(ErrorKind::Parse, source + ": row " + std::to_string(row_no) + ", column " +
                                   std::to_string(j + 1) + ": not a number '" + std::string(cell) + "'");
    }
    table.rows.push_back(std::move(values));
  }
  if (!have_header) fail(ErrorKind::Parse, source + ": missing header row");
  return table;
}

inline Table read(const std::filesystem::path &path) { return parse(read_file(path), path.string()); }

inline Matrix to_matrix(const Table &t, std::size_t first_col, std::size_t count) {
  Matrix m(static_cast<Index>(t.rows.size()), static_cast<Index>(count));
  for (std::size_t i = 0; i < t.rows.size(); ++i)
    for (std::size_t j = 0; j < count; ++j)
      m(static_cast<Index>(i), static_cast<Index>(j)) = t.rows[i][first_col + j];
  return m;
}

} // namespace csv

/// Sidecar paths for ground truth: "<stem>.atrue.csv" next to the data file,
/// except that a data file named X.csv uses plain "atrue.csv"/"ztrue.csv".
[[nodiscard]] inline std::filesystem::path sidecar_path(const std::filesystem::path &data, const std::string &what) {
  const auto stem = data.stem().string();
  const std::string name = stem == "X" ? what + ".csv" : stem + "." + what + ".csv";
  return data.parent_path() / name;
}

/// Writes X (plus label column) and ground-truth sidecars when present.
inline void write_csv(const Dataset &ds, const std::filesystem::path &path) {
  std::vector<std::string> header = ds.x.columns;
  if (ds.labels) {
    if (ds.labels->size() != ds.rows()) fail(ErrorKind::Shape, "label count must equal row count");
    header.push_back("label");
  }
  const Vector *extra = ds.labels ? &*ds.labels : nullptr;
  if (ds.a_true) {
    std::vector<std::string> ah;
    for (Index j = 0; j < ds.a_true->cols(); ++j) ah.push_back("a" + std::to_string(j));
    atomic_write(sidecar_path(path, "atrue"), csv::write_matrix(ah, *ds.a_true));
  }
  if (ds.z_true) atomic_write(sidecar_path(path, "ztrue"), csv::write_matrix(ds.x.columns, *ds.z_true));
  atomic_write(path, csv::write_matrix(header, ds.x.values, extra));
}

[[nodiscard]] inline Dataset read_csv(const std::filesystem::path &path) {
  const auto table = csv::read(path);
  Dataset ds;
  std::vector<std::string> names;
  std::optional<std::size_t> label_col;
  for (std::size_t j = 0; j < table.header.size(); ++j) {
    if (table.header[j] == "label") {
      if (label_col) fail(ErrorKind::Parse, path.string() + ": duplicate label column");
      label_col = j;
    } else {
      names.push_back(table.header[j]);
    }
  }
  if (label_col && *label_col != table.header.size() - 1)
    fail(ErrorKind::Parse, path.string() + ": label must be the last column");
  ds.x = DataMatrix(csv::to_matrix(table, 0, names.size()), names);
  if (label_col) ds.labels = csv::to_matrix(table, *label_col, 1).col(0);

  const auto apath = sidecar_path(path, "atrue");
  if (std::filesystem::exists(apath)) {
    const auto t = csv::read(apath);
    ds.a_true = csv::to_matrix(t, 0, t.header.size());
    if (ds.a_true->rows() != ds.rows()) fail(ErrorKind::Parse, apath.string() + ": row count differs from data");
  }
  const auto zpath = sidecar_path(path, "ztrue");
  if (std::filesystem::exists(zpath)) {
    const auto t = csv::read(zpath);
    ds.z_true = csv::to_matrix(t, 0, t.header.size());
    if (ds.z_true->cols() != ds.x.cols()) fail(ErrorKind::Parse, zpath.string() + ": width differs from data");
  }
  return ds;
}

} // namespace archlab
