#pragma once

#include "klp/core.hpp"
#include "klp/labels.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

namespace klp {

/// Feature table (n x N, one column per sample) with optional ground truth.
struct Dataset {
  Matrix X;
  // Class index per sample, kUnlabeled where the label cell was empty.
  std::vector<int> y;
  // Original label strings by class index (first-appearance order).
  std::vector<std::string> class_names;
  std::vector<std::string> ids;

  Index samples() const { return X.cols(); }
  Index features() const { return X.rows(); }
  bool has_labels() const { return !y.empty(); }
  int classes() const { return static_cast<int>(class_names.size()); }

  LabelSet label_set() const {
    LabelSet L;
    L.class_count = classes();
    L.assignments = y.empty() ? std::vector<int>(static_cast<size_t>(samples()), LabelSet::kUnlabeled) : y;
    return L;
  }
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double parse_real(const std::string& cell, Index row, const std::string& column) {
  const std::string t = trim(cell);
  double v = 0.0;
  std::size_t used = 0;
  try {
    v = std::stod(t, &used);
  } catch (const std::exception&) {
    throw IngestionError("non-numeric value '" + t + "' in column " + column, row);
  }
  if (used != t.size()) throw IngestionError("non-numeric value '" + t + "' in column " + column, row);
  if (!std::isfinite(v)) throw IngestionError("non-finite value in column " + column, row);
  return v;
}

}  // namespace detail

/// Parses the dataset CSV format: a header with f0..f{n-1} plus optional
/// `label` and `id` columns in any order. Row numbers in errors are 1-based
/// file lines.
inline Dataset parse_csv(std::istream& in) {
  std::string line;
  Index line_no = 0;
  if (!std::getline(in, line)) throw IngestionError("empty file", 1);
  ++line_no;
  const auto header = detail::split_csv_line(line);

  std::vector<int> feature_col;
  std::optional<size_t> label_col, id_col;
  for (size_t i = 0; i < header.size(); ++i) {
    const std::string h = detail::trim(header[i]);
    if (h == "label") {
      label_col = i;
    } else if (h == "id") {
      id_col = i;
    } else if (h.size() > 1 && h[0] == 'f' && h.find_first_not_of("0123456789", 1) == std::string::npos) {
      const int k = std::stoi(h.substr(1));
      if (k >= static_cast<int>(feature_col.size())) feature_col.resize(static_cast<size_t>(k) + 1, -1);
      if (feature_col[static_cast<size_t>(k)] != -1) throw IngestionError("duplicate column " + h, 1);
      feature_col[static_cast<size_t>(k)] = static_cast<int>(i);
    } else {
      throw IngestionError("unknown column '" + h + "'", 1);
    }
  }
  if (feature_col.empty()) throw IngestionError("no feature columns (expected f0, f1, ...)", 1);
  for (size_t k = 0; k < feature_col.size(); ++k)
    if (feature_col[k] < 0) throw IngestionError("missing column f" + std::to_string(k), 1);

  Dataset ds;
  std::vector<std::vector<double>> cols(feature_col.size());
  std::unordered_map<std::string, int> class_of;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size())
      throw IngestionError("expected " + std::to_string(header.size()) + " cells, found " +
                               std::to_string(cells.size()),
                           line_no);
    for (size_t k = 0; k < feature_col.size(); ++k)
      cols[k].push_back(detail::parse_real(cells[static_cast<size_t>(feature_col[k])], line_no,
                                           "f" + std::to_string(k)));
    if (label_col) {
      const std::string name = detail::trim(cells[*label_col]);
      if (name.empty()) {
        ds.y.push_back(LabelSet::kUnlabeled);
      } else {
        auto [it, fresh] = class_of.emplace(name, static_cast<int>(ds.class_names.size()));
        if (fresh) ds.class_names.push_back(name);
        ds.y.push_back(it->second);
      }
    }
    if (id_col) ds.ids.push_back(detail::trim(cells[*id_col]));
  }
  if (cols[0].empty()) throw IngestionError("no data rows", line_no);

  const Index n = static_cast<Index>(cols.size());
  const Index N = static_cast<Index>(cols[0].size());
  ds.X.resize(n, N);
  for (Index k = 0; k < n; ++k)
    for (Index j = 0; j < N; ++j) ds.X(k, j) = cols[static_cast<size_t>(k)][static_cast<size_t>(j)];
  return ds;
}

inline Dataset load_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw InputError("cannot open dataset " + path);
  return parse_csv(f);
}

inline void write_csv(std::ostream& out, const Dataset& ds) {
  out.precision(std::numeric_limits<double>::max_digits10);
  for (Index k = 0; k < ds.features(); ++k) out << (k ? "," : "") << 'f' << k;
  if (ds.has_labels()) out << ",label";
  if (!ds.ids.empty()) out << ",id";
  out << '\n';
  for (Index j = 0; j < ds.samples(); ++j) {
    for (Index k = 0; k < ds.features(); ++k) out << (k ? "," : "") << ds.X(k, j);
    if (ds.has_labels()) {
      const int c = ds.y[static_cast<size_t>(j)];
      out << ',';
      if (c != LabelSet::kUnlabeled) out << ds.class_names[static_cast<size_t>(c)];
    }
    if (!ds.ids.empty()) out << ',' << ds.ids[static_cast<size_t>(j)];
    out << '\n';
  }
}

inline void save_csv(const Dataset& ds, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw InputError("cannot open " + path + " for writing");
  write_csv(f, ds);
}

/// Two interleaved half circles: the first half of the samples is class 0
/// (upper arc), the rest class 1 (lower arc, shifted).
inline Dataset make_two_moons(Index N, double noise, std::uint64_t seed) {
  if (N < 4) throw InputError("make_two_moons: need N >= 4");
  if (noise < 0.0) throw InputError("make_two_moons: noise must be non-negative");
  const Index n_out = N / 2;
  const Index n_in = N - n_out;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> jitter(0.0, 1.0);
  Dataset ds;
  ds.X.resize(2, N);
  ds.y.resize(static_cast<size_t>(N));
  ds.class_names = {"0", "1"};
  const double pi = std::numbers::pi;
  for (Index i = 0; i < n_out; ++i) {
    const double t = n_out > 1 ? pi * static_cast<double>(i) / static_cast<double>(n_out - 1) : 0.0;
    ds.X(0, i) = std::cos(t);
    ds.X(1, i) = std::sin(t);
    ds.y[static_cast<size_t>(i)] = 0;
  }
  for (Index i = 0; i < n_in; ++i) {
    const double t = n_in > 1 ? pi * static_cast<double>(i) / static_cast<double>(n_in - 1) : 0.0;
    ds.X(0, n_out + i) = 1.0 - std::cos(t);
    ds.X(1, n_out + i) = 0.5 - std::sin(t);
    ds.y[static_cast<size_t>(n_out + i)] = 1;
  }
  if (noise > 0.0)
    for (Index j = 0; j < N; ++j)
      for (Index r = 0; r < 2; ++r) ds.X(r, j) += noise * jitter(rng);
  return ds;
}

/// c isotropic 2-D Gaussian clusters centred on a circle of radius 5.
inline Dataset make_blobs(Index N, int c, double spread, std::uint64_t seed) {
  if (c < 1) throw InputError("make_blobs: need at least one class");
  if (N < 2 * c) throw InputError("make_blobs: need N >= 2c");
  if (spread < 0.0) throw InputError("make_blobs: spread must be non-negative");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> jitter(0.0, 1.0);
  Dataset ds;
  ds.X.resize(2, N);
  ds.y.resize(static_cast<size_t>(N));
  for (int k = 0; k < c; ++k) ds.class_names.push_back(std::to_string(k));
  for (Index j = 0; j < N; ++j) {
    const int k = static_cast<int>(j * c / N);
    const double a = 2.0 * std::numbers::pi * k / c;
    ds.X(0, j) = 5.0 * std::cos(a) + spread * jitter(rng);
    ds.X(1, j) = 5.0 * std::sin(a) + spread * jitter(rng);
    ds.y[static_cast<size_t>(j)] = k;
  }
  return ds;
}

enum class Normalization { none, minmax, zscore };

inline std::string to_string(Normalization n) {
  switch (n) {
    case Normalization::none: return "none";
    case Normalization::minmax: return "minmax";
    case Normalization::zscore: return "zscore";
  }
  return "none";
}

inline Normalization normalization_from_string(const std::string& s) {
  if (s == "none") return Normalization::none;
  if (s == "minmax") return Normalization::minmax;
  if (s == "zscore") return Normalization::zscore;
  throw ConfigError("unknown normalization '" + s + "' (expected none, minmax or zscore)");
}

/// Per-feature affine map fitted on one sample set and applied to others.
struct FeatureScaler {
  Vector shift;
  Vector scale;

  static FeatureScaler fit(const Matrix& X, Normalization kind) {
    FeatureScaler s;
    const Index n = X.rows();
    s.shift = Vector::Zero(n);
    s.scale = Vector::Ones(n);
    if (kind == Normalization::none || X.cols() == 0) return s;
    for (Index k = 0; k < n; ++k) {
      if (kind == Normalization::minmax) {
        const double lo = X.row(k).minCoeff(), hi = X.row(k).maxCoeff();
        s.shift(k) = lo;
        if (hi > lo) s.scale(k) = 1.0 / (hi - lo);
      } else {
        const double mean = X.row(k).mean();
        const double var = (X.row(k).array() - mean).square().mean();
        s.shift(k) = mean;
        if (var > 0.0) s.scale(k) = 1.0 / std::sqrt(var);
      }
    }
    return s;
  }

  Matrix apply(const Matrix& X) const {
    if (X.rows() != shift.size()) throw InputError("scaler: feature count mismatch");
    return scale.asDiagonal() * (X.colwise() - shift);
  }
};

}  // namespace klp
