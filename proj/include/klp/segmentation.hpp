#pragma once

#include "klp/core.hpp"
#include "klp/inductive.hpp"
#include "klp/kernel_lp.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace klp {

/// 8-bit RGB raster, row-major, 3 bytes per pixel.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;

  Index pixels() const { return static_cast<Index>(width) * height; }

  void validate() const {
    if (width < 1 || height < 1) throw InputError("image has no pixels");
    if (rgb.size() != static_cast<size_t>(pixels()) * 3) throw InputError("image buffer size mismatch");
  }
};

/// Per-pixel [r, g, b, x / (W-1), y / (H-1)] in [0, 1], pixel p = y W + x.
inline Matrix featurize(const RgbImage& img) {
  img.validate();
  Matrix F(5, img.pixels());
  const double sx = img.width > 1 ? 1.0 / (img.width - 1) : 0.0;
  const double sy = img.height > 1 ? 1.0 / (img.height - 1) : 0.0;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      const Index p = static_cast<Index>(y) * img.width + x;
      for (int ch = 0; ch < 3; ++ch) F(ch, p) = img.rgb[static_cast<size_t>(3 * p + ch)] / 255.0;
      F(3, p) = x * sx;
      F(4, p) = y * sy;
    }
  return F;
}

// Class indices used for the two-class problem.
inline constexpr int kBackground = 0;
inline constexpr int kForeground = 1;

inline const char* class_label_name(int c) { return c == kForeground ? "fg" : "bg"; }

inline int class_from_label_name(const std::string& s) {
  if (s == "fg") return kForeground;
  if (s == "bg") return kBackground;
  throw InputError("stroke label must be \"fg\" or \"bg\", got \"" + s + "\"");
}

struct Stroke {
  std::vector<std::pair<int, int>> points;  // (x, y)
  int label = kForeground;
  int radius = 2;
};

struct ScribbleSet {
  std::vector<Stroke> strokes;
  std::uint64_t version = 0;

  bool empty() const { return strokes.empty(); }
};

/// Per-pixel scribble class, -1 where unmarked. Strokes are drawn as
/// polylines with a disk brush; later strokes overwrite earlier ones.
inline std::vector<int> rasterize(const ScribbleSet& s, int width, int height) {
  std::vector<int> out(static_cast<size_t>(width) * height, -1);
  auto stamp = [&](int cx, int cy, int r, int label) {
    for (int y = std::max(0, cy - r); y <= std::min(height - 1, cy + r); ++y)
      for (int x = std::max(0, cx - r); x <= std::min(width - 1, cx + r); ++x)
        if ((x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r)
          out[static_cast<size_t>(y) * width + x] = label;
  };
  for (const auto& st : s.strokes) {
    for (const auto& [x, y] : st.points)
      if (x < 0 || y < 0 || x >= width || y >= height)
        throw InputError("stroke point (" + std::to_string(x) + ", " + std::to_string(y) +
                         ") outside the " + std::to_string(width) + "x" + std::to_string(height) + " image");
    if (st.radius < 0) throw InputError("brush radius must be non-negative");
    for (size_t i = 0; i < st.points.size(); ++i) {
      // Bresenham from the previous point (or a single stamp).
      auto [x0, y0] = i == 0 ? st.points[0] : st.points[i - 1];
      const auto [x1, y1] = st.points[i];
      const int dx = std::abs(x1 - x0), sx = x0 < x1 ? 1 : -1;
      const int dy = -std::abs(y1 - y0), sy = y0 < y1 ? 1 : -1;
      int err = dx + dy;
      while (true) {
        stamp(x0, y0, st.radius, st.label);
        if (x0 == x1 && y0 == y1) break;
        const int e2 = 2 * err;
        if (e2 >= dy) { err += dy; x0 += sx; }
        if (e2 <= dx) { err += dx; y0 += sy; }
      }
    }
  }
  return out;
}

/// Solver defaults for interactive use: at the default budget one outer
/// iteration costs roughly half a second on one core.
inline SolverConfig interactive_solver_config() {
  SolverConfig c;
  c.max_iter = 5;
  c.explain_increases = false;
  return c;
}

struct SegmentParams {
  SolverConfig solver = interactive_solver_config();
  KernelSpec kernel = KernelSpec::rbf(0.5);
  Index budget = 1500;
  std::uint64_t seed = 0;

  void validate() const {
    solver.validate();
    kernel.validate();
    if (budget < 2) throw InputError("segmentation budget must be >= 2");
  }

  bool operator==(const SegmentParams& o) const {
    return kernel == o.kernel && budget == o.budget && seed == o.seed && solver.alpha == o.solver.alpha &&
           solver.beta == o.solver.beta && solver.max_iter == o.solver.max_iter && solver.eps == o.solver.eps;
  }
};

struct TrainingSet {
  Matrix X;
  LabelSet labels;
  std::vector<Index> pixels;  // training sample -> pixel index
};

/// All scribbled pixels plus a grid-stratified subsample of the rest. When
/// scribbles alone exceed the budget they are thinned evenly.
inline TrainingSet build_training_set(const Matrix& features, int width, int height,
                                      const std::vector<int>& marks, const SegmentParams& params) {
  const Index n_pix = static_cast<Index>(width) * height;
  if (features.cols() != n_pix || static_cast<Index>(marks.size()) != n_pix)
    throw InputError("build_training_set: feature / mark size mismatch");
  bool has_fg = false, has_bg = false;
  std::vector<Index> scribbled, free;
  for (Index p = 0; p < n_pix; ++p) {
    const int m = marks[static_cast<size_t>(p)];
    if (m < 0) {
      free.push_back(p);
      continue;
    }
    scribbled.push_back(p);
    has_fg |= m == kForeground;
    has_bg |= m == kBackground;
  }
  if (!has_fg) throw PreconditionError("no foreground (fg) scribbles; mark at least one foreground stroke");
  if (!has_bg) throw PreconditionError("no background (bg) scribbles; mark at least one background stroke");

  std::mt19937_64 rng(params.seed);
  if (static_cast<Index>(scribbled.size()) > params.budget) {
    std::vector<Index> thinned;
    const double step = static_cast<double>(scribbled.size()) / static_cast<double>(params.budget);
    for (Index t = 0; t < params.budget; ++t)
      thinned.push_back(scribbled[static_cast<size_t>(static_cast<double>(t) * step)]);
    scribbled = std::move(thinned);
  }

  const Index n_free = std::min<Index>(static_cast<Index>(free.size()),
                                       params.budget - static_cast<Index>(scribbled.size()));
  std::vector<Index> chosen;
  if (n_free >= static_cast<Index>(free.size())) {
    chosen = free;
  } else if (n_free > 0) {
    // Square cells sized so there are about n_free of them; one pixel per
    // cell per round, cells visited in a seeded random order.
    const double side = std::max(1.0, std::sqrt(static_cast<double>(n_pix) / static_cast<double>(n_free)));
    const int gx = static_cast<int>(std::ceil(width / side));
    const int gy = static_cast<int>(std::ceil(height / side));
    std::vector<std::vector<Index>> cells(static_cast<size_t>(gx) * gy);
    for (Index p : free) {
      const int x = static_cast<int>(p % width), y = static_cast<int>(p / width);
      const int cx = std::min(gx - 1, static_cast<int>(x / side));
      const int cy = std::min(gy - 1, static_cast<int>(y / side));
      cells[static_cast<size_t>(cy) * gx + cx].push_back(p);
    }
    std::vector<size_t> order;
    for (size_t c = 0; c < cells.size(); ++c) {
      if (cells[c].empty()) continue;
      std::shuffle(cells[c].begin(), cells[c].end(), rng);
      order.push_back(c);
    }
    std::shuffle(order.begin(), order.end(), rng);
    for (size_t round = 0; static_cast<Index>(chosen.size()) < n_free; ++round)
      for (size_t c : order) {
        if (round < cells[c].size()) chosen.push_back(cells[c][round]);
        if (static_cast<Index>(chosen.size()) == n_free) break;
      }
  }

  TrainingSet ts;
  ts.pixels = scribbled;
  ts.pixels.insert(ts.pixels.end(), chosen.begin(), chosen.end());
  std::sort(ts.pixels.begin(), ts.pixels.end());
  ts.X.resize(features.rows(), static_cast<Index>(ts.pixels.size()));
  ts.labels.class_count = 2;
  for (size_t t = 0; t < ts.pixels.size(); ++t) {
    const Index p = ts.pixels[t];
    ts.X.col(static_cast<Index>(t)) = features.col(p);
    ts.labels.assignments.push_back(marks[static_cast<size_t>(p)] < 0 ? LabelSet::kUnlabeled
                                                                        : marks[static_cast<size_t>(p)]);
  }
  return ts;
}

struct SegmentStats {
  Index n_train = 0;
  int iterations = 0;
  bool converged = true;
  double fit_ms = 0.0;
};

/// Binary mask (1 = foreground) for every pixel.
struct SegmentResult {
  std::vector<std::uint8_t> mask;
  SegmentStats stats;
};

inline SegmentResult segment_image(const Matrix& features, int width, int height, const ScribbleSet& scribbles,
                                   const SegmentParams& params) {
  params.validate();
  const auto marks = rasterize(scribbles, width, height);
  SegmentResult out;
  out.mask.assign(marks.size(), 0);
  const bool all_marked = std::none_of(marks.begin(), marks.end(), [](int m) { return m < 0; });
  const auto ts = build_training_set(features, width, height, marks, params);
  out.stats.n_train = static_cast<Index>(ts.pixels.size());
  if (!all_marked) {
    const auto t0 = std::chrono::steady_clock::now();
    const TrainedModel model = fit(ts.X, ts.labels, params.kernel, params.solver);
    out.stats.fit_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    out.stats.iterations = model.iterations;
    out.stats.converged = model.converged;

    std::vector<bool> in_train(marks.size(), false);
    for (size_t t = 0; t < ts.pixels.size(); ++t) {
      in_train[static_cast<size_t>(ts.pixels[t])] = true;
      out.mask[static_cast<size_t>(ts.pixels[t])] = model.F_train.hard[t] == kForeground;
    }
    std::vector<Index> rest;
    for (Index p = 0; p < static_cast<Index>(marks.size()); ++p)
      if (!in_train[static_cast<size_t>(p)]) rest.push_back(p);
    constexpr Index kChunk = 4096;
    for (size_t begin = 0; begin < rest.size(); begin += kChunk) {
      const size_t end = std::min(rest.size(), begin + static_cast<size_t>(kChunk));
      Matrix Xc(features.rows(), static_cast<Index>(end - begin));
      for (size_t t = begin; t < end; ++t) Xc.col(static_cast<Index>(t - begin)) = features.col(rest[t]);
      const auto pred = predict_map(model, Xc);
      for (size_t t = begin; t < end; ++t) out.mask[static_cast<size_t>(rest[t])] = pred.hard[t - begin] == kForeground;
    }
  }
  for (size_t p = 0; p < marks.size(); ++p)
    if (marks[p] >= 0) out.mask[p] = marks[p] == kForeground;
  return out;
}

/// One image with its scribbles and the latest mask.
class SegmentationSession {
 public:
  SegmentationSession(std::string id, RgbImage image) : id_(std::move(id)), image_(std::move(image)) {
    features_ = featurize(image_);
  }

  const std::string& id() const { return id_; }
  const RgbImage& image() const { return image_; }
  const ScribbleSet& scribbles() const { return scribbles_; }
  const SegmentParams& params() const { return params_; }
  const std::optional<SegmentResult>& result() const { return result_; }
  std::uint64_t result_version() const { return result_version_; }

  void add_strokes(const std::vector<Stroke>& strokes) {
    for (const auto& s : strokes) {
      ScribbleSet probe;
      probe.strokes.push_back(s);
      rasterize(probe, image_.width, image_.height);  // bounds check before mutating
    }
    scribbles_.strokes.insert(scribbles_.strokes.end(), strokes.begin(), strokes.end());
    ++scribbles_.version;
  }

  void clear() {
    scribbles_.strokes.clear();
    ++scribbles_.version;
    result_.reset();
  }

  /// Retrains only when the scribbles or parameters changed since the last
  /// mask.
  const SegmentResult& segment(const std::optional<SegmentParams>& params = std::nullopt) {
    if (params) {
      params->validate();
      if (!(*params == params_)) {
        params_ = *params;
        result_.reset();
      }
    }
    if (!result_ || result_version_ != scribbles_.version) {
      result_ = segment_image(features_, image_.width, image_.height, scribbles_, params_);
      result_version_ = scribbles_.version;
    }
    return *result_;
  }

 private:
  std::string id_;
  RgbImage image_;
  Matrix features_;
  ScribbleSet scribbles_;
  SegmentParams params_;
  std::optional<SegmentResult> result_;
  std::uint64_t result_version_ = 0;
};

}  // namespace klp
