#pragma once

#include "klp/core.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

namespace klp {

struct WeightMatrix {
  Matrix entries;
  bool symmetric = false;
};

/// Per-sample neighbor lists, nearest first.
struct NeighborIndex {
  std::vector<std::vector<Index>> neighbors;

  Index size() const { return static_cast<Index>(neighbors.size()); }
};

/// Exact Euclidean k-nearest neighbors over the columns of X. Self is
/// excluded; equal distances are ordered by lower index.
inline NeighborIndex knn(const Eigen::Ref<const Matrix>& X, Index k) {
  const Index n = X.cols();
  if (k < 1) throw InputError("knn: k must be positive");
  if (k >= n)
    throw InputError("knn: k = " + std::to_string(k) + " must be smaller than N = " +
                     std::to_string(n));
  NeighborIndex out;
  out.neighbors.resize(static_cast<size_t>(n));
  std::vector<std::pair<double, Index>> cand;
  cand.reserve(static_cast<size_t>(n));
  for (Index i = 0; i < n; ++i) {
    cand.clear();
    for (Index j = 0; j < n; ++j)
      if (j != i) cand.emplace_back((X.col(i) - X.col(j)).squaredNorm(), j);
    std::partial_sort(cand.begin(), cand.begin() + k, cand.end());
    auto& row = out.neighbors[static_cast<size_t>(i)];
    row.reserve(static_cast<size_t>(k));
    for (Index t = 0; t < k; ++t) row.push_back(cand[static_cast<size_t>(t)].second);
  }
  return out;
}

/// Gaussian weights exp(-|xi-xj|^2 / sigma) on the symmetrized kNN edge set,
/// sigma = scale * mean Euclidean length over all (i, neighbor) pairs.
inline WeightMatrix gaussian_weights(const Eigen::Ref<const Matrix>& X, const NeighborIndex& nbr,
                                     double scale = 1.0) {
  const Index n = X.cols();
  if (nbr.size() != n) throw InputError("gaussian_weights: neighbor index built for other data");
  double total = 0.0;
  std::size_t edges = 0;
  for (Index i = 0; i < n; ++i)
    for (Index j : nbr.neighbors[static_cast<size_t>(i)]) {
      total += (X.col(i) - X.col(j)).norm();
      ++edges;
    }
  const double sigma = edges ? scale * total / static_cast<double>(edges) : 0.0;
  if (!(sigma > 0.0))
    throw DegenerateInputError("gaussian_weights: mean neighbor distance is zero");

  Matrix W = Matrix::Zero(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j : nbr.neighbors[static_cast<size_t>(i)]) {
      const double w = std::exp(-(X.col(i) - X.col(j)).squaredNorm() / sigma);
      W(i, j) = w;
      W(j, i) = w;
    }
  return {std::move(W), true};
}

/// D^{-1/2} ((W + W^T)/2) D^{-1/2} with D the row sums of the symmetrized
/// matrix. Rows summing to zero stay zero.
inline WeightMatrix symmetrize_normalize(const WeightMatrix& W) {
  if ((W.entries.array() < 0.0).any())
    throw InputError("symmetrize_normalize: weights must be non-negative");
  Matrix S = 0.5 * (W.entries + W.entries.transpose());
  const Vector d = S.rowwise().sum();
  Vector inv_sqrt(d.size());
  for (Index i = 0; i < d.size(); ++i) inv_sqrt(i) = d(i) > 0.0 ? 1.0 / std::sqrt(d(i)) : 0.0;
  // inv_sqrt(i) * inv_sqrt(j) is formed first so the result stays exactly symmetric.
  for (Index j = 0; j < S.cols(); ++j)
    for (Index i = 0; i < S.rows(); ++i) S(i, j) *= inv_sqrt(i) * inv_sqrt(j);
  return {std::move(S), true};
}

// ---------------------------------------------------------------------------
// Export hooks for visual inspection of weight matrices.

inline void write_matrix_csv(std::ostream& os, const Eigen::Ref<const Matrix>& M) {
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (Index i = 0; i < M.rows(); ++i) {
    for (Index j = 0; j < M.cols(); ++j) {
      if (j) os << ',';
      os << M(i, j);
    }
    os << '\n';
  }
}

/// 8-bit binary PGM (P5), linear min-max scaling; a constant matrix maps to 0.
inline void write_matrix_pgm(std::ostream& os, const Eigen::Ref<const Matrix>& M) {
  const double lo = M.size() ? M.minCoeff() : 0.0;
  const double hi = M.size() ? M.maxCoeff() : 0.0;
  os << "P5\n" << M.cols() << ' ' << M.rows() << "\n255\n";
  for (Index i = 0; i < M.rows(); ++i)
    for (Index j = 0; j < M.cols(); ++j) {
      const double t = hi > lo ? (M(i, j) - lo) / (hi - lo) : 0.0;
      os.put(static_cast<char>(static_cast<std::uint8_t>(std::lround(255.0 * t))));
    }
}

inline void export_weights(const Eigen::Ref<const Matrix>& M, const std::string& csv_path,
                           const std::string& pgm_path) {
  if (!csv_path.empty()) {
    std::ofstream f(csv_path);
    if (!f) throw InputError("cannot open " + csv_path + " for writing");
    write_matrix_csv(f, M);
  }
  if (!pgm_path.empty()) {
    std::ofstream f(pgm_path, std::ios::binary);
    if (!f) throw InputError("cannot open " + pgm_path + " for writing");
    write_matrix_pgm(f, M);
  }
}

}  // namespace klp
