#pragma once

#include "klp/core.hpp"

#include <vector>

namespace klp {

/// c x N soft-label matrix plus its argmax decoding.
struct SoftLabels {
  Matrix entries;
  std::vector<int> hard;
};

/// Column-wise argmax; ties go to the lowest class index.
inline SoftLabels decode(Matrix F) {
  SoftLabels out;
  out.hard.resize(static_cast<size_t>(F.cols()), 0);
  for (Index j = 0; j < F.cols(); ++j) {
    int best = 0;
    for (Index i = 1; i < F.rows(); ++i)
      if (F(i, j) > F(best, j)) best = static_cast<int>(i);
    out.hard[static_cast<size_t>(j)] = best;
  }
  out.entries = std::move(F);
  return out;
}

/// Fraction of positions where predicted equals truth.
inline double accuracy(const std::vector<int>& predicted, const std::vector<int>& truth) {
  if (predicted.size() != truth.size()) throw InputError("accuracy: size mismatch");
  if (truth.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += predicted[i] == truth[i];
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

}  // namespace klp
