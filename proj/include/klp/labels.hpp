#pragma once

#include "klp/core.hpp"

#include <string>
#include <utility>
#include <vector>

namespace klp {

/// Partial ground truth over N samples.
///
/// `assignments[j]` is a class index in [0, class_count) or kUnlabeled.
/// `negatives` holds extra "sample j is not in class k" facts for samples
/// whose positive class is unknown.
struct LabelSet {
  static constexpr int kUnlabeled = -1;

  std::vector<int> assignments;
  int class_count = 2;
  std::vector<std::pair<Index, int>> negatives;

  Index size() const { return static_cast<Index>(assignments.size()); }
  bool is_labeled(Index j) const { return assignments[static_cast<size_t>(j)] != kUnlabeled; }

  Index labeled_count() const {
    Index n = 0;
    for (int a : assignments) n += (a != kUnlabeled);
    return n;
  }

  /// Per-class labeled counts; a zero entry is worth a warning upstream.
  std::vector<Index> class_histogram() const {
    std::vector<Index> h(static_cast<size_t>(std::max(class_count, 0)), 0);
    for (int a : assignments)
      if (a >= 0 && a < class_count) ++h[static_cast<size_t>(a)];
    return h;
  }

  void validate() const {
    if (class_count < 1) throw InputError("class_count must be >= 1");
    for (size_t j = 0; j < assignments.size(); ++j) {
      const int a = assignments[j];
      if (a != kUnlabeled && (a < 0 || a >= class_count))
        throw InputError("label " + std::to_string(a) + " of sample " + std::to_string(j) +
                         " is outside [0, " + std::to_string(class_count) + ")");
    }
    for (const auto& [j, k] : negatives) {
      if (j < 0 || j >= size()) throw InputError("negative label refers to unknown sample");
      if (k < 0 || k >= class_count) throw InputError("negative label class out of range");
    }
  }
};

/// Binary c x N positive (Y+) and negative (Y-) label matrices.
struct LabelMatrices {
  Matrix y_pos;
  Matrix y_neg;

  Index classes() const { return y_pos.rows(); }
  Index samples() const { return y_pos.cols(); }
};

/// Diagonal confidence weights, stored as their diagonals.
struct ConfidenceWeights {
  Vector u_pos;
  Vector u_neg;
};

/// A labeled sample gets a 1 in its class row of Y+ and 1s in every other
/// row of Y-. Negative-only facts set single entries of Y-.
inline LabelMatrices encode_labels(const LabelSet& labels) {
  labels.validate();
  const Index c = labels.class_count;
  const Index n = labels.size();
  LabelMatrices out{Matrix::Zero(c, n), Matrix::Zero(c, n)};
  for (Index j = 0; j < n; ++j) {
    const int a = labels.assignments[static_cast<size_t>(j)];
    if (a == LabelSet::kUnlabeled) continue;
    out.y_pos(a, j) = 1.0;
    for (Index i = 0; i < c; ++i)
      if (i != a) out.y_neg(i, j) = 1.0;
  }
  for (const auto& [j, k] : labels.negatives)
    if (out.y_pos(k, j) == 0.0) out.y_neg(k, j) = 1.0;
  return out;
}

/// u+ = pos_labeled / u- = neg_labeled on labeled samples, 0 elsewhere.
/// Samples that only carry negative facts get (0, neg_labeled).
inline ConfidenceWeights build_confidence(const LabelSet& labels, double pos_labeled = 1e10,
                                          double neg_labeled = 1.0) {
  labels.validate();
  if (pos_labeled < 0.0 || neg_labeled < 0.0)
    throw InputError("confidence weights must be non-negative");
  if (pos_labeled < neg_labeled)
    throw InputError("positive confidence must be >= negative confidence");
  const Index n = labels.size();
  ConfidenceWeights w{Vector::Zero(n), Vector::Zero(n)};
  for (Index j = 0; j < n; ++j) {
    if (!labels.is_labeled(j)) continue;
    w.u_pos(j) = pos_labeled;
    w.u_neg(j) = neg_labeled;
  }
  for (const auto& [j, k] : labels.negatives)
    if (!labels.is_labeled(j)) w.u_neg(j) = neg_labeled;
  return w;
}

}  // namespace klp
