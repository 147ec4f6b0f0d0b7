#pragma once

#include "klp/core.hpp"
#include "klp/kernel_lp.hpp"
#include "klp/kernels.hpp"
#include "klp/soft_labels.hpp"

#include <algorithm>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

namespace klp {

enum class InductiveScheme { map, recons };

inline std::string to_string(InductiveScheme s) { return s == InductiveScheme::map ? "map" : "recons"; }

inline InductiveScheme inductive_scheme_from_string(const std::string& name) {
  if (name == "map") return InductiveScheme::map;
  if (name == "recons") return InductiveScheme::recons;
  throw InputError("unknown inductive scheme '" + name + "' (expected map or recons)");
}

struct InductiveConfig {
  InductiveScheme scheme = InductiveScheme::map;
  Index k = 7;
  // Replaces the model's rbf width for the test-time cross-Gram only.
  std::optional<double> kernel_width_override;
};

namespace detail {

inline KernelSpec test_kernel(const TrainedModel& model, std::optional<double> width) {
  KernelSpec spec = model.kernel;
  if (width) {
    if (spec.kind != KernelKind::rbf) throw InputError("kernel width override requires an rbf model");
    spec.width = *width;
  }
  return spec;
}

inline void check_features(const TrainedModel& model, const Matrix& X_test) {
  if (X_test.rows() != model.features())
    throw InputError("test data has " + std::to_string(X_test.rows()) + " features, model expects " +
                     std::to_string(model.features()));
}

}  // namespace detail

/// Direct kernel mapping: F_new = Q*^T K(X, X_test).
inline SoftLabels predict_map(const TrainedModel& model, const Matrix& X_test,
                              std::optional<double> width_override = std::nullopt) {
  detail::check_features(model, X_test);
  const auto Kx = cross_gram(detail::test_kernel(model, width_override), model.X_train, X_test);
  return decode(model.Q_star.transpose() * Kx.entries);
}

/// Indices of the k largest entries of `kv`, larger first, ties to the lower index.
inline std::vector<Index> top_k(const Eigen::Ref<const Vector>& kv, Index k) {
  std::vector<Index> order(static_cast<size_t>(kv.size()));
  std::iota(order.begin(), order.end(), Index{0});
  std::partial_sort(order.begin(), order.begin() + k, order.end(), [&](Index a, Index b) {
    return kv(a) > kv(b) || (kv(a) == kv(b) && a < b);
  });
  order.resize(static_cast<size_t>(k));
  return order;
}

/// Kernel-induced label reconstruction: each test soft label is the
/// combination of the training soft labels of its k most similar training
/// samples, weighted by the normalized kernel sub-vector K(X_k, x)/|K(X_k, x)|.
inline SoftLabels predict_recons(const TrainedModel& model, const Matrix& X_test, Index k,
                                 std::optional<double> width_override = std::nullopt) {
  detail::check_features(model, X_test);
  const Index n = model.samples();
  if (k < 1 || k > n)
    throw InputError("predict_recons: k = " + std::to_string(k) + " outside [1, " +
                     std::to_string(n) + "]");
  const auto Kx = cross_gram(detail::test_kernel(model, width_override), model.X_train, X_test);
  const Matrix& F = model.F_train.entries;
  Matrix out(F.rows(), X_test.cols());
  Vector coef(k);
  for (Index j = 0; j < X_test.cols(); ++j) {
    const auto idx = top_k(Kx.entries.col(j), k);
    for (Index t = 0; t < k; ++t) coef(t) = Kx.entries(idx[static_cast<size_t>(t)], j);
    const double norm = coef.norm();
    if (!(norm > 0.0))
      throw DegenerateInputError("predict_recons: kernel vector of test sample " + std::to_string(j) +
                                 " is zero on its top-k set");
    coef /= norm;
    out.col(j).setZero();
    for (Index t = 0; t < k; ++t) out.col(j) += coef(t) * F.col(idx[static_cast<size_t>(t)]);
  }
  return decode(std::move(out));
}

inline SoftLabels predict(const TrainedModel& model, const Matrix& X_test, const InductiveConfig& cfg) {
  return cfg.scheme == InductiveScheme::map
             ? predict_map(model, X_test, cfg.kernel_width_override)
             : predict_recons(model, X_test, cfg.k, cfg.kernel_width_override);
}

}  // namespace klp
