#pragma once

#include "klp/core.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <limits>
#include <string>

namespace klp {

enum class KernelKind { rbf, linear, quadratic, polynomial };

inline std::string to_string(KernelKind kind) {
  switch (kind) {
    case KernelKind::rbf: return "rbf";
    case KernelKind::linear: return "linear";
    case KernelKind::quadratic: return "quadratic";
    case KernelKind::polynomial: return "polynomial";
  }
  return "unknown";
}

inline KernelKind kernel_kind_from_string(const std::string& name) {
  if (name == "rbf" || name == "gaussian") return KernelKind::rbf;
  if (name == "linear") return KernelKind::linear;
  if (name == "quadratic") return KernelKind::quadratic;
  if (name == "polynomial") return KernelKind::polynomial;
  throw InputError("unknown kernel kind '" + name + "'");
}

/// Kernel function description.
///
/// rbf:        exp(-|x-y|^2 / (2 width^2))
/// linear:     x.y
/// quadratic:  (x.y + 1)^2
/// polynomial: (x.y + offset)^degree
struct KernelSpec {
  KernelKind kind = KernelKind::rbf;
  double width = 1e3;
  int degree = 3;
  double offset = 1.0;

  static KernelSpec rbf(double width) { return {KernelKind::rbf, width, 3, 1.0}; }
  static KernelSpec linear() { return {KernelKind::linear, 1.0, 1, 0.0}; }
  static KernelSpec quadratic() { return {KernelKind::quadratic, 1.0, 2, 1.0}; }
  static KernelSpec polynomial(int degree, double offset) {
    return {KernelKind::polynomial, 1.0, degree, offset};
  }

  void validate() const {
    if (kind == KernelKind::rbf && !(width > 0.0 && std::isfinite(width)))
      throw InputError("rbf kernel width must be positive, got " + std::to_string(width));
    if (kind == KernelKind::polynomial && degree < 1)
      throw InputError("polynomial kernel degree must be >= 1, got " + std::to_string(degree));
  }

  bool operator==(const KernelSpec&) const = default;
};

inline void to_json(nlohmann::json& j, const KernelSpec& spec) {
  j = nlohmann::json{{"kind", to_string(spec.kind)}};
  if (spec.kind == KernelKind::rbf) j["width"] = spec.width;
  if (spec.kind == KernelKind::polynomial) {
    j["degree"] = spec.degree;
    j["offset"] = spec.offset;
  }
}

inline void from_json(const nlohmann::json& j, KernelSpec& spec) {
  const auto kind = kernel_kind_from_string(j.at("kind").get<std::string>());
  switch (kind) {
    case KernelKind::rbf: spec = KernelSpec::rbf(j.value("width", 1e3)); break;
    case KernelKind::linear: spec = KernelSpec::linear(); break;
    case KernelKind::quadratic: spec = KernelSpec::quadratic(); break;
    case KernelKind::polynomial:
      spec = KernelSpec::polynomial(j.value("degree", 3), j.value("offset", 1.0));
      break;
  }
  spec.validate();
}

namespace detail {

inline double apply_kernel(const KernelSpec& spec, double sq_dist, double dot) {
  switch (spec.kind) {
    case KernelKind::rbf: return std::exp(-sq_dist / (2.0 * spec.width * spec.width));
    case KernelKind::linear: return dot;
    case KernelKind::quadratic: return (dot + 1.0) * (dot + 1.0);
    case KernelKind::polynomial: return std::pow(dot + spec.offset, spec.degree);
  }
  return 0.0;
}

// Columns of `a` against columns of `b`: returns (inner products, squared
// distances), distances via |x|^2 + |y|^2 - 2 x.y clamped at zero. Values
// below the cancellation error of that formula are snapped to zero so a
// point compared with itself gets distance 0 on every path.
inline std::pair<Matrix, Matrix> pairwise(const Eigen::Ref<const Matrix>& a,
                                          const Eigen::Ref<const Matrix>& b) {
  Matrix dots = a.transpose() * b;
  const Vector na = a.colwise().squaredNorm().transpose();
  const Vector nb = b.colwise().squaredNorm().transpose();
  Matrix sq(dots.rows(), dots.cols());
  for (Index j = 0; j < dots.cols(); ++j)
    for (Index i = 0; i < dots.rows(); ++i) {
      const double d = na(i) + nb(j) - 2.0 * dots(i, j);
      sq(i, j) = d <= 8.0 * std::numeric_limits<double>::epsilon() * (na(i) + nb(j)) ? 0.0 : d;
    }
  return {std::move(dots), std::move(sq)};
}

}  // namespace detail

/// Single kernel evaluation K(x, y).
inline double kernel_eval(const KernelSpec& spec, const Eigen::Ref<const Vector>& x,
                          const Eigen::Ref<const Vector>& y) {
  if (x.size() != y.size())
    throw InputError("kernel_eval: dimension mismatch (" + std::to_string(x.size()) + " vs " +
                     std::to_string(y.size()) + ")");
  spec.validate();
  return detail::apply_kernel(spec, (x - y).squaredNorm(), x.dot(y));
}

/// Symmetric N x N kernel matrix over the columns of X (n x N).
struct GramMatrix {
  Matrix entries;
  KernelSpec spec;

  Index size() const { return entries.rows(); }
};

/// N x M kernel matrix between training columns and test columns.
struct CrossGram {
  Matrix entries;
  KernelSpec spec;
};

inline GramMatrix gram(const KernelSpec& spec, const Eigen::Ref<const Matrix>& X) {
  spec.validate();
  if (X.cols() == 0) throw InputError("gram: empty dataset");
  const auto [dots, sq] = detail::pairwise(X, X);
  const Index n = X.cols();
  Matrix K(n, n);
  // Lower triangle is computed once and mirrored so K is exactly symmetric.
  for (Index j = 0; j < n; ++j) {
    K(j, j) = detail::apply_kernel(spec, 0.0, dots(j, j));
    for (Index i = j + 1; i < n; ++i) {
      K(i, j) = detail::apply_kernel(spec, sq(i, j), dots(i, j));
      K(j, i) = K(i, j);
    }
  }
  return {std::move(K), spec};
}

inline CrossGram cross_gram(const KernelSpec& spec, const Eigen::Ref<const Matrix>& X,
                            const Eigen::Ref<const Matrix>& X_test) {
  spec.validate();
  if (X.rows() != X_test.rows())
    throw InputError("cross_gram: feature dimension mismatch (" + std::to_string(X.rows()) +
                     " vs " + std::to_string(X_test.rows()) + ")");
  const auto [dots, sq] = detail::pairwise(X, X_test);
  Matrix K(dots.rows(), dots.cols());
  for (Index j = 0; j < K.cols(); ++j)
    for (Index i = 0; i < K.rows(); ++i) K(i, j) = detail::apply_kernel(spec, sq(i, j), dots(i, j));
  return {std::move(K), spec};
}

}  // namespace klp
