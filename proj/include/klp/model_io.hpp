#pragma once

#include "klp/kernel_lp.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

namespace klp {

inline constexpr int kModelFormatVersion = 1;

inline void to_json(nlohmann::json& j, const SolverConfig& c) {
  j = nlohmann::json{{"alpha", c.alpha},
                     {"beta", c.beta},
                     {"eps", c.eps},
                     {"max_iter", c.max_iter},
                     {"row_norm_floor", c.row_norm_floor},
                     {"pos_confidence", c.pos_confidence},
                     {"neg_confidence", c.neg_confidence},
                     {"monotone_tolerance", c.monotone_tolerance}};
  // JSON has no infinity; null means "no limit".
  j["condition_limit"] = std::isfinite(c.condition_limit) ? nlohmann::json(c.condition_limit) : nlohmann::json();
}

// Missing keys keep their defaults so partial configs are accepted.
inline void from_json(const nlohmann::json& j, SolverConfig& c) {
  c.alpha = j.value("alpha", c.alpha);
  c.beta = j.value("beta", c.beta);
  c.eps = j.value("eps", c.eps);
  c.max_iter = j.value("max_iter", c.max_iter);
  c.row_norm_floor = j.value("row_norm_floor", c.row_norm_floor);
  c.pos_confidence = j.value("pos_confidence", c.pos_confidence);
  c.neg_confidence = j.value("neg_confidence", c.neg_confidence);
  if (j.contains("condition_limit"))
    c.condition_limit = j.at("condition_limit").is_null() ? std::numeric_limits<double>::infinity()
                                                          : j.at("condition_limit").get<double>();
  c.monotone_tolerance = j.value("monotone_tolerance", c.monotone_tolerance);
  c.validate();
}

namespace detail {

// Row-major flattening of a (rows x cols) matrix.
inline std::vector<double> flatten_rows(const Matrix& M) {
  std::vector<double> out(static_cast<size_t>(M.size()));
  size_t p = 0;
  for (Index i = 0; i < M.rows(); ++i)
    for (Index j = 0; j < M.cols(); ++j) out[p++] = M(i, j);
  return out;
}

inline Matrix unflatten_rows(const nlohmann::json& arr, Index rows, Index cols, const char* what) {
  const auto v = arr.get<std::vector<double>>();
  if (static_cast<Index>(v.size()) != rows * cols)
    throw InputError(std::string("model archive: '") + what + "' has wrong length");
  Matrix M(rows, cols);
  size_t p = 0;
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) M(i, j) = v[p++];
  return M;
}

}  // namespace detail

/// JSON archive. `x_train` is the N x n sample table in row-major order
/// (one sample after another); `q_star` is N x c and `weights` N x N, both
/// row-major.
inline nlohmann::json model_to_json(const TrainedModel& m, bool include_weights = true) {
  nlohmann::json j;
  j["format"] = "klp-model";
  j["version"] = kModelFormatVersion;
  j["kernel"] = m.kernel;
  j["classes"] = m.classes();
  j["samples"] = m.samples();
  j["features"] = m.features();
  j["config"] = m.config;
  j["converged"] = m.converged;
  j["iterations"] = m.iterations;
  j["x_train"] = detail::flatten_rows(m.X_train.transpose());
  j["q_star"] = detail::flatten_rows(m.Q_star);
  if (include_weights && m.W.size() > 0) j["weights"] = detail::flatten_rows(m.W);
  j["objective_history"] = m.objective_history;
  j["q_delta_history"] = m.q_delta_history;
  return j;
}

/// Rebuilds a model; the Gram matrix and training soft labels are recomputed.
inline TrainedModel model_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "klp-model") throw InputError("not a klp model archive");
  if (j.value("version", 0) != kModelFormatVersion) throw InputError("unsupported model archive version");
  TrainedModel m;
  m.kernel = j.at("kernel").get<KernelSpec>();
  m.config = j.at("config").get<SolverConfig>();
  const Index c = j.at("classes").get<Index>();
  const Index n_samples = j.at("samples").get<Index>();
  const Index n_features = j.at("features").get<Index>();
  m.X_train = detail::unflatten_rows(j.at("x_train"), n_samples, n_features, "x_train").transpose();
  m.Q_star = detail::unflatten_rows(j.at("q_star"), n_samples, c, "q_star");
  if (j.contains("weights")) m.W = detail::unflatten_rows(j.at("weights"), n_samples, n_samples, "weights");
  m.converged = j.value("converged", false);
  m.iterations = j.value("iterations", 0);
  m.objective_history = j.value("objective_history", std::vector<double>{});
  m.q_delta_history = j.value("q_delta_history", std::vector<double>{});
  m.K_train = gram(m.kernel, m.X_train);
  m.F_train = decode(m.Q_star.transpose() * m.K_train.entries);
  return m;
}

inline void save_model(const TrainedModel& m, const std::string& path, bool include_weights = true) {
  std::ofstream f(path);
  if (!f) throw InputError("cannot open " + path + " for writing");
  f << model_to_json(m, include_weights).dump();
}

inline TrainedModel load_model(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw InputError("cannot open model archive " + path);
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError("model archive " + path + " is not valid JSON: " + e.what());
  }
  return model_from_json(j);
}

}  // namespace klp
