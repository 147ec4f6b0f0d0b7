#pragma once

#include "klp/core.hpp"
#include "klp/kernels.hpp"
#include "klp/labels.hpp"
#include "klp/linalg.hpp"
#include "klp/soft_labels.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace klp {

struct SolverConfig {
  double alpha = 1e3;
  double beta = 1e-1;
  double eps = 1e-5;  // stop when |Q_{t+1} - Q_t|_F <= eps
  int max_iter = 50;
  double row_norm_floor = 1e-8;
  double pos_confidence = 1e10;  // u+ for labeled samples, stands in for +inf
  double neg_confidence = 1.0;   // u- for labeled samples
  // The 1e10 label confidence alone puts ordinary Q-step systems at
  // condition estimates of 1e13..1e17 while the solves stay backward stable,
  // so by default only the backward-error check rejects a solve.
  double condition_limit = std::numeric_limits<double>::infinity();
  // Relative slack allowed before an objective increase is logged.
  double monotone_tolerance = 1e-8;
  // Re-evaluate increases with the unprojected W to tell whether the
  // projection caused them. Costs one extra N x N product per increase.
  bool explain_increases = true;

  void validate() const {
    if (!(alpha > 0.0)) throw InputError("solver: alpha must be positive");
    if (!(beta > 0.0)) throw InputError("solver: beta must be positive");
    if (!(eps > 0.0)) throw InputError("solver: eps must be positive");
    if (max_iter < 1) throw InputError("solver: max_iter must be >= 1");
    if (!(row_norm_floor > 0.0)) throw InputError("solver: row_norm_floor must be positive");
  }
};

/// One outer iteration of the alternating solver.
///
/// `surrogate_*` are objective values with the L2,1 term replaced by
/// beta tr(Q^T V_t Q) for the V_t used in that iteration's Q step; the
/// alternating scheme guarantees after <= before when W is not projected.
struct IterationTrace {
  double q_delta = 0.0;
  double objective = 0.0;
  double surrogate_before = 0.0;
  double surrogate_after = 0.0;
  // Only evaluated when surrogate_after exceeds surrogate_before.
  double surrogate_after_unprojected = 0.0;
  bool increased = false;
  bool explained_by_projection = false;
  double seconds = 0.0;
};

struct SolverState {
  Matrix Q;  // N x c projection classifier
  Vector v;  // diagonal of V
  Matrix W;  // N x N adaptive weights, >= 0, zero diagonal
  int iter = 0;
  std::vector<double> objective_history;
  std::vector<double> q_delta_history;
  std::vector<IterationTrace> trace;
};

// ---------------------------------------------------------------------------
// Norms and projections

/// Sum of row Euclidean norms.
inline double l21_norm(const Eigen::Ref<const Matrix>& A) {
  double s = 0.0;
  for (Index i = 0; i < A.rows(); ++i) s += A.row(i).norm();
  return s;
}

/// Clip to W >= 0 and zero the diagonal.
inline Matrix project_weights(Matrix W) {
  W = W.cwiseMax(0.0);
  W.diagonal().setZero();
  return W;
}

// ---------------------------------------------------------------------------
// Weight subproblem

/// Unconstrained minimizer (K + K^T Q Q^T K + I)^{-1}(K + K^T Q Q^T K),
/// solved directly by Cholesky.
inline Matrix solve_weights_unprojected(const Matrix& K, const Matrix& Q,
                                        double limit = kDefaultConditionLimit) {
  if (K.rows() != K.cols() || Q.rows() != K.rows())
    throw InputError("update_W: shape mismatch");
  const Matrix G = K.transpose() * Q;
  Matrix M = K;
  M.noalias() += G * G.transpose();
  Matrix system = M;
  system.diagonal().array() += 1.0;
  return solve_symmetric(system, M, "update_W", limit);
}

/// Adaptive weight update followed by the non-negativity / zero-diagonal
/// projection.
inline Matrix update_W(const Matrix& K, const Matrix& Q, double limit = kDefaultConditionLimit) {
  return project_weights(solve_weights_unprojected(K, Q, limit));
}

/// Repeated weight updates against one kernel matrix.
///
/// With P = (K + I)^{-1} factored once and G = K^T Q (N x c),
///   (K + G G^T + I)^{-1} = P - P G (I + G^T P G)^{-1} G^T P,
/// so each update costs O(N^2 c) instead of a fresh O(N^3) solve. K is
/// assumed symmetric positive semidefinite.
class WeightSolver {
 public:
  explicit WeightSolver(const Matrix& K) : K_(K) {
    if (K.rows() != K.cols()) throw InputError("update_W: kernel matrix is not square");
    Matrix system = K;
    system.diagonal().array() += 1.0;
    Eigen::LLT<Matrix> llt(system);
    if (llt.info() != Eigen::Success)
      throw SolverError("update_W: K + I is not positive definite (kernel matrix not PSD)",
                        std::numeric_limits<double>::infinity());
    P_ = llt.solve(Matrix::Identity(K.rows(), K.cols()));
    P_ = 0.5 * (P_ + P_.transpose());
  }

  Matrix unprojected(const Matrix& Q) const {
    const Matrix G = K_.transpose() * Q;
    const Matrix H = P_ * G;
    Matrix C = G.transpose() * H;
    C.diagonal().array() += 1.0;
    Eigen::LLT<Matrix> small(C);
    Matrix W = -P_;
    W.diagonal().array() += 1.0;
    W.noalias() += H * small.solve(H.transpose());
    return W;
  }

  Matrix projected(const Matrix& Q) const { return project_weights(unprojected(Q)); }

 private:
  Matrix K_;
  Matrix P_;
};

// ---------------------------------------------------------------------------
// Initialization and the Q / V updates

/// Q = 0, V = I and W_0 from the weight update at Q = 0, i.e. the projected
/// (K + I)^{-1} K.
inline SolverState init_state(const GramMatrix& K, Index classes, const SolverConfig& cfg = {}) {
  cfg.validate();
  const Index n = K.size();
  if (n == 0 || K.entries.cols() != n) throw InputError("init_state: kernel matrix must be square");
  if (classes < 1) throw InputError("init_state: need at least one class");
  SolverState s;
  s.Q = Matrix::Zero(n, classes);
  s.v = Vector::Ones(n);
  s.W = update_W(K.entries, s.Q, cfg.condition_limit);
  return s;
}

namespace detail {

inline void check_shapes(const Matrix& K, const Matrix& W, const Vector& v,
                         const LabelMatrices& labels, const ConfidenceWeights& conf) {
  const Index n = K.rows();
  if (K.cols() != n || W.rows() != n || W.cols() != n || v.size() != n ||
      labels.samples() != n || labels.y_neg.cols() != n || conf.u_pos.size() != n ||
      conf.u_neg.size() != n)
    throw InputError("kernel_lp: inconsistent shapes");
}

// Samples that carry any label information.
inline std::vector<Index> supervised_indices(const ConfidenceWeights& conf) {
  std::vector<Index> idx;
  for (Index j = 0; j < conf.u_pos.size(); ++j)
    if (conf.u_pos(j) != 0.0 || conf.u_neg(j) != 0.0) idx.push_back(j);
  return idx;
}

// Q-step given B = K (I - W):
//   (K (U1 - U2) K^T + alpha B B^T + beta V) Q = K (U1 Y+^T - U2 Y-^T).
inline Matrix solve_q(const Matrix& K, const Matrix& B, const Vector& v,
                      const LabelMatrices& labels, const ConfidenceWeights& conf,
                      const SolverConfig& cfg) {
  const Index n = K.rows();
  const Index c = labels.classes();
  const auto idx = supervised_indices(conf);
  const Index m = static_cast<Index>(idx.size());

  Matrix Ks(n, m);
  Vector du(m);
  Matrix T(m, c);  // rows of U1 Y+^T - U2 Y-^T for the supervised samples
  for (Index t = 0; t < m; ++t) {
    const Index j = idx[static_cast<size_t>(t)];
    Ks.col(t) = K.col(j);
    du(t) = conf.u_pos(j) - conf.u_neg(j);
    T.row(t) = conf.u_pos(j) * labels.y_pos.col(j).transpose() -
               conf.u_neg(j) * labels.y_neg.col(j).transpose();
  }

  Matrix lower = Matrix::Zero(n, n);
  lower.selfadjointView<Eigen::Lower>().rankUpdate(B, cfg.alpha);
  Matrix A = lower.selfadjointView<Eigen::Lower>();
  A.noalias() += Ks * du.asDiagonal() * Ks.transpose();
  A.diagonal() += cfg.beta * v;
  const Matrix rhs = Ks * T;
  if (rhs.squaredNorm() == 0.0) return Matrix::Zero(n, c);
  try {
    return solve_symmetric(A, rhs, "update_Q", cfg.condition_limit);
  } catch (const SolverError& e) {
    throw SolverError(std::string(e.what()) + "; a larger beta restores definiteness", e.condition());
  }
}

struct ObjectiveParts {
  double label = 0.0;           // positive minus negative fit
  double reconstruction = 0.0;  // |phi(X) - phi(X) W|_F^2 via the trace identity
  double smoothness = 0.0;      // |Q^T K - Q^T K W|_F^2
  double weight = 0.0;          // |W|_F^2
};

inline ObjectiveParts objective_parts(const Matrix& K, const Matrix& KW, const Matrix& Q,
                                      const Matrix& W, const LabelMatrices& labels,
                                      const ConfidenceWeights& conf) {
  ObjectiveParts p;
  const Matrix F = Q.transpose() * K;
  for (Index j = 0; j < F.cols(); ++j) {
    if (conf.u_pos(j) != 0.0) p.label += conf.u_pos(j) * (F.col(j) - labels.y_pos.col(j)).squaredNorm();
    if (conf.u_neg(j) != 0.0) p.label -= conf.u_neg(j) * (F.col(j) - labels.y_neg.col(j)).squaredNorm();
  }
  // tr(K - KW - W^T K + W^T K W)
  p.reconstruction = K.trace() - 2.0 * KW.trace() + (W.array() * KW.array()).sum();
  p.smoothness = (F - F * W).squaredNorm();
  p.weight = W.squaredNorm();
  return p;
}

inline double combine(const ObjectiveParts& p, double alpha, double beta, double penalty) {
  return p.label + alpha * (p.reconstruction + p.smoothness + p.weight) + beta * penalty;
}

inline double quadratic_penalty(const Matrix& Q, const Vector& v) {
  return (Q.array().square().colwise() * v.array()).sum();
}

}  // namespace detail

/// Q = (K U1 K^T - K U2 K^T + alpha K L K^T + beta V)^{-1}(K U1 Y+^T - K U2 Y-^T)
/// with L = (I - W)(I - W)^T.
inline Matrix update_Q(const GramMatrix& K, const Matrix& W, const Vector& v,
                       const LabelMatrices& labels, const ConfidenceWeights& conf,
                       const SolverConfig& cfg) {
  cfg.validate();
  detail::check_shapes(K.entries, W, v, labels, conf);
  if ((v.array() <= 0.0).any()) throw InputError("update_Q: V must be positive");
  Matrix B = K.entries;
  B.noalias() -= K.entries * W;
  return detail::solve_q(K.entries, B, v, labels, conf, cfg);
}

/// v_ii = 1 / (2 max(|q^i|, floor)).
inline Vector update_V(const Eigen::Ref<const Matrix>& Q, double floor) {
  if (!(floor > 0.0)) throw InputError("update_V: floor must be positive");
  Vector v(Q.rows());
  for (Index i = 0; i < Q.rows(); ++i) v(i) = 1.0 / (2.0 * std::max(Q.row(i).norm(), floor));
  return v;
}

/// Full objective with the beta |Q|_{2,1} penalty. When `v_fixed` is given,
/// the penalty is replaced by beta tr(Q^T V Q) instead.
inline double objective(const GramMatrix& K, const Matrix& Q, const Matrix& W,
                        const Vector* v_fixed, const LabelMatrices& labels,
                        const ConfidenceWeights& conf, const SolverConfig& cfg) {
  const Vector ones = Vector::Ones(K.size());
  detail::check_shapes(K.entries, W, v_fixed ? *v_fixed : ones, labels, conf);
  const Matrix KW = K.entries * W;
  const auto parts = detail::objective_parts(K.entries, KW, Q, W, labels, conf);
  const double penalty = v_fixed ? detail::quadratic_penalty(Q, *v_fixed) : l21_norm(Q);
  return detail::combine(parts, cfg.alpha, cfg.beta, penalty);
}

// ---------------------------------------------------------------------------
// Training

struct TrainedModel {
  Matrix Q_star;
  KernelSpec kernel;
  Matrix X_train;  // n x N
  GramMatrix K_train;
  SoftLabels F_train;
  Matrix W;  // final adaptive weights
  SolverConfig config;
  bool converged = false;
  int iterations = 0;
  std::vector<double> objective_history;
  std::vector<double> q_delta_history;
  std::vector<IterationTrace> trace;
  std::vector<std::string> warnings;

  Index classes() const { return Q_star.cols(); }
  Index samples() const { return Q_star.rows(); }
  Index features() const { return X_train.rows(); }
};

/// Alternating Q -> V -> W updates until |Q_{t+1} - Q_t|_F <= eps or
/// max_iter. Hitting max_iter is not an error; the model is flagged.
inline TrainedModel fit(const Matrix& X, const LabelSet& labels, const KernelSpec& kernel,
                        const SolverConfig& cfg = {}) {
  using Clock = std::chrono::steady_clock;
  cfg.validate();
  labels.validate();
  if (labels.size() != X.cols())
    throw InputError("fit: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(X.cols()) + " samples");
  if (labels.labeled_count() == 0) throw InputError("fit: at least one labeled sample is required");

  TrainedModel model;
  model.kernel = kernel;
  model.X_train = X;
  model.config = cfg;
  const auto hist = labels.class_histogram();
  for (size_t k = 0; k < hist.size(); ++k)
    if (hist[k] == 0) model.warnings.push_back("class " + std::to_string(k) + " has no labeled samples");

  model.K_train = gram(kernel, X);
  const Matrix& K = model.K_train.entries;
  const auto Y = encode_labels(labels);
  const auto conf = build_confidence(labels, cfg.pos_confidence, cfg.neg_confidence);

  WeightSolver weights(K);
  SolverState s;
  s.Q = Matrix::Zero(K.rows(), labels.class_count);
  s.v = Vector::Ones(K.rows());
  s.W = weights.projected(s.Q);
  Matrix KW = K * s.W;
  s.objective_history.push_back(
      detail::combine(detail::objective_parts(K, KW, s.Q, s.W, Y, conf), cfg.alpha, cfg.beta,
                      l21_norm(s.Q)));

  bool converged = false;
  while (s.iter < cfg.max_iter) {
    const auto t0 = Clock::now();
    IterationTrace tr;
    const auto parts_before = detail::objective_parts(K, KW, s.Q, s.W, Y, conf);
    tr.surrogate_before = detail::combine(parts_before, cfg.alpha, cfg.beta,
                                          detail::quadratic_penalty(s.Q, s.v));

    Matrix Q_next = detail::solve_q(K, K - KW, s.v, Y, conf, cfg);
    Vector v_next = update_V(Q_next, cfg.row_norm_floor);
    Matrix W_raw = weights.unprojected(Q_next);
    Matrix W_next = project_weights(W_raw);
    Matrix KW_next = K * W_next;

    const auto parts_after = detail::objective_parts(K, KW_next, Q_next, W_next, Y, conf);
    tr.surrogate_after = detail::combine(parts_after, cfg.alpha, cfg.beta,
                                         detail::quadratic_penalty(Q_next, s.v));
    const double slack = cfg.monotone_tolerance * std::abs(tr.surrogate_before);
    tr.increased = tr.surrogate_after > tr.surrogate_before + slack;
    if (tr.increased && cfg.explain_increases) {
      const Matrix KW_raw = K * W_raw;
      tr.surrogate_after_unprojected =
          detail::combine(detail::objective_parts(K, KW_raw, Q_next, W_raw, Y, conf), cfg.alpha,
                          cfg.beta, detail::quadratic_penalty(Q_next, s.v));
      tr.explained_by_projection = tr.surrogate_after_unprojected <= tr.surrogate_before + slack;
    }
    tr.objective = detail::combine(parts_after, cfg.alpha, cfg.beta, l21_norm(Q_next));
    tr.q_delta = (Q_next - s.Q).norm();

    s.Q = std::move(Q_next);
    s.v = std::move(v_next);
    s.W = std::move(W_next);
    KW = std::move(KW_next);
    ++s.iter;
    tr.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    s.objective_history.push_back(tr.objective);
    s.q_delta_history.push_back(tr.q_delta);
    s.trace.push_back(tr);
    if (tr.q_delta <= cfg.eps) {
      converged = true;
      break;
    }
  }

  model.F_train = decode(s.Q.transpose() * K);
  model.Q_star = std::move(s.Q);
  model.W = std::move(s.W);
  model.converged = converged;
  model.iterations = s.iter;
  model.objective_history = std::move(s.objective_history);
  model.q_delta_history = std::move(s.q_delta_history);
  model.trace = std::move(s.trace);
  return model;
}

}  // namespace klp
