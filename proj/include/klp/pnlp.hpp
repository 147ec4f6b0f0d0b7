#pragma once

#include "klp/core.hpp"
#include "klp/graphs.hpp"
#include "klp/labels.hpp"
#include "klp/linalg.hpp"
#include "klp/soft_labels.hpp"

#include <limits>
#include <string>

namespace klp {

/// Positive-and-negative label propagation parameters.
struct PnlpConfig {
  double mu = 0.99;
  double mu1 = 1.0;
  double mu2 = 0.5;
  Index neighbors = 7;  // kNN graph size used by the harness

  void validate() const {
    if (!(mu > 0.0 && mu < 1.0)) throw InputError("pnlp: mu must lie in (0, 1)");
    if (mu1 < 0.0 || mu2 < 0.0) throw InputError("pnlp: mu1 and mu2 must be non-negative");
    // Equality is allowed; the solve then fails only if the graph has a
    // connected component without isolated nodes (I - S singular).
    if (mu * mu1 < mu * mu2) throw InputError("pnlp: requires mu*mu1 >= mu*mu2");
  }
};

/// Closed-form minimizer F* (c x N) of
///   1/2 tr(F L F^T) + mu/2 [mu1 |F - Y+|^2 - mu2 |F - Y-|^2]
/// with L = I - S and S the normalized weight matrix. Solved as
/// (L + (mu mu1 - mu mu2) I) F^T = (mu mu1 Y+ - mu mu2 Y-)^T.
inline SoftLabels pnlp_solve(const WeightMatrix& S, const LabelMatrices& labels,
                             const PnlpConfig& cfg) {
  cfg.validate();
  const Index n = S.entries.rows();
  if (S.entries.cols() != n || labels.samples() != n || labels.y_neg.cols() != n ||
      labels.y_neg.rows() != labels.classes())
    throw InputError("pnlp_solve: shape mismatch between graph and label matrices");
  const double a = cfg.mu * cfg.mu1;
  const double b = cfg.mu * cfg.mu2;
  // I - S has a zero eigenvalue on every component with an edge, so with
  // a == b the system is exactly singular. Rounding can hide that from the
  // condition estimate.
  if (a == b && (S.entries.array() != 0.0).any())
    throw SolverError("pnlp_solve: mu*mu1 = mu*mu2 makes the system singular on a graph with edges",
                      std::numeric_limits<double>::infinity());
  Matrix system = -S.entries;
  system.diagonal().array() += 1.0 + (a - b);
  const Matrix rhs = (a * labels.y_pos - b * labels.y_neg).transpose();
  Matrix Ft = solve_symmetric(system, rhs, "pnlp_solve");
  return decode(Ft.transpose());
}

}  // namespace klp
