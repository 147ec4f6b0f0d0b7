#pragma once

#include "klp/core.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <string>

namespace klp {

/// Largest condition estimate a dense solve accepts before reporting failure.
inline constexpr double kDefaultConditionLimit = 1e14;

/// Normwise backward error above which a solve is rejected regardless of
/// the condition estimate.
inline constexpr double kBackwardErrorLimit = 1e-10;

/// Relative diagonal shift for the Cholesky retry (the equilibrated
/// system has a unit diagonal).
inline constexpr double kCholeskyShift = 1e-13;

struct SolveInfo {
  double condition = 1.0;  // 1-norm estimate of the equilibrated system
  double backward_error = 0.0;
  const char* method = "llt";
};

/// Solves A X = B for symmetric A that is usually positive definite but may
/// be indefinite. The system is Jacobi-equilibrated when its diagonal is
/// positive; Cholesky is tried first, then pivoted LDL^T, then partial-pivot
/// LU. Throws SolverError when the condition estimate exceeds `limit` or the
/// backward error |A X - B| / (|A| |X| + |B|) exceeds kBackwardErrorLimit.
inline Matrix solve_symmetric(const Matrix& A, const Matrix& B, const std::string& context,
                              double limit = kDefaultConditionLimit, SolveInfo* info = nullptr) {
  const Index n = A.rows();
  if (A.cols() != n || B.rows() != n) throw InputError(context + ": shape mismatch");
  if (n == 0) return Matrix(0, B.cols());

  Vector scale = Vector::Ones(n);
  const Vector diag = A.diagonal();
  if ((diag.array() > 0.0).all()) scale = diag.cwiseSqrt().cwiseInverse();
  const Matrix As = scale.asDiagonal() * A * scale.asDiagonal();
  const Matrix Bs = scale.asDiagonal() * B;

  SolveInfo local;
  Matrix Y;
  double rcond = 0.0;
  Eigen::LLT<Matrix> llt(As);
  if (llt.info() != Eigen::Success && (diag.array() > 0.0).all()) {
    // Rounding can break Cholesky on SPD systems near 1/epsilon condition.
    // A shift of this size is far below the backward-error limit checked
    // below.
    Matrix shifted = As;
    shifted.diagonal().array() += kCholeskyShift;
    llt.compute(shifted);
  }
  if (llt.info() == Eigen::Success) {
    rcond = llt.rcond();
    Y = llt.solve(Bs);
    local.method = "llt";
  } else {
    Eigen::LDLT<Matrix> ldlt(As);
    if (ldlt.info() == Eigen::Success && ldlt.rcond() > 0.0) {
      rcond = ldlt.rcond();
      Y = ldlt.solve(Bs);
      local.method = "ldlt";
    } else {
      Eigen::PartialPivLU<Matrix> lu(As);
      rcond = lu.rcond();
      Y = lu.solve(Bs);
      local.method = "lu";
    }
  }
  local.condition = rcond > 0.0 ? 1.0 / rcond : std::numeric_limits<double>::infinity();
  if (Y.allFinite()) {
    const double denom = As.norm() * Y.norm() + Bs.norm();
    local.backward_error = denom > 0.0 ? (As * Y - Bs).norm() / denom : 0.0;
  } else {
    local.backward_error = std::numeric_limits<double>::infinity();
  }
  if (info) *info = local;
  if (!(local.condition <= limit) || !(local.backward_error <= kBackwardErrorLimit)) {
    std::ostringstream msg;
    msg << context << ": system matrix is numerically singular (condition estimate "
        << local.condition << ", limit " << limit << ", backward error " << local.backward_error
        << ")";
    throw SolverError(msg.str(), local.condition);
  }
  return scale.asDiagonal() * Y;
}

}  // namespace klp
