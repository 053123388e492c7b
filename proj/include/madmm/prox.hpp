#pragma once

// Subproblem solvers for the x- and z-updates.

#include "madmm/linear_operator.hpp"

#include <optional>
#include <vector>

namespace madmm {

/// Solves Q x = rhs for symmetric positive definite Q by Cholesky.
/// Throws NumericalError naming the failing leading minor if Q is not SPD.
Vector solve_quadratic(const Matrix& q, const Vector& rhs);

struct CgConfig {
  int max_iters = 200;
  double rel_tol = 1e-7;
  bool warm_start = true;

  void validate() const;
};

struct CgResult {
  Vector solution;
  int iterations = 0;
  bool hit_max_iters = false;
  /// ||r_i|| / ||rhs|| for i = 0..iterations
  std::vector<double> residual_history;
};

/// Conjugate gradient on a self-adjoint PSD operator (only `forward` is used).
CgResult cg_solve(const LinearOperator& op, const Vector& rhs, const CgConfig& cfg,
                  const std::optional<Vector>& x0 = std::nullopt);

/// sign(v) * max(|v| - t, 0), componentwise.
Vector soft_threshold(const Vector& v, double t);

/// Per-group shrinkage v_p * max(1 - t / ||v_p||, 0). `v` holds `components`
/// planes of equal length; group p gathers entry p of every plane.
Vector group_soft_threshold(const Vector& v, double t, Index components = 2);

/// Sum over groups of ||v_p||_2 with the same plane layout.
double group_l21_norm(const Vector& v, Index components = 2);

/// Forward differences on a side x side row-major image with Neumann boundary.
/// Output is two planes: [d/drow ; d/dcol], each side*side long; the last
/// row (resp. column) difference is zero.
Vector grad_2d(const Vector& image, Index side);

/// Exact adjoint of grad_2d (negative divergence).
Vector grad_2d_adjoint(const Vector& field, Index side);

LinearOperator gradient_operator(Index side);

}  // namespace madmm
