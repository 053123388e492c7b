#include "madmm/prox.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <string>

namespace madmm {

Vector solve_quadratic(const Matrix& q, const Vector& rhs) {
  if (q.rows() != q.cols() || q.rows() != rhs.size()) throw StructuralError("solve_quadratic: shape mismatch");
  Eigen::LLT<Matrix> llt(q);
  if (llt.info() != Eigen::Success) {
    // Report the first leading minor that fails to factor.
    Index bad = q.rows();
    for (Index k = 1; k <= q.rows(); ++k) {
      Eigen::LLT<Matrix> lead(q.topLeftCorner(k, k));
      if (lead.info() != Eigen::Success) {
        bad = k;
        break;
      }
    }
    throw NumericalError("matrix is not positive definite: leading minor " + std::to_string(bad) + " of " +
                         std::to_string(q.rows()) + " failed");
  }
  return llt.solve(rhs);
}

void CgConfig::validate() const {
  if (max_iters < 1) throw StructuralError("CG max_iters must be positive");
  if (!(rel_tol > 0.0 && rel_tol < 1.0)) throw StructuralError("CG rel_tol must lie in (0, 1)");
}

CgResult cg_solve(const LinearOperator& op, const Vector& rhs, const CgConfig& cfg, const std::optional<Vector>& x0) {
  cfg.validate();
  if (op.in_dim() != op.out_dim() || op.in_dim() != rhs.size()) throw StructuralError("cg_solve: shape mismatch");

  CgResult out;
  out.solution = (cfg.warm_start && x0) ? *x0 : Vector::Zero(rhs.size());
  if (out.solution.size() != rhs.size()) throw StructuralError("cg_solve: warm start has wrong length");

  const double rhs_norm = rhs.norm();
  if (rhs_norm == 0.0) {
    out.solution.setZero();
    out.residual_history.push_back(0.0);
    return out;
  }

  Vector r = rhs - op.forward(out.solution);
  double rr = r.squaredNorm();
  out.residual_history.push_back(std::sqrt(rr) / rhs_norm);
  if (!std::isfinite(rr)) throw NumericalError("cg_solve: non-finite residual at iteration 0");
  if (std::sqrt(rr) <= cfg.rel_tol * rhs_norm) return out;

  Vector p = r;
  for (int it = 1; it <= cfg.max_iters; ++it) {
    const Vector ap = op.forward(p);
    const double pap = p.dot(ap);
    if (!std::isfinite(pap)) throw NumericalError("cg_solve: non-finite curvature at iteration " + std::to_string(it));
    if (pap <= 0.0) break;  // exhausted the range of a PSD operator
    const double alpha = rr / pap;
    out.solution += alpha * p;
    r -= alpha * ap;
    const double rr_new = r.squaredNorm();
    out.iterations = it;
    out.residual_history.push_back(std::sqrt(rr_new) / rhs_norm);
    if (!std::isfinite(rr_new)) throw NumericalError("cg_solve: non-finite residual at iteration " + std::to_string(it));
    if (std::sqrt(rr_new) <= cfg.rel_tol * rhs_norm) return out;
    p = r + (rr_new / rr) * p;
    rr = rr_new;
  }
  out.hit_max_iters = out.iterations == cfg.max_iters;
  return out;
}

Vector soft_threshold(const Vector& v, double t) {
  if (!(t > 0.0)) throw StructuralError("soft_threshold: threshold must be positive");
  return v.unaryExpr([t](double a) {
    const double mag = std::abs(a) - t;
    return mag > 0.0 ? std::copysign(mag, a) : 0.0;
  });
}

Vector group_soft_threshold(const Vector& v, double t, Index components) {
  if (!(t > 0.0)) throw StructuralError("group_soft_threshold: threshold must be positive");
  if (components < 1 || v.size() % components != 0) throw StructuralError("group_soft_threshold: bad plane layout");
  const Index len = v.size() / components;
  Vector out(v.size());
  for (Index p = 0; p < len; ++p) {
    double sq = 0.0;
    for (Index c = 0; c < components; ++c) sq += v[c * len + p] * v[c * len + p];
    const double norm = std::sqrt(sq);
    const double scale = norm > t ? 1.0 - t / norm : 0.0;
    for (Index c = 0; c < components; ++c) out[c * len + p] = scale * v[c * len + p];
  }
  return out;
}

double group_l21_norm(const Vector& v, Index components) {
  if (components < 1 || v.size() % components != 0) throw StructuralError("group_l21_norm: bad plane layout");
  const Index len = v.size() / components;
  double total = 0.0;
  for (Index p = 0; p < len; ++p) {
    double sq = 0.0;
    for (Index c = 0; c < components; ++c) sq += v[c * len + p] * v[c * len + p];
    total += std::sqrt(sq);
  }
  return total;
}

Vector grad_2d(const Vector& image, Index side) {
  if (side < 2 || image.size() != side * side) throw StructuralError("grad_2d: image must be side x side, side >= 2");
  const Index px = side * side;
  Vector out = Vector::Zero(2 * px);
  for (Index i = 0; i < side; ++i) {
    for (Index j = 0; j < side; ++j) {
      const Index at = i * side + j;
      if (i + 1 < side) out[at] = image[at + side] - image[at];
      if (j + 1 < side) out[px + at] = image[at + 1] - image[at];
    }
  }
  return out;
}

Vector grad_2d_adjoint(const Vector& field, Index side) {
  if (side < 2 || field.size() != 2 * side * side) throw StructuralError("grad_2d_adjoint: field must be 2 x side x side");
  const Index px = side * side;
  Vector out = Vector::Zero(px);
  for (Index i = 0; i < side; ++i) {
    for (Index j = 0; j < side; ++j) {
      const Index at = i * side + j;
      if (i + 1 < side) {
        out[at] -= field[at];
        out[at + side] += field[at];
      }
      if (j + 1 < side) {
        out[at] -= field[px + at];
        out[at + 1] += field[px + at];
      }
    }
  }
  return out;
}

LinearOperator gradient_operator(Index side) {
  if (side < 2) throw StructuralError("gradient_operator: side must be at least 2");
  return LinearOperator(
      side * side, 2 * side * side, [side](const Vector& u) { return grad_2d(u, side); },
      [side](const Vector& w) { return grad_2d_adjoint(w, side); });
}

}  // namespace madmm
