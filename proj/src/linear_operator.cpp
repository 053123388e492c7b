#include "madmm/linear_operator.hpp"

#include <cmath>
#include <random>

namespace madmm {

LinearOperator::LinearOperator(Matrix dense)
    : in_dim_(dense.cols()),
      out_dim_(dense.rows()),
      dense_(std::make_shared<const Matrix>(std::move(dense))) {}

LinearOperator::LinearOperator(SparseMatrix sparse)
    : in_dim_(sparse.cols()),
      out_dim_(sparse.rows()),
      sparse_(std::make_shared<const SparseMatrix>(std::move(sparse))) {}

LinearOperator::LinearOperator(Index in_dim, Index out_dim, Apply forward, Apply adjoint)
    : in_dim_(in_dim), out_dim_(out_dim), forward_(std::move(forward)), adjoint_(std::move(adjoint)) {
  if (in_dim <= 0 || out_dim <= 0) throw StructuralError("linear operator dimensions must be positive");
  if (!forward_ || !adjoint_) throw StructuralError("linear operator needs both forward and adjoint");
}

LinearOperator LinearOperator::scaled_identity(Index dim, double scale) {
  return LinearOperator(
      dim, dim, [scale](const Vector& u) -> Vector { return scale * u; },
      [scale](const Vector& v) -> Vector { return scale * v; });
}

Vector LinearOperator::forward(const Vector& u) const {
  if (u.size() != in_dim_) {
    throw StructuralError("operator input has length " + std::to_string(u.size()) + ", expected " +
                          std::to_string(in_dim_));
  }
  if (dense_) return *dense_ * u;
  if (sparse_) return *sparse_ * u;
  return forward_(u);
}

Vector LinearOperator::adjoint(const Vector& v) const {
  if (v.size() != out_dim_) {
    throw StructuralError("operator adjoint input has length " + std::to_string(v.size()) + ", expected " +
                          std::to_string(out_dim_));
  }
  if (dense_) return dense_->transpose() * v;
  if (sparse_) return sparse_->transpose() * v;
  return adjoint_(v);
}

const Matrix& LinearOperator::dense() const {
  if (!dense_) throw StructuralError("operator is not stored densely");
  return *dense_;
}

const SparseMatrix& LinearOperator::sparse() const {
  if (!sparse_) throw StructuralError("operator is not stored sparsely");
  return *sparse_;
}

Matrix LinearOperator::to_dense() const {
  if (dense_) return *dense_;
  if (sparse_) return Matrix(*sparse_);
  Matrix out(out_dim_, in_dim_);
  Vector e = Vector::Zero(in_dim_);
  for (Index col = 0; col < in_dim_; ++col) {
    e[col] = 1.0;
    out.col(col) = forward_(e);
    e[col] = 0.0;
  }
  return out;
}

LinearOperator LinearOperator::scaled(double s) const {
  if (dense_) return LinearOperator(Matrix(s * *dense_));
  if (sparse_) return LinearOperator(SparseMatrix(s * *sparse_));
  auto fwd = forward_;
  auto adj = adjoint_;
  return LinearOperator(
      in_dim_, out_dim_, [fwd, s](const Vector& u) -> Vector { return s * fwd(u); },
      [adj, s](const Vector& v) -> Vector { return s * adj(v); });
}

double adjoint_mismatch(const LinearOperator& op, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Vector u(op.in_dim());
  Vector v(op.out_dim());
  for (Index i = 0; i < u.size(); ++i) u[i] = normal(rng);
  for (Index i = 0; i < v.size(); ++i) v[i] = normal(rng);
  const Vector fu = op.forward(u);
  const Vector ftv = op.adjoint(v);
  const double lhs = fu.dot(v);
  const double rhs = u.dot(ftv);
  return std::abs(lhs - rhs) / (fu.norm() * v.norm() + 1e-300);
}

}  // namespace madmm
