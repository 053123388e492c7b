#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <functional>
#include <memory>
#include <stdexcept>
#include <string>

namespace madmm {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Raised when shapes or indices do not line up.
class StructuralError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a numerical routine breaks down (non-SPD, NaN, non-convergence).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Type-erased linear map R^in -> R^out with its adjoint.
///
/// Dense and sparse matrices are wrapped directly and remain inspectable;
/// matrix-free operators only expose forward/adjoint application. The
/// handle is cheap to copy (shared immutable storage).
class LinearOperator {
 public:
  using Apply = std::function<Vector(const Vector&)>;

  LinearOperator() = default;
  explicit LinearOperator(Matrix dense);
  explicit LinearOperator(SparseMatrix sparse);
  LinearOperator(Index in_dim, Index out_dim, Apply forward, Apply adjoint);

  /// Identity on R^dim scaled by `scale`.
  static LinearOperator scaled_identity(Index dim, double scale = 1.0);

  Index in_dim() const { return in_dim_; }
  Index out_dim() const { return out_dim_; }

  Vector forward(const Vector& u) const;
  Vector adjoint(const Vector& v) const;

  bool is_dense() const { return dense_ != nullptr; }
  bool is_sparse() const { return sparse_ != nullptr; }
  const Matrix& dense() const;
  const SparseMatrix& sparse() const;

  /// Materializes the operator column by column (dense/sparse are returned directly).
  Matrix to_dense() const;

  /// Same operator with forward scaled by `s` (adjoint scales identically).
  LinearOperator scaled(double s) const;

 private:
  Index in_dim_ = 0;
  Index out_dim_ = 0;
  std::shared_ptr<const Matrix> dense_;
  std::shared_ptr<const SparseMatrix> sparse_;
  Apply forward_;
  Apply adjoint_;
};

/// Relative adjoint mismatch |<Fu, v> - <u, F^T v>| / (|Fu||v| + tiny) for one random draw pair.
double adjoint_mismatch(const LinearOperator& op, unsigned seed);

}  // namespace madmm
