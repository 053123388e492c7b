#pragma once

// Problem and iterate data model for multiconstraint / multiblock ADMM:
//
//   minimize f(x) + g(z)  subject to  A_j x + B_j z = c_j,  j = 0..J-1
//
// Blocks are 0-indexed throughout the library.

#include "madmm/linear_operator.hpp"

#include <cstddef>
#include <deque>
#include <optional>
#include <string>
#include <tuple>
#include <variant>
#include <vector>

namespace madmm {

/// Row bookkeeping for a stack of J constraint blocks.
class BlockLayout {
 public:
  BlockLayout() = default;
  explicit BlockLayout(std::vector<Index> rows);

  Index num_blocks() const { return static_cast<Index>(rows_.size()); }
  Index total_rows() const { return total_; }
  Index rows(Index j) const { return rows_.at(static_cast<std::size_t>(j)); }
  Index offset(Index j) const { return offsets_.at(static_cast<std::size_t>(j)); }
  const std::vector<Index>& all_rows() const { return rows_; }
  const std::vector<Index>& offsets() const { return offsets_; }

  bool operator==(const BlockLayout&) const = default;

 private:
  std::vector<Index> rows_;
  std::vector<Index> offsets_;
  Index total_ = 0;
};

struct ConstraintBlock {
  ConstraintBlock(LinearOperator a, LinearOperator b, Vector c);
  ConstraintBlock(Matrix a, Matrix b, Vector c);

  Index rows() const { return c.size(); }

  LinearOperator a;
  LinearOperator b;
  Vector c;
};

/// 1/2 u^T H u + l^T u
struct QuadraticObjective {
  Matrix hessian;
  Vector linear;

  double value(const Vector& u) const { return 0.5 * u.dot(hessian * u) + linear.dot(u); }
};

/// f == 0; the x-update reduces to a least-squares solve over the constraints.
struct ZeroObjective {};

struct L1Norm {
  double weight = 1.0;
};

/// Sum over groups of the Euclidean norm. A field with `components` planes of
/// equal length is grouped per position (e.g. a 2 x M x M gradient field groups per pixel).
struct GroupL21Norm {
  double weight = 1.0;
  Index components = 2;
};

using ProxTerm = std::variant<L1Norm, GroupL21Norm>;

/// g(z) = sum_j g_j(z_j) over the multiblock partition, each g_j proximable.
struct SeparableObjective {
  std::vector<ProxTerm> terms;
};

using ObjectiveF = std::variant<QuadraticObjective, ZeroObjective>;
using ObjectiveG = std::variant<QuadraticObjective, SeparableObjective>;

/// Slice of z owned by one multiblock constraint. When g is separable the
/// block's B_j restricted to the segment must equal b_scale * I.
struct Segment {
  Index offset = 0;
  Index length = 0;
  double b_scale = 1.0;
};

struct MulticonstraintProblem {
  std::string name;
  Index m = 0;  // dim x
  Index n = 0;  // dim z
  ObjectiveF f;
  ObjectiveG g;
  std::vector<ConstraintBlock> blocks;
  std::optional<std::vector<Segment>> partition;

  Index num_blocks() const { return static_cast<Index>(blocks.size()); }
  BlockLayout layout() const;

  /// Throws StructuralError on any broken invariant.
  void validate() const;

  bool is_quadratic() const;
  /// Every A_j and B_j is stored as a dense matrix.
  bool is_dense() const;

  Vector stacked_a(const Vector& x) const;
  Vector stacked_b(const Vector& z) const;
  Vector stacked_a_adjoint(const Vector& w) const;
  Vector stacked_b_adjoint(const Vector& w) const;
  Vector stacked_c() const;
  /// Ax + Bz - c, stacked.
  Vector residual(const Vector& x, const Vector& z) const;
};

/// Strictly positive per-constraint penalties rho_j.
class PenaltyVector {
 public:
  PenaltyVector(Vector rho, BlockLayout layout);
  static PenaltyVector uniform(double rho, const BlockLayout& layout);

  const Vector& values() const { return rho_; }
  double operator[](Index j) const { return rho_[j]; }
  Index size() const { return rho_.size(); }
  const BlockLayout& layout() const { return layout_; }

  /// The diagonal of D_rho (length P).
  Vector expanded() const;

 private:
  Vector rho_;
  BlockLayout layout_;
};

struct SolverState {
  Vector x;
  Vector z;
  Vector y;
  Vector y_tilde;
  long k = 0;

  static SolverState zeros(const MulticonstraintProblem& problem);
};

/// One entry of the rule history: rho^(i) and the iterates it produced.
struct Snapshot {
  Vector rho;
  Vector x;
  Vector z;
  Vector y;
  Vector y_tilde;
};

/// Bounded history of snapshots consumed by penalty rules. The problem
/// reference gives rules access to A_j, B_j (it must outlive the context).
class RuleContext {
 public:
  RuleContext(const MulticonstraintProblem& problem, std::size_t window);

  void push(Snapshot snapshot);
  std::size_t size() const { return history_.size(); }
  std::size_t window() const { return window_; }
  bool has_lag(std::size_t lag) const { return lag < history_.size(); }
  /// lag 0 is the newest snapshot.
  const Snapshot& at_lag(std::size_t lag) const;

  const MulticonstraintProblem& problem() const { return *problem_; }
  const BlockLayout& layout() const { return layout_; }

 private:
  const MulticonstraintProblem* problem_;
  BlockLayout layout_;
  std::size_t window_;
  std::deque<Snapshot> history_;
};

struct StackedConstraints {
  Matrix a;
  Matrix b;
  Vector c;
  BlockLayout layout;
};

StackedConstraints stack_blocks(const MulticonstraintProblem& problem);

Vector apply_d_rho(const PenaltyVector& pv, const Vector& w);

Vector block_slice(const Vector& w, const BlockLayout& layout, Index j);
void assign_block(Vector& w, const BlockLayout& layout, Index j, const Vector& value);

/// Copy of the problem with constraint j multiplied through by beta_j (> 0).
MulticonstraintProblem scale_constraints(const MulticonstraintProblem& problem, const Vector& beta);

}  // namespace madmm
