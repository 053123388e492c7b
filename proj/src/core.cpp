#include "madmm/core.hpp"

#include <cmath>
#include <random>

namespace madmm {

BlockLayout::BlockLayout(std::vector<Index> rows) : rows_(std::move(rows)) {
  offsets_.reserve(rows_.size());
  for (Index r : rows_) {
    if (r < 1) throw StructuralError("constraint block must have at least one row");
    offsets_.push_back(total_);
    total_ += r;
  }
}

ConstraintBlock::ConstraintBlock(LinearOperator a_op, LinearOperator b_op, Vector c_vec)
    : a(std::move(a_op)), b(std::move(b_op)), c(std::move(c_vec)) {
  if (c.size() < 1) throw StructuralError("constraint block must have at least one row");
  if (a.out_dim() != c.size() || b.out_dim() != c.size()) {
    throw StructuralError("constraint block row mismatch: A has " + std::to_string(a.out_dim()) + ", B has " +
                          std::to_string(b.out_dim()) + ", c has " + std::to_string(c.size()));
  }
}

ConstraintBlock::ConstraintBlock(Matrix a_mat, Matrix b_mat, Vector c_vec)
    : ConstraintBlock(LinearOperator(std::move(a_mat)), LinearOperator(std::move(b_mat)), std::move(c_vec)) {}

BlockLayout MulticonstraintProblem::layout() const {
  std::vector<Index> rows;
  rows.reserve(blocks.size());
  for (const auto& blk : blocks) rows.push_back(blk.rows());
  return BlockLayout(std::move(rows));
}

namespace {

void check_quadratic(const QuadraticObjective& obj, Index dim, const char* which) {
  if (obj.hessian.rows() != dim || obj.hessian.cols() != dim || obj.linear.size() != dim) {
    throw StructuralError(std::string("quadratic objective ") + which + " does not match its variable dimension");
  }
}

}  // namespace

void MulticonstraintProblem::validate() const {
  if (m < 1 || n < 1) throw StructuralError("problem dimensions must be positive");
  if (blocks.empty()) throw StructuralError("problem needs at least one constraint block");
  for (std::size_t j = 0; j < blocks.size(); ++j) {
    const auto& blk = blocks[j];
    if (blk.a.in_dim() != m || blk.b.in_dim() != n) {
      throw StructuralError("block " + std::to_string(j) + " column dimensions do not match (m, n)");
    }
  }
  if (const auto* q = std::get_if<QuadraticObjective>(&f)) check_quadratic(*q, m, "f");
  if (const auto* r = std::get_if<QuadraticObjective>(&g)) check_quadratic(*r, n, "g");

  const auto* sep = std::get_if<SeparableObjective>(&g);
  if (sep && !partition) throw StructuralError("separable g requires a multiblock partition");
  if (!partition) return;

  const auto& segs = *partition;
  if (segs.size() != blocks.size()) throw StructuralError("partition must have one segment per block");
  if (sep && sep->terms.size() != segs.size()) throw StructuralError("separable g needs one term per segment");
  Index expect = 0;
  for (const auto& s : segs) {
    if (s.offset != expect || s.length < 1) throw StructuralError("partition segments must tile z in order");
    expect += s.length;
  }
  if (expect != n) throw StructuralError("partition does not cover z");

  // B_j must vanish outside segment j; probed with a deterministic random vector.
  std::mt19937_64 rng(0x5eed);
  std::normal_distribution<double> normal;
  Vector probe(n);
  for (Index i = 0; i < n; ++i) probe[i] = normal(rng);
  for (std::size_t j = 0; j < segs.size(); ++j) {
    Vector outside = probe;
    outside.segment(segs[j].offset, segs[j].length).setZero();
    const Vector leak = blocks[j].b.forward(outside);
    if (leak.norm() > 1e-12 * probe.norm() * (1.0 + leak.size())) {
      throw StructuralError("block " + std::to_string(j) + " B matrix touches z outside its partition segment");
    }
    if (sep) {
      if (blocks[j].rows() != segs[j].length) {
        throw StructuralError("separable block " + std::to_string(j) + " needs B_j = scale * I on its segment");
      }
      Vector inside = Vector::Zero(n);
      inside.segment(segs[j].offset, segs[j].length) = probe.segment(segs[j].offset, segs[j].length);
      const Vector expect_b = segs[j].b_scale * probe.segment(segs[j].offset, segs[j].length);
      if ((blocks[j].b.forward(inside) - expect_b).norm() > 1e-12 * (1.0 + expect_b.norm())) {
        throw StructuralError("separable block " + std::to_string(j) + " B_j is not b_scale * I on its segment");
      }
      if (segs[j].b_scale == 0.0) throw StructuralError("segment b_scale must be nonzero");
    }
  }
}

bool MulticonstraintProblem::is_quadratic() const {
  return std::holds_alternative<QuadraticObjective>(f) && std::holds_alternative<QuadraticObjective>(g);
}

bool MulticonstraintProblem::is_dense() const {
  for (const auto& blk : blocks) {
    if (!blk.a.is_dense() || !blk.b.is_dense()) return false;
  }
  return true;
}

Vector MulticonstraintProblem::stacked_a(const Vector& x) const {
  const BlockLayout lay = layout();
  Vector out(lay.total_rows());
  for (Index j = 0; j < num_blocks(); ++j) out.segment(lay.offset(j), lay.rows(j)) = blocks[j].a.forward(x);
  return out;
}

Vector MulticonstraintProblem::stacked_b(const Vector& z) const {
  const BlockLayout lay = layout();
  Vector out(lay.total_rows());
  for (Index j = 0; j < num_blocks(); ++j) out.segment(lay.offset(j), lay.rows(j)) = blocks[j].b.forward(z);
  return out;
}

Vector MulticonstraintProblem::stacked_a_adjoint(const Vector& w) const {
  const BlockLayout lay = layout();
  if (w.size() != lay.total_rows()) throw StructuralError("stacked vector has wrong length");
  Vector out = Vector::Zero(m);
  for (Index j = 0; j < num_blocks(); ++j) out += blocks[j].a.adjoint(w.segment(lay.offset(j), lay.rows(j)));
  return out;
}

Vector MulticonstraintProblem::stacked_b_adjoint(const Vector& w) const {
  const BlockLayout lay = layout();
  if (w.size() != lay.total_rows()) throw StructuralError("stacked vector has wrong length");
  Vector out = Vector::Zero(n);
  for (Index j = 0; j < num_blocks(); ++j) out += blocks[j].b.adjoint(w.segment(lay.offset(j), lay.rows(j)));
  return out;
}

Vector MulticonstraintProblem::stacked_c() const {
  const BlockLayout lay = layout();
  Vector out(lay.total_rows());
  for (Index j = 0; j < num_blocks(); ++j) out.segment(lay.offset(j), lay.rows(j)) = blocks[j].c;
  return out;
}

Vector MulticonstraintProblem::residual(const Vector& x, const Vector& z) const {
  return stacked_a(x) + stacked_b(z) - stacked_c();
}

PenaltyVector::PenaltyVector(Vector rho, BlockLayout layout) : rho_(std::move(rho)), layout_(std::move(layout)) {
  if (rho_.size() != layout_.num_blocks()) {
    throw StructuralError("penalty vector has " + std::to_string(rho_.size()) + " entries for " +
                          std::to_string(layout_.num_blocks()) + " blocks");
  }
  for (Index j = 0; j < rho_.size(); ++j) {
    if (!std::isfinite(rho_[j]) || !(rho_[j] > 0.0)) {
      throw StructuralError("penalty parameter " + std::to_string(j) + " must be finite and positive");
    }
  }
}

PenaltyVector PenaltyVector::uniform(double rho, const BlockLayout& layout) {
  return PenaltyVector(Vector::Constant(layout.num_blocks(), rho), layout);
}

Vector PenaltyVector::expanded() const {
  Vector d(layout_.total_rows());
  for (Index j = 0; j < rho_.size(); ++j) d.segment(layout_.offset(j), layout_.rows(j)).setConstant(rho_[j]);
  return d;
}

SolverState SolverState::zeros(const MulticonstraintProblem& problem) {
  const Index p = problem.layout().total_rows();
  return SolverState{Vector::Zero(problem.m), Vector::Zero(problem.n), Vector::Zero(p), Vector::Zero(p), 0};
}

RuleContext::RuleContext(const MulticonstraintProblem& problem, std::size_t window)
    : problem_(&problem), layout_(problem.layout()), window_(window) {
  if (window < 2) throw StructuralError("rule context window must be at least 2");
}

void RuleContext::push(Snapshot snapshot) {
  history_.push_back(std::move(snapshot));
  while (history_.size() > window_) history_.pop_front();
}

const Snapshot& RuleContext::at_lag(std::size_t lag) const {
  if (lag >= history_.size()) throw StructuralError("rule context has no snapshot at lag " + std::to_string(lag));
  return history_[history_.size() - 1 - lag];
}

StackedConstraints stack_blocks(const MulticonstraintProblem& problem) {
  problem.validate();
  StackedConstraints out;
  out.layout = problem.layout();
  const Index p = out.layout.total_rows();
  out.a.resize(p, problem.m);
  out.b.resize(p, problem.n);
  out.c.resize(p);
  for (Index j = 0; j < problem.num_blocks(); ++j) {
    const auto& blk = problem.blocks[j];
    out.a.middleRows(out.layout.offset(j), blk.rows()) = blk.a.to_dense();
    out.b.middleRows(out.layout.offset(j), blk.rows()) = blk.b.to_dense();
    out.c.segment(out.layout.offset(j), blk.rows()) = blk.c;
  }
  return out;
}

Vector apply_d_rho(const PenaltyVector& pv, const Vector& w) {
  const BlockLayout& lay = pv.layout();
  if (w.size() != lay.total_rows()) {
    throw StructuralError("D_rho applied to length " + std::to_string(w.size()) + ", expected " +
                          std::to_string(lay.total_rows()));
  }
  Vector out(w.size());
  for (Index j = 0; j < pv.size(); ++j) {
    out.segment(lay.offset(j), lay.rows(j)) = pv[j] * w.segment(lay.offset(j), lay.rows(j));
  }
  return out;
}

Vector block_slice(const Vector& w, const BlockLayout& layout, Index j) {
  if (j < 0 || j >= layout.num_blocks()) throw StructuralError("block index " + std::to_string(j) + " out of range");
  if (w.size() != layout.total_rows()) throw StructuralError("stacked vector has wrong length");
  return w.segment(layout.offset(j), layout.rows(j));
}

void assign_block(Vector& w, const BlockLayout& layout, Index j, const Vector& value) {
  if (j < 0 || j >= layout.num_blocks()) throw StructuralError("block index " + std::to_string(j) + " out of range");
  if (w.size() != layout.total_rows() || value.size() != layout.rows(j)) {
    throw StructuralError("block assignment has wrong length");
  }
  w.segment(layout.offset(j), layout.rows(j)) = value;
}

MulticonstraintProblem scale_constraints(const MulticonstraintProblem& problem, const Vector& beta) {
  if (beta.size() != problem.num_blocks()) throw StructuralError("need one scale per constraint block");
  MulticonstraintProblem out = problem;
  out.blocks.clear();
  for (Index j = 0; j < problem.num_blocks(); ++j) {
    if (!std::isfinite(beta[j]) || !(beta[j] > 0.0)) throw StructuralError("constraint scales must be finite and positive");
    const auto& blk = problem.blocks[j];
    out.blocks.emplace_back(blk.a.scaled(beta[j]), blk.b.scaled(beta[j]), Vector(beta[j] * blk.c));
  }
  if (out.partition) {
    for (Index j = 0; j < problem.num_blocks(); ++j) (*out.partition)[j].b_scale *= beta[j];
  }
  return out;
}

}  // namespace madmm
