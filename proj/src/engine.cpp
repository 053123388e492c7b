#include "madmm/engine.hpp"

#include "madmm/rules.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>
#include <type_traits>
#include <variant>

namespace madmm {

double rel_residual(const SolverState& state, const Reference& reference) {
  const double ref_norm = std::sqrt(reference.x.squaredNorm() + reference.z.squaredNorm());
  if (!(ref_norm > 0.0)) throw StructuralError("relative residual needs a nonzero reference");
  if (state.x.size() != reference.x.size() || state.z.size() != reference.z.size()) {
    throw StructuralError("reference does not match the state dimensions");
  }
  return std::sqrt((state.x - reference.x).squaredNorm() + (state.z - reference.z).squaredNorm()) / ref_norm;
}

namespace {

bool block_diagonal_over(const Matrix& r, const std::vector<Segment>& segs) {
  for (std::size_t a = 0; a < segs.size(); ++a) {
    for (std::size_t b = 0; b < segs.size(); ++b) {
      if (a == b) continue;
      if (!r.block(segs[a].offset, segs[b].offset, segs[a].length, segs[b].length).isZero(0.0)) return false;
    }
  }
  return true;
}

// Q u + A^T D_rho A u (Q optional), as a self-adjoint operator for CG.
LinearOperator normal_operator(const MulticonstraintProblem& problem, const Matrix* base, const PenaltyVector& pv,
                               bool a_side) {
  const Index dim = a_side ? problem.m : problem.n;
  auto apply = [&problem, base, pv, a_side](const Vector& u) -> Vector {
    Vector out = a_side ? problem.stacked_a_adjoint(apply_d_rho(pv, problem.stacked_a(u)))
                        : problem.stacked_b_adjoint(apply_d_rho(pv, problem.stacked_b(u)));
    if (base) out += *base * u;
    return out;
  };
  return LinearOperator(dim, dim, apply, apply);
}

bool all_finite(const SolverState& s) {
  return s.x.allFinite() && s.z.allFinite() && s.y.allFinite() && s.y_tilde.allFinite();
}

}  // namespace

AdmmEngine::AdmmEngine(const MulticonstraintProblem& problem, CgConfig cg)
    : problem_(&problem), layout_(problem.layout()), cg_(cg) {
  problem.validate();
  cg_.validate();

  bool a_dense = true;
  bool b_dense = true;
  for (const auto& blk : problem.blocks) {
    a_dense = a_dense && blk.a.is_dense();
    b_dense = b_dense && blk.b.is_dense();
  }
  dense_x_ = a_dense;
  dense_z_ = b_dense && std::holds_alternative<QuadraticObjective>(problem.g);

  if (dense_x_) {
    for (const auto& blk : problem.blocks) a_grams_.push_back(blk.a.dense().transpose() * blk.a.dense());
  }
  if (dense_z_) {
    const auto& r = std::get<QuadraticObjective>(problem.g).hessian;
    split_z_ = problem.partition && block_diagonal_over(r, *problem.partition);
    for (Index j = 0; j < problem.num_blocks(); ++j) {
      const Matrix& b = problem.blocks[j].b.dense();
      if (split_z_) {
        const auto& seg = (*problem.partition)[j];
        const Matrix bt = b.middleCols(seg.offset, seg.length);
        b_grams_.push_back(bt.transpose() * bt);
      } else {
        b_grams_.push_back(b.transpose() * b);
      }
    }
    z_block_factors_.resize(static_cast<std::size_t>(problem.num_blocks()));
  }
}

const AdmmEngine::Factorization& AdmmEngine::factor(std::optional<Factorization>& slot, const Vector& key,
                                                    const Matrix& base, const std::vector<Matrix>& grams,
                                                    const Vector& weights) {
  if (slot && slot->key.size() == key.size() && slot->key == key) return *slot;
  Matrix normal = base;
  for (std::size_t j = 0; j < grams.size(); ++j) normal += weights[static_cast<Index>(j)] * grams[j];
  Factorization fac{key, Eigen::LLT<Matrix>(normal)};
  if (fac.llt.info() != Eigen::Success) {
    throw NumericalError("subproblem normal matrix is not positive definite for the current penalties");
  }
  slot = std::move(fac);
  return *slot;
}

Vector AdmmEngine::x_update(const SolverState& state, const PenaltyVector& pv) {
  const auto& problem = *problem_;
  // rhs = -q + A^T (D_rho (c - B z) - y)
  Vector rhs = problem.stacked_a_adjoint(apply_d_rho(pv, problem.stacked_c() - problem.stacked_b(state.z)) - state.y);
  const auto* quad = std::get_if<QuadraticObjective>(&problem.f);
  if (quad) rhs -= quad->linear;

  if (dense_x_) {
    const Matrix base = quad ? quad->hessian : Matrix::Zero(problem.m, problem.m);
    return factor(x_factor_, pv.values(), base, a_grams_, pv.values()).llt.solve(rhs);
  }
  const LinearOperator op = normal_operator(problem, quad ? &quad->hessian : nullptr, pv, true);
  CgResult res = cg_solve(op, rhs, cg_, state.x.size() == problem.m ? std::optional<Vector>(state.x) : std::nullopt);
  cg_iterations_ += res.iterations;
  return std::move(res.solution);
}

Vector AdmmEngine::z_update(const SolverState& state, const PenaltyVector& pv) {
  const auto& problem = *problem_;
  const Vector ax = problem.stacked_a(state.x);

  if (const auto* sep = std::get_if<SeparableObjective>(&problem.g)) {
    Vector z(problem.n);
    for (Index j = 0; j < problem.num_blocks(); ++j) {
      const auto& seg = (*problem.partition)[j];
      const double rho = pv[j];
      const double sigma = seg.b_scale;
      // argmin g_j(z_j) + rho/2 ||sigma z_j + v||^2 with v = A_j x - c_j + y_j / rho
      const Vector v = ax.segment(layout_.offset(j), layout_.rows(j)) - problem.blocks[j].c +
                       state.y.segment(layout_.offset(j), layout_.rows(j)) / rho;
      const Vector center = -v / sigma;
      const double step = 1.0 / (rho * sigma * sigma);
      z.segment(seg.offset, seg.length) = std::visit(
          [&](const auto& term) -> Vector {
            using T = std::decay_t<decltype(term)>;
            if constexpr (std::is_same_v<T, L1Norm>) {
              return soft_threshold(center, term.weight * step);
            } else {
              return group_soft_threshold(center, term.weight * step, term.components);
            }
          },
          sep->terms[static_cast<std::size_t>(j)]);
    }
    return z;
  }

  const auto& quad = std::get<QuadraticObjective>(problem.g);
  // rhs = -r + B^T (D_rho (c - A x) - y)
  const Vector weighted = apply_d_rho(pv, problem.stacked_c() - ax) - state.y;

  if (dense_z_ && split_z_) {
    Vector z(problem.n);
    for (Index j = 0; j < problem.num_blocks(); ++j) {
      const auto& seg = (*problem.partition)[j];
      const Matrix bt = problem.blocks[j].b.dense().middleCols(seg.offset, seg.length);
      const Vector rhs = -quad.linear.segment(seg.offset, seg.length) +
                         bt.transpose() * weighted.segment(layout_.offset(j), layout_.rows(j));
      const Vector key = Vector::Constant(1, pv[j]);
      const Matrix base = quad.hessian.block(seg.offset, seg.offset, seg.length, seg.length);
      const std::vector<Matrix> gram{b_grams_[static_cast<std::size_t>(j)]};
      z.segment(seg.offset, seg.length) =
          factor(z_block_factors_[static_cast<std::size_t>(j)], key, base, gram, key).llt.solve(rhs);
    }
    return z;
  }

  const Vector rhs = -quad.linear + problem.stacked_b_adjoint(weighted);
  if (dense_z_) return factor(z_factor_, pv.values(), quad.hessian, b_grams_, pv.values()).llt.solve(rhs);

  const LinearOperator op = normal_operator(problem, &quad.hessian, pv, false);
  CgResult res = cg_solve(op, rhs, cg_, state.z.size() == problem.n ? std::optional<Vector>(state.z) : std::nullopt);
  cg_iterations_ += res.iterations;
  return std::move(res.solution);
}

Vector AdmmEngine::synthetic_multiplier(const SolverState& state, const PenaltyVector& pv) const {
  return state.y + apply_d_rho(pv, problem_->residual(state.x, state.z));
}

SolverState AdmmEngine::step(const SolverState& state, const PenaltyVector& pv) {
  if (pv.layout() != layout_) throw StructuralError("penalty vector layout does not match the problem");
  SolverState next = state;
  next.x = x_update(state, pv);
  next.y_tilde = synthetic_multiplier(next, pv);
  next.z = z_update(next, pv);
  next.y = y_update(state.y, pv, problem_->residual(next.x, next.z));
  next.k = state.k + 1;
  return next;
}

Vector x_update(const MulticonstraintProblem& problem, const SolverState& state, const PenaltyVector& pv,
                const CgConfig& cg) {
  return AdmmEngine(problem, cg).x_update(state, pv);
}

Vector z_update(const MulticonstraintProblem& problem, const SolverState& state, const PenaltyVector& pv,
                const CgConfig& cg) {
  return AdmmEngine(problem, cg).z_update(state, pv);
}

Vector y_update(const Vector& y, const PenaltyVector& pv, const Vector& residual) {
  if (y.size() != residual.size()) throw StructuralError("y_update: multiplier and residual lengths differ");
  return y + apply_d_rho(pv, residual);
}

Vector synthetic_multiplier(const SolverState& state, const PenaltyVector& pv, const MulticonstraintProblem& problem) {
  return state.y + apply_d_rho(pv, problem.residual(state.x, state.z));
}

IterationAbort::IterationAbort(long iteration, SolverState last_finite)
    : NumericalError("ADMM iterate became non-finite at iteration " + std::to_string(iteration)),
      iteration_(iteration),
      last_finite_(std::move(last_finite)) {}

SolveReport run(const MulticonstraintProblem& problem, const PenaltyRule& rule, const PenaltyVector& rho0,
                const RunOptions& options) {
  if (options.iters < 1) throw StructuralError("run needs at least one iteration");
  using Clock = std::chrono::steady_clock;

  AdmmEngine engine(problem, options.cg);
  if (rho0.layout() != problem.layout()) throw StructuralError("initial penalties do not match the problem blocks");
  SolverState state = options.initial ? *options.initial : SolverState::zeros(problem);
  if (state.x.size() != problem.m || state.z.size() != problem.n || state.y.size() != rho0.layout().total_rows()) {
    throw StructuralError("initial state does not match the problem dimensions");
  }
  if (state.y_tilde.size() != state.y.size()) state.y_tilde = state.y;

  RuleContext ctx(problem, rule.config().window());
  ctx.push(Snapshot{rho0.values(), state.x, state.z, state.y, state.y_tilde});

  SolveReport report;
  const int iters = options.iters;
  report.rho_per_iter.resize(rho0.size(), iters);
  report.primal_residual.reserve(static_cast<std::size_t>(iters));
  report.elapsed_s.reserve(static_cast<std::size_t>(iters));
  if (options.reference) report.rel_residual.reserve(static_cast<std::size_t>(iters));

  PenaltyVector pv = rho0;
  const auto start = Clock::now();
  for (int k = 0; k < iters; ++k) {
    report.rho_per_iter.col(k) = pv.values();
    SolverState next = engine.step(state, pv);
    if (!all_finite(next)) throw IterationAbort(k, state);
    state = std::move(next);
    ctx.push(Snapshot{pv.values(), state.x, state.z, state.y, state.y_tilde});
    pv = rule.update(k, ctx, pv);

    report.elapsed_s.push_back(std::chrono::duration<double>(Clock::now() - start).count());
    report.primal_residual.push_back(problem.residual(state.x, state.z).norm());
    if (options.reference) {
      const double rel = rel_residual(state, *options.reference);
      report.rel_residual.push_back(rel);
      if (!report.converged_at && rel <= options.converge_tol) report.converged_at = k + 1;
    }
    if (options.keep_trace) report.iterates.push_back(state);
  }
  report.wall_time_s = std::chrono::duration<double>(Clock::now() - start).count();
  report.final_state = std::move(state);
  report.final_rho = pv;
  report.cg_iterations = engine.cg_iterations();
  return report;
}

double equivalence_check(const MulticonstraintProblem& problem, const Vector& beta, double rho0, int iters) {
  if (!problem.is_quadratic()) throw StructuralError("equivalence check needs exact (quadratic) subproblem solves");
  if (!(rho0 > 0.0) || !std::isfinite(rho0)) throw StructuralError("rho0 must be finite and positive");
  for (Index j = 0; j < beta.size(); ++j) {
    if (!(beta[j] > 0.0) || !std::isfinite(beta[j])) throw StructuralError("beta entries must be finite and positive");
  }
  const MulticonstraintProblem scaled = scale_constraints(problem, beta);
  const BlockLayout layout = problem.layout();
  const auto fixed = make_rule("fixed");

  RunOptions opts;
  opts.iters = iters;
  opts.keep_trace = true;
  const SolveReport standard = run(scaled, *fixed, PenaltyVector::uniform(rho0, layout), opts);
  const Vector rho_multi = rho0 * beta.array().square().matrix();
  const SolveReport multi = run(problem, *fixed, PenaltyVector(rho_multi, layout), opts);

  const PenaltyVector beta_diag(beta, layout);
  double worst = 0.0;
  for (std::size_t k = 0; k < standard.iterates.size(); ++k) {
    const auto& a = standard.iterates[k];
    const auto& b = multi.iterates[k];
    const double gap = (a.x - b.x).norm() + (a.z - b.z).norm() + (apply_d_rho(beta_diag, a.y) - b.y).norm();
    worst = std::max(worst, gap);
  }
  return worst;
}

}  // namespace madmm
