#pragma once

// Multiparameter ADMM iteration:
//   x^(k+1) = argmin_x f(x) + sum_j rho_j/2 ||A_j x + B_j z^(k) - c_j + y_j^(k)/rho_j||^2
//   z^(k+1) = argmin_z g(z) + sum_j rho_j/2 ||A_j x^(k+1) + B_j z - c_j + y_j^(k)/rho_j||^2
//   y^(k+1) = y^(k) + D_rho (A x^(k+1) + B z^(k+1) - c)
// followed by rho^(k+1) = rule(k, history, rho^(k)).

#include "madmm/core.hpp"
#include "madmm/prox.hpp"

#include <Eigen/Cholesky>

#include <optional>
#include <vector>

namespace madmm {

class PenaltyRule;

/// Solution anchor for the relative residual.
struct Reference {
  Vector x;
  Vector z;
};

/// ||(x, z) - (x*, z*)|| / ||(x*, z*)||
double rel_residual(const SolverState& state, const Reference& reference);

/// Owns the per-problem caches (normal-matrix factorizations keyed on rho,
/// CG warm starts). One engine per solve; not shared between threads.
class AdmmEngine {
 public:
  explicit AdmmEngine(const MulticonstraintProblem& problem, CgConfig cg = {});

  /// Minimizer over x given state.z = z^(k), state.y = y^(k).
  Vector x_update(const SolverState& state, const PenaltyVector& pv);
  /// Minimizer over z given state.x = x^(k+1), state.y = y^(k).
  Vector z_update(const SolverState& state, const PenaltyVector& pv);
  /// y^(k) + D_rho (A x^(k+1) + B z^(k) - c) with state.x = x^(k+1), state.z = z^(k).
  Vector synthetic_multiplier(const SolverState& state, const PenaltyVector& pv) const;

  /// One full x -> y~ -> z -> y sweep; increments k.
  SolverState step(const SolverState& state, const PenaltyVector& pv);

  long cg_iterations() const { return cg_iterations_; }
  const MulticonstraintProblem& problem() const { return *problem_; }

 private:
  struct Factorization {
    Vector key;
    Eigen::LLT<Matrix> llt;
  };

  const Factorization& factor(std::optional<Factorization>& slot, const Vector& key, const Matrix& base,
                              const std::vector<Matrix>& grams, const Vector& weights);

  const MulticonstraintProblem* problem_;
  BlockLayout layout_;
  CgConfig cg_;
  bool dense_x_ = false;
  bool dense_z_ = false;
  bool split_z_ = false;  // block-diagonal R over the partition
  std::vector<Matrix> a_grams_;  // A_j^T A_j
  std::vector<Matrix> b_grams_;  // B_j^T B_j (joint) or B~_j^T B~_j (split)
  std::optional<Factorization> x_factor_;
  std::optional<Factorization> z_factor_;
  std::vector<std::optional<Factorization>> z_block_factors_;
  long cg_iterations_ = 0;
};

Vector x_update(const MulticonstraintProblem& problem, const SolverState& state, const PenaltyVector& pv,
                const CgConfig& cg = {});
Vector z_update(const MulticonstraintProblem& problem, const SolverState& state, const PenaltyVector& pv,
                const CgConfig& cg = {});
Vector y_update(const Vector& y, const PenaltyVector& pv, const Vector& residual);
Vector synthetic_multiplier(const SolverState& state, const PenaltyVector& pv, const MulticonstraintProblem& problem);

struct RunOptions {
  int iters = 50;
  std::optional<Reference> reference;
  CgConfig cg;
  bool keep_trace = false;
  /// converged_at is the first iteration with rel_residual <= this.
  double converge_tol = 1e-8;
  /// Defaults to all-zero x, z, y.
  std::optional<SolverState> initial;
};

struct SolveReport {
  /// state after each iteration (only with keep_trace)
  std::vector<SolverState> iterates;
  /// filled when a reference is supplied
  std::vector<double> rel_residual;
  std::vector<double> primal_residual;
  /// column k holds rho^(k), the penalties used in iteration k
  Matrix rho_per_iter;
  /// seconds since the start of the solve, after each iteration
  std::vector<double> elapsed_s;
  double wall_time_s = 0.0;
  std::optional<int> converged_at;
  SolverState final_state;
  PenaltyVector final_rho{Vector::Ones(1), BlockLayout({1})};
  long cg_iterations = 0;
};

/// Raised when an iterate stops being finite.
class IterationAbort : public NumericalError {
 public:
  IterationAbort(long iteration, SolverState last_finite);
  long iteration() const { return iteration_; }
  const SolverState& last_finite() const { return last_finite_; }

 private:
  long iteration_;
  SolverState last_finite_;
};

SolveReport run(const MulticonstraintProblem& problem, const PenaltyRule& rule, const PenaltyVector& rho0,
                const RunOptions& options);

/// Preconditioning equivalence harness: standard single-penalty ADMM on the
/// beta-scaled constraints versus multiparameter ADMM with rho_j = rho0 beta_j^2.
/// Returns max_k ||x_a - x_b|| + ||z_a - z_b|| + ||D_beta y_a - y_b||.
double equivalence_check(const MulticonstraintProblem& problem, const Vector& beta, double rho0, int iters);

}  // namespace madmm
