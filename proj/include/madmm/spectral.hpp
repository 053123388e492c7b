#pragma once

// Affine fixed-point view of ADMM on quadratic problems. With
// F = A Q^-1 A^T and G = B R^-1 B^T one iteration maps the multiplier as
//   y <- H y + h,  H = (I + D G)^-1 (I + D F)^-1 (I + D F D G),
// valid whenever z is consistent with y (true after the first iteration).

#include "madmm/core.hpp"

#include <complex>
#include <vector>

namespace madmm {

using Complex = std::complex<double>;
using ComplexVector = Eigen::VectorXcd;

struct IterationMatrixBundle {
  Matrix f;
  Matrix g;
  Matrix h;
  Vector affine;
  PenaltyVector rho;
};

IterationMatrixBundle assemble_bundle(const MulticonstraintProblem& problem, const PenaltyVector& pv);

/// z^(k) as a function of y^(k) for quadratic g: argmin_z g(z) + (B^T y)^T z.
Vector z_from_multiplier(const MulticonstraintProblem& problem, const Vector& y);

/// All eigenvalues of a real square matrix via Householder reduction to
/// Hessenberg form followed by Francis double-shift QR. Closed form for n <= 2.
std::vector<Complex> eigenvalues(const Matrix& a);

struct Eigenpair {
  Complex value;
  ComplexVector vector;  // unit norm
};

/// Eigenvalue of maximal modulus (ties broken toward positive imaginary
/// part) with a unit eigenvector from complex inverse iteration.
Eigenpair dominant_eigenpair(const Matrix& h);
Complex dominant_eigenvalue(const Matrix& h);

struct EigenSurface {
  std::vector<double> rho1_grid;
  std::vector<double> rho2_grid;
  Matrix magnitude;  // (i, j) <-> (rho1_grid[i], rho2_grid[j])
  Matrix angle;      // radians in (-pi, pi]
};

std::vector<double> log_grid(double lo, double hi, int count);

EigenSurface radius_surface(const MulticonstraintProblem& problem, const std::vector<double>& rho1_grid,
                            const std::vector<double>& rho2_grid);

/// Singular-value envelopes for |lambda|^2 in the two dominance regimes:
/// ||v|| >> ||D G v|| (case 1) and ||v|| << ||D G v|| (case 2).
struct DominanceBounds {
  double case1_lower = 0.0;
  double case1_upper = 0.0;
  double case2_lower = 0.0;
  double case2_upper = 0.0;
};

DominanceBounds dominance_bounds(const IterationMatrixBundle& bundle);
/// ||v|| / ||D G v|| for a (complex) eigenvector v.
double dominance_ratio(const IterationMatrixBundle& bundle, const ComplexVector& v);

}  // namespace madmm
