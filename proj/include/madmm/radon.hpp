#pragma once

#include "madmm/linear_operator.hpp"

#include <vector>

namespace madmm {

/// Parallel-beam acquisition: view angles in [0, pi) and a centered detector row.
struct ParallelBeamGeometry {
  std::vector<double> angles;
  Index detectors = 0;
  double detector_spacing = 1.0;

  /// `views` angles k*pi/views.
  static ParallelBeamGeometry equispaced(Index views, Index detectors);
  void validate() const;
  Index measurements() const { return static_cast<Index>(angles.size()) * detectors; }
};

/// Line-integral projector on a side x side image with unit pixels centered
/// at the origin. Weights are exact ray/pixel intersection lengths
/// (Siddon-style), stored as a sparse matrix so the adjoint is its transpose.
///
/// Row-major image layout: pixel (i, j) covers x in [j - side/2, j + 1 - side/2],
/// y in [i - side/2, i + 1 - side/2]. Sinogram layout is view-major.
class RadonProjector {
 public:
  RadonProjector(Index side, ParallelBeamGeometry geometry);

  Vector project(const Vector& image) const;
  Vector backproject(const Vector& sinogram) const;

  Index side() const { return side_; }
  const ParallelBeamGeometry& geometry() const { return geometry_; }
  const SparseMatrix& matrix() const { return weights_; }
  LinearOperator as_operator() const { return LinearOperator(weights_); }

 private:
  Index side_;
  ParallelBeamGeometry geometry_;
  SparseMatrix weights_;
};

Vector radon_project(const Vector& image, Index side, const ParallelBeamGeometry& geometry);
Vector radon_adjoint(const Vector& sinogram, Index side, const ParallelBeamGeometry& geometry);

}  // namespace madmm
