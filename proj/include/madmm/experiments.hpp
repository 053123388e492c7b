#pragma once

// Deterministic benchmark problems, the multiscaling family transform, and
// reference solutions used as residual anchors.

#include "madmm/core.hpp"
#include "madmm/engine.hpp"
#include "madmm/radon.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace madmm {

/// Where the quadratic benchmark's r vector enters. The benchmark objective is
/// read as ... + r^T z; `literal_x` places it on x instead.
enum class LinearTermPlacement { on_z, literal_x };

/// 2-D complex-eigenvalue quadratic benchmark, constraint x + z = c split into
/// two scalar blocks.
MulticonstraintProblem gen_complex_quads(LinearTermPlacement placement = LinearTermPlacement::on_z);

struct ScaledQuads {
  MulticonstraintProblem problem;
  std::uint64_t seed_used = 0;  // differs from the request when a draw was singular
};

/// J scalar constraints j^m (a_j^T x + b_j^T z - c_j) = 0 with Gaussian data.
ScaledQuads gen_scaled_quads(std::uint64_t seed, int m_power, Index m = 20, Index n = 20, Index j_blocks = 10,
                             LinearTermPlacement placement = LinearTermPlacement::on_z);

struct CtSpec {
  Index side = 64;
  Index views = 20;
  Index detectors = 0;  // 0: ceil(sqrt(2) side) + 1
  double tv_weight = 3.0;
  double noise_fraction = 0.25;
  int spokes = 8;
  std::uint64_t seed = 0;

  Index resolved_detectors() const;
};

struct CtInstance {
  MulticonstraintProblem problem;
  Vector ground_truth;
  Vector clean_sinogram;
  Vector measurements;
  std::vector<Index> corrupted;
  std::shared_ptr<const RadonProjector> projector;
  CtSpec spec;
};

/// Siemens star with `spokes` bright sectors, radius 0.4 side, values {0, 1}.
Vector siemens_star(Index side, int spokes);

/// Multiblock l1-fidelity / isotropic-TV CT problem:
///   min ||z_1||_1 + tv ||z_2||_{2,1}  s.t.  F x - z_1 = d,  grad x - z_2 = 0.
CtInstance gen_l1_tv_ct(const CtSpec& spec);

struct ScalingParams {
  double alpha = 1.0;
  Vector beta;  // empty means all ones
  double gamma = 1.0;
  double delta = 1.0;

  void validate(Index blocks) const;
  Vector beta_or_ones(Index blocks) const;
};

/// Member of the (alpha, beta, gamma, delta) family:
/// min alpha f(gamma x) + alpha g(delta z) s.t. beta_j A_j gamma x + beta_j B_j delta z = beta_j c_j.
MulticonstraintProblem apply_multiscaling(const MulticonstraintProblem& problem, const ScalingParams& sp);

/// Dense KKT solve for quadratic problems.
Reference reference_solution(const MulticonstraintProblem& problem);

/// Long MpSRA run from rho = 1 (CT anchor); memoized per CtSpec within the process.
Reference ct_reference_solution(const CtInstance& instance, int iters = 2000);

enum class ExperimentKind { complex_quads, scaled_quads, l1_tv_ct };

struct ExperimentSpec {
  ExperimentKind kind = ExperimentKind::complex_quads;
  std::uint64_t seed = 0;
  int m_power = 0;
  Index m = 20;
  Index n = 20;
  Index blocks = 10;
  CtSpec ct;
  LinearTermPlacement placement = LinearTermPlacement::on_z;
  int ct_reference_iters = 2000;

  /// Stable label used in CSV output (e.g. "complex-quads", "scaled-quads-m2", "l1-tv-ct").
  std::string label() const;
};

struct ExperimentInstance {
  MulticonstraintProblem problem;
  Reference reference;
  std::optional<CtInstance> ct;
};

ExperimentInstance make_experiment(const ExperimentSpec& spec);

/// Binary PGM (P5) with 16-bit samples; values are min-max scaled to 0..65535.
void write_pgm16(const std::string& path, const Vector& image, Index side);
/// One row per image row, comma separated.
void write_image_csv(const std::string& path, const Vector& image, Index side);

}  // namespace madmm
