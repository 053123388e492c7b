#include "madmm/experiments.hpp"

#include "madmm/prox.hpp"
#include "madmm/rules.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <numbers>
#include <numeric>
#include <random>
#include <tuple>

namespace madmm {

namespace {

MulticonstraintProblem quadratic_problem(std::string name, Matrix q, Vector q_lin, Matrix r, Vector r_lin,
                                         std::vector<ConstraintBlock> blocks, LinearTermPlacement placement) {
  MulticonstraintProblem p;
  p.name = std::move(name);
  p.m = q.rows();
  p.n = r.rows();
  if (placement == LinearTermPlacement::literal_x) {
    if (q_lin.size() != r_lin.size()) throw StructuralError("literal r^T x placement needs m == n");
    q_lin += r_lin;
    r_lin.setZero();
  }
  p.f = QuadraticObjective{std::move(q), std::move(q_lin)};
  p.g = QuadraticObjective{std::move(r), std::move(r_lin)};
  p.blocks = std::move(blocks);
  p.validate();
  return p;
}

}  // namespace

MulticonstraintProblem gen_complex_quads(LinearTermPlacement placement) {
  const double theta = std::numbers::pi / 4.0;
  Matrix rot(2, 2);
  rot << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
  Matrix r = Matrix::Zero(2, 2);
  r(0, 0) = 0.1;
  r(1, 1) = 10.0;
  Matrix q = rot * r * rot.transpose();
  q = 0.5 * (q + q.transpose());
  Vector q_lin(2);
  q_lin << 1.0, 1.0;
  Vector r_lin(2);
  r_lin << 1.0, -1.0;
  const double c[2] = {2.0, 1.0};

  std::vector<ConstraintBlock> blocks;
  for (int j = 0; j < 2; ++j) {
    Matrix e = Matrix::Zero(1, 2);
    e(0, j) = 1.0;
    blocks.emplace_back(e, e, Vector::Constant(1, c[j]));
  }
  return quadratic_problem("complex-quads", q, q_lin, r, r_lin, std::move(blocks), placement);
}

namespace {

bool well_conditioned_spd(const Matrix& m) {
  const Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  return lo > 1e-12 * hi && lo > 0.0;
}

}  // namespace

ScaledQuads gen_scaled_quads(std::uint64_t seed, int m_power, Index m, Index n, Index j_blocks,
                             LinearTermPlacement placement) {
  if (m < 1 || n < 1 || j_blocks < 1) throw StructuralError("scaled quads needs positive M, N, J");
  for (std::uint64_t attempt = 0; attempt < 64; ++attempt) {
    const std::uint64_t s = seed + attempt;
    std::mt19937_64 rng(s);
    std::normal_distribution<double> normal;
    auto draw = [&](Index rows, Index cols) {
      Matrix out(rows, cols);
      for (Index i = 0; i < rows; ++i) {
        for (Index k = 0; k < cols; ++k) out(i, k) = normal(rng);
      }
      return out;
    };
    const Matrix q1 = draw(m, m);
    const Matrix r1 = draw(n, n);
    const Vector q_lin = draw(m, 1);
    const Vector r_lin = draw(n, 1);
    const Matrix a = draw(j_blocks, m);
    const Matrix b = draw(j_blocks, n);
    const Vector c = draw(j_blocks, 1);
    const Matrix q = q1.transpose() * q1;
    const Matrix r = r1.transpose() * r1;
    if (!well_conditioned_spd(q) || !well_conditioned_spd(r)) continue;

    std::vector<ConstraintBlock> blocks;
    for (Index j = 0; j < j_blocks; ++j) {
      const double scale = std::pow(static_cast<double>(j + 1), m_power);
      blocks.emplace_back(Matrix(scale * a.row(j)), Matrix(scale * b.row(j)), Vector::Constant(1, scale * c[j]));
    }
    return ScaledQuads{quadratic_problem("scaled-quads-m" + std::to_string(m_power), q, q_lin, r, r_lin,
                                         std::move(blocks), placement),
                       s};
  }
  throw NumericalError("scaled quads: no nonsingular draw within 64 seeds");
}

Index CtSpec::resolved_detectors() const {
  if (detectors > 0) return detectors;
  return static_cast<Index>(std::ceil(std::numbers::sqrt2 * static_cast<double>(side))) + 1;
}

Vector siemens_star(Index side, int spokes) {
  Vector img = Vector::Zero(side * side);
  const double half = 0.5 * static_cast<double>(side);
  const double radius = 0.4 * static_cast<double>(side);
  for (Index i = 0; i < side; ++i) {
    for (Index j = 0; j < side; ++j) {
      const double x = static_cast<double>(j) + 0.5 - half;
      const double y = static_cast<double>(i) + 0.5 - half;
      if (std::hypot(x, y) > radius) continue;
      const double phi = std::atan2(y, x);
      img[i * side + j] = std::cos(spokes * phi) >= 0.0 ? 1.0 : 0.0;
    }
  }
  return img;
}

CtInstance gen_l1_tv_ct(const CtSpec& spec) {
  if (spec.side < 16) throw StructuralError("CT problem needs side >= 16");
  if (!(spec.tv_weight > 0.0)) throw StructuralError("TV weight must be positive");
  if (!(spec.noise_fraction >= 0.0 && spec.noise_fraction <= 1.0)) {
    throw StructuralError("noise fraction must lie in [0, 1]");
  }
  CtInstance out;
  out.spec = spec;
  const Index side = spec.side;
  const Index px = side * side;
  auto projector = std::make_shared<const RadonProjector>(
      side, ParallelBeamGeometry::equispaced(spec.views, spec.resolved_detectors()));
  out.projector = projector;
  out.ground_truth = siemens_star(side, spec.spokes);
  out.clean_sinogram = projector->project(out.ground_truth);
  out.measurements = out.clean_sinogram;

  const Index meas = out.clean_sinogram.size();
  const auto corrupt = static_cast<Index>(std::llround(spec.noise_fraction * static_cast<double>(meas)));
  std::mt19937_64 rng(spec.seed);
  std::vector<Index> order(static_cast<std::size_t>(meas));
  std::iota(order.begin(), order.end(), Index{0});
  std::shuffle(order.begin(), order.end(), rng);
  order.resize(static_cast<std::size_t>(corrupt));
  std::sort(order.begin(), order.end());
  const double lo = out.clean_sinogram.minCoeff();
  const double hi = out.clean_sinogram.maxCoeff();
  std::bernoulli_distribution coin(0.5);
  for (Index idx : order) out.measurements[idx] = coin(rng) ? hi : lo;
  out.corrupted = std::move(order);

  MulticonstraintProblem& p = out.problem;
  p.name = "l1-tv-ct";
  p.m = px;
  p.n = meas + 2 * px;
  p.f = ZeroObjective{};
  p.g = SeparableObjective{{L1Norm{1.0}, GroupL21Norm{spec.tv_weight, 2}}};

  // B_1 = -[I 0], B_2 = -[0 I] over the stacked z = (z_1, z_2).
  const Index n = p.n;
  auto select = [n](Index off, Index len) {
    return LinearOperator(
        n, len, [off, len](const Vector& z) -> Vector { return -z.segment(off, len); },
        [n, off, len](const Vector& w) -> Vector {
          Vector out_z = Vector::Zero(n);
          out_z.segment(off, len) = -w;
          return out_z;
        });
  };
  p.blocks.emplace_back(projector->as_operator(), select(0, meas), out.measurements);
  p.blocks.emplace_back(gradient_operator(side), select(meas, 2 * px), Vector::Zero(2 * px));
  p.partition = std::vector<Segment>{{0, meas, -1.0}, {meas, 2 * px, -1.0}};
  p.validate();
  return out;
}

void ScalingParams::validate(Index blocks) const {
  if (!std::isfinite(alpha) || !(alpha > 0.0)) throw StructuralError("alpha must be finite and positive");
  if (!std::isfinite(gamma) || gamma == 0.0) throw StructuralError("gamma must be finite and nonzero");
  if (!std::isfinite(delta) || delta == 0.0) throw StructuralError("delta must be finite and nonzero");
  if (beta.size() != 0 && beta.size() != blocks) throw StructuralError("beta needs one entry per block");
  for (Index j = 0; j < beta.size(); ++j) {
    if (!std::isfinite(beta[j]) || !(beta[j] > 0.0)) throw StructuralError("beta entries must be finite and positive");
  }
}

Vector ScalingParams::beta_or_ones(Index blocks) const {
  return beta.size() == 0 ? Vector::Ones(blocks) : beta;
}

MulticonstraintProblem apply_multiscaling(const MulticonstraintProblem& problem, const ScalingParams& sp) {
  sp.validate(problem.num_blocks());
  if (!problem.is_quadratic()) throw StructuralError("multiscaling transform needs quadratic objectives");
  const Vector beta = sp.beta_or_ones(problem.num_blocks());
  const auto& fq = std::get<QuadraticObjective>(problem.f);
  const auto& gq = std::get<QuadraticObjective>(problem.g);

  MulticonstraintProblem out = problem;
  out.f = QuadraticObjective{sp.alpha * sp.gamma * sp.gamma * fq.hessian, sp.alpha * sp.gamma * fq.linear};
  out.g = QuadraticObjective{sp.alpha * sp.delta * sp.delta * gq.hessian, sp.alpha * sp.delta * gq.linear};
  out.blocks.clear();
  for (Index j = 0; j < problem.num_blocks(); ++j) {
    const auto& blk = problem.blocks[j];
    out.blocks.emplace_back(blk.a.scaled(beta[j] * sp.gamma), blk.b.scaled(beta[j] * sp.delta),
                            Vector(beta[j] * blk.c));
  }
  if (out.partition) {
    for (Index j = 0; j < problem.num_blocks(); ++j) (*out.partition)[j].b_scale *= beta[j] * sp.delta;
  }
  out.validate();
  return out;
}

Reference reference_solution(const MulticonstraintProblem& problem) {
  if (!problem.is_quadratic()) throw StructuralError("dense KKT reference needs a quadratic problem");
  const auto& fq = std::get<QuadraticObjective>(problem.f);
  const auto& gq = std::get<QuadraticObjective>(problem.g);
  const StackedConstraints st = stack_blocks(problem);
  const Index m = problem.m;
  const Index n = problem.n;
  const Index p = st.layout.total_rows();

  // [Q 0 A^T; 0 R B^T; A B 0] [x; z; y] = [-q; -r; c]
  Matrix kkt = Matrix::Zero(m + n + p, m + n + p);
  kkt.block(0, 0, m, m) = fq.hessian;
  kkt.block(m, m, n, n) = gq.hessian;
  kkt.block(0, m + n, m, p) = st.a.transpose();
  kkt.block(m, m + n, n, p) = st.b.transpose();
  kkt.block(m + n, 0, p, m) = st.a;
  kkt.block(m + n, m, p, n) = st.b;
  Vector rhs(m + n + p);
  rhs << -fq.linear, -gq.linear, st.c;

  const Eigen::FullPivLU<Matrix> lu(kkt);
  if (!lu.isInvertible()) throw NumericalError("KKT system is rank deficient");
  Vector sol = lu.solve(rhs);
  // One step of iterative refinement.
  sol += lu.solve(rhs - kkt * sol);
  return Reference{sol.head(m), sol.segment(m, n)};
}

namespace {

using CtKey = std::tuple<Index, Index, Index, double, double, int, std::uint64_t, int>;

CtKey ct_key(const CtSpec& s, int iters) {
  return {s.side, s.views, s.resolved_detectors(), s.tv_weight, s.noise_fraction, s.spokes, s.seed, iters};
}

}  // namespace

Reference ct_reference_solution(const CtInstance& instance, int iters) {
  static std::mutex mu;
  static std::map<CtKey, Reference> cache;
  const CtKey key = ct_key(instance.spec, iters);
  {
    std::lock_guard<std::mutex> lock(mu);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
  }
  const auto rule = make_rule("mpsra");
  RunOptions opts;
  opts.iters = iters;
  const SolveReport rep = run(instance.problem, *rule, PenaltyVector::uniform(1.0, instance.problem.layout()), opts);
  Reference ref{rep.final_state.x, rep.final_state.z};
  std::lock_guard<std::mutex> lock(mu);
  cache.emplace(key, ref);
  return ref;
}

std::string ExperimentSpec::label() const {
  switch (kind) {
    case ExperimentKind::complex_quads:
      return "complex-quads";
    case ExperimentKind::scaled_quads:
      return "scaled-quads-m" + std::to_string(m_power);
    case ExperimentKind::l1_tv_ct:
      return "l1-tv-ct";
  }
  return "unknown";
}

ExperimentInstance make_experiment(const ExperimentSpec& spec) {
  switch (spec.kind) {
    case ExperimentKind::complex_quads: {
      auto p = gen_complex_quads(spec.placement);
      Reference ref = reference_solution(p);
      return ExperimentInstance{std::move(p), std::move(ref), std::nullopt};
    }
    case ExperimentKind::scaled_quads: {
      auto sq = gen_scaled_quads(spec.seed, spec.m_power, spec.m, spec.n, spec.blocks, spec.placement);
      Reference ref = reference_solution(sq.problem);
      return ExperimentInstance{std::move(sq.problem), std::move(ref), std::nullopt};
    }
    case ExperimentKind::l1_tv_ct: {
      CtInstance ct = gen_l1_tv_ct(spec.ct);
      Reference ref = ct_reference_solution(ct, spec.ct_reference_iters);
      MulticonstraintProblem p = ct.problem;
      return ExperimentInstance{std::move(p), std::move(ref), std::move(ct)};
    }
  }
  throw StructuralError("unknown experiment kind");
}

void write_pgm16(const std::string& path, const Vector& image, Index side) {
  if (image.size() != side * side) throw StructuralError("write_pgm16: image size mismatch");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "P5\n" << side << ' ' << side << "\n65535\n";
  const double lo = image.minCoeff();
  const double hi = image.maxCoeff();
  const double span = hi > lo ? hi - lo : 1.0;
  for (Index i = 0; i < image.size(); ++i) {
    const auto v = static_cast<unsigned>(std::lround(65535.0 * std::clamp((image[i] - lo) / span, 0.0, 1.0)));
    const char bytes[2] = {static_cast<char>((v >> 8) & 0xff), static_cast<char>(v & 0xff)};
    out.write(bytes, 2);
  }
}

void write_image_csv(const std::string& path, const Vector& image, Index side) {
  if (image.size() != side * side) throw StructuralError("write_image_csv: image size mismatch");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  char buf[32];
  for (Index i = 0; i < side; ++i) {
    for (Index j = 0; j < side; ++j) {
      std::snprintf(buf, sizeof buf, "%.6e", image[i * side + j]);
      out << (j ? "," : "") << buf;
    }
    out << '\n';
  }
}

}  // namespace madmm
