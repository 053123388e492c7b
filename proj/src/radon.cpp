#include "madmm/radon.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace madmm {

ParallelBeamGeometry ParallelBeamGeometry::equispaced(Index views, Index detectors) {
  ParallelBeamGeometry geo;
  geo.detectors = detectors;
  geo.angles.reserve(static_cast<std::size_t>(std::max<Index>(views, 0)));
  for (Index k = 0; k < views; ++k) geo.angles.push_back(std::numbers::pi * static_cast<double>(k) / views);
  geo.validate();
  return geo;
}

void ParallelBeamGeometry::validate() const {
  if (angles.empty()) throw StructuralError("projection geometry has no view angles");
  if (detectors < 1) throw StructuralError("projection geometry needs at least one detector");
  if (!(detector_spacing > 0.0)) throw StructuralError("detector spacing must be positive");
  for (double a : angles) {
    if (!(a >= 0.0 && a < std::numbers::pi)) throw StructuralError("view angles must lie in [0, pi)");
  }
}

namespace {

using Triplet = Eigen::Triplet<double>;

// Appends the intersection lengths of one ray with the pixel grid.
void trace_ray(Index row, double theta, double offset, Index side, std::vector<Triplet>& out,
               std::vector<double>& ts) {
  const double half = 0.5 * static_cast<double>(side);
  const double nx = std::cos(theta);
  const double ny = std::sin(theta);
  const double dx = -ny;
  const double dy = nx;
  const double px = offset * nx;
  const double py = offset * ny;
  constexpr double kParallel = 1e-12;

  double tmin = -std::numeric_limits<double>::infinity();
  double tmax = std::numeric_limits<double>::infinity();
  auto clip = [&](double p, double d) {
    if (std::abs(d) < kParallel) {
      if (p < -half || p > half) tmin = tmax = 0.0;
      return;
    }
    double t0 = (-half - p) / d;
    double t1 = (half - p) / d;
    if (t0 > t1) std::swap(t0, t1);
    tmin = std::max(tmin, t0);
    tmax = std::min(tmax, t1);
  };
  clip(px, dx);
  clip(py, dy);
  if (!(tmax > tmin)) return;

  ts.clear();
  ts.push_back(tmin);
  ts.push_back(tmax);
  auto planes = [&](double p, double d) {
    if (std::abs(d) < kParallel) return;
    for (Index k = 0; k <= side; ++k) {
      const double t = (static_cast<double>(k) - half - p) / d;
      if (t > tmin && t < tmax) ts.push_back(t);
    }
  };
  planes(px, dx);
  planes(py, dy);
  std::sort(ts.begin(), ts.end());

  for (std::size_t s = 0; s + 1 < ts.size(); ++s) {
    const double len = ts[s + 1] - ts[s];
    if (len <= 1e-12) continue;
    const double tm = 0.5 * (ts[s] + ts[s + 1]);
    const auto col = static_cast<Index>(std::floor(px + tm * dx + half));
    const auto rr = static_cast<Index>(std::floor(py + tm * dy + half));
    if (col < 0 || col >= side || rr < 0 || rr >= side) continue;
    out.emplace_back(row, rr * side + col, len);
  }
}

}  // namespace

RadonProjector::RadonProjector(Index side, ParallelBeamGeometry geometry)
    : side_(side), geometry_(std::move(geometry)) {
  if (side < 1) throw StructuralError("image side must be positive");
  geometry_.validate();
  const Index nd = geometry_.detectors;
  std::vector<Triplet> trip;
  trip.reserve(static_cast<std::size_t>(geometry_.measurements() * 2 * side));
  std::vector<double> ts;
  for (std::size_t v = 0; v < geometry_.angles.size(); ++v) {
    for (Index d = 0; d < nd; ++d) {
      const double offset = (static_cast<double>(d) - 0.5 * static_cast<double>(nd - 1)) * geometry_.detector_spacing;
      trace_ray(static_cast<Index>(v) * nd + d, geometry_.angles[v], offset, side, trip, ts);
    }
  }
  weights_.resize(geometry_.measurements(), side * side);
  weights_.setFromTriplets(trip.begin(), trip.end());
  weights_.makeCompressed();
}

Vector RadonProjector::project(const Vector& image) const {
  if (image.size() != side_ * side_) throw StructuralError("radon: image has wrong size");
  return weights_ * image;
}

Vector RadonProjector::backproject(const Vector& sinogram) const {
  if (sinogram.size() != weights_.rows()) throw StructuralError("radon: sinogram has wrong size");
  return weights_.transpose() * sinogram;
}

Vector radon_project(const Vector& image, Index side, const ParallelBeamGeometry& geometry) {
  return RadonProjector(side, geometry).project(image);
}

Vector radon_adjoint(const Vector& sinogram, Index side, const ParallelBeamGeometry& geometry) {
  return RadonProjector(side, geometry).backproject(sinogram);
}

}  // namespace madmm
