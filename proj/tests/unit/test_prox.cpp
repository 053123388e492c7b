#include "madmm/prox.hpp"
#include "madmm/radon.hpp"

#include "../support/random_problems.hpp"

#include "doctest.h"

#include <cmath>

using namespace madmm;

namespace {

// Brute-force minimizer of 1/2 (u - v)^2 + t |u| on a fine grid.
double grid_prox(double v, double t, double step) {
  double best_u = 0.0;
  double best = std::numeric_limits<double>::infinity();
  for (double u = -5.0; u <= 5.0; u += step) {
    const double val = 0.5 * (u - v) * (u - v) + t * std::abs(u);
    if (val < best) {
      best = val;
      best_u = u;
    }
  }
  return best_u;
}

}  // namespace

TEST_SUITE("prox") {
  TEST_CASE("soft threshold matches the grid minimizer") {
    const double step = 1e-4;
    for (double v : {-3.2, -1.0, -0.3, 0.0, 0.4, 1.7, 2.9}) {
      for (double t : {0.1, 0.5, 1.0, 2.0}) {
        const double got = soft_threshold(Vector::Constant(1, v), t)[0];
        CHECK(std::abs(got - grid_prox(v, t, step)) <= step);
      }
    }
  }

  TEST_CASE("soft threshold closed form") {
    Vector v(4);
    v << 3.0, -3.0, 0.5, -0.5;
    const Vector u = soft_threshold(v, 1.0);
    CHECK(u[0] == 2.0);
    CHECK(u[1] == -2.0);
    CHECK(u[2] == 0.0);
    CHECK(u[3] == 0.0);
    CHECK_THROWS_AS(soft_threshold(v, 0.0), StructuralError);
  }

  TEST_CASE("group shrink scales each group toward zero") {
    // Planes [3, 0.1 ; 4, 0.1]: group 0 is (3, 4) with norm 5, group 1 is tiny.
    Vector v(4);
    v << 3.0, 0.1, 4.0, 0.1;
    const Vector u = group_soft_threshold(v, 1.0, 2);
    CHECK(u[0] == doctest::Approx(2.4));
    CHECK(u[2] == doctest::Approx(3.2));
    CHECK(u[1] == 0.0);
    CHECK(u[3] == 0.0);
    CHECK(group_l21_norm(v, 2) == doctest::Approx(5.0 + std::sqrt(0.02)));
  }

  TEST_CASE("group shrink is optimal against random probes") {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> normal;
    for (int t = 0; t < 20; ++t) {
      const Vector v = testing::gaussian_vector(rng, 12);
      const double thr = 0.7;
      const Vector u = group_soft_threshold(v, thr, 2);
      auto obj = [&](const Vector& w) { return 0.5 * (w - v).squaredNorm() + thr * group_l21_norm(w, 2); };
      for (int p = 0; p < 100; ++p) {
        Vector w = u;
        for (Index i = 0; i < w.size(); ++i) w[i] += 1e-3 * normal(rng);
        CHECK(obj(w) >= obj(u) - 1e-12);
      }
    }
  }

  TEST_CASE("gradient has Neumann boundary and an exact adjoint") {
    const Index side = 5;
    Vector img = Vector::Zero(side * side);
    for (Index i = 0; i < side; ++i) {
      for (Index j = 0; j < side; ++j) img[i * side + j] = double(i) + 10.0 * double(j);
    }
    const Vector g = grad_2d(img, side);
    CHECK(g[0] == 1.0);            // d/drow at (0, 0)
    CHECK(g[side * side] == 10.0);  // d/dcol at (0, 0)
    CHECK(g[(side - 1) * side] == 0.0);
    CHECK(g[side * side + side - 1] == 0.0);
    for (unsigned seed = 0; seed < 3; ++seed) CHECK(adjoint_mismatch(gradient_operator(9 + seed), seed) < 1e-12);
  }

  TEST_CASE("radon projector adjoint and mass") {
    const RadonProjector proj(24, ParallelBeamGeometry::equispaced(9, 35));
    CHECK(adjoint_mismatch(proj.as_operator(), 3) < 1e-12);
    // Unit-spaced rays through every view sample the whole image, so each
    // view's detector sum approximates the pixel area.
    const Vector ones = Vector::Ones(24 * 24);
    const Vector sino = proj.project(ones);
    for (Index v = 0; v < 9; ++v) CHECK(sino.segment(v * 35, 35).sum() == doctest::Approx(24.0 * 24.0).epsilon(2e-3));
    CHECK((radon_adjoint(sino, 24, proj.geometry()) - proj.backproject(sino)).norm() < 1e-9);
  }

  TEST_CASE("Cholesky solve and its failure mode") {
    std::mt19937_64 rng(12);
    const Matrix q = testing::random_spd(rng, 6);
    const Vector b = testing::gaussian_vector(rng, 6);
    CHECK((q * solve_quadratic(q, b) - b).norm() < 1e-10);
    Matrix bad = Matrix::Identity(3, 3);
    bad(2, 2) = -1.0;
    CHECK_THROWS_AS(solve_quadratic(bad, Vector::Ones(3)), NumericalError);
  }

  TEST_CASE("CG matches a direct solve and its A-norm error never grows") {
    std::mt19937_64 rng(13);
    for (int t = 0; t < 20; ++t) {
      const Index n = 10 + t;
      const Matrix a = testing::random_spd(rng, n, 0.1);
      const Vector b = testing::gaussian_vector(rng, n);
      const Vector exact = solve_quadratic(a, b);
      CgConfig cfg;
      cfg.rel_tol = 1e-13;
      cfg.max_iters = static_cast<int>(5 * n);
      const auto res = cg_solve(LinearOperator(a), b, cfg);
      CHECK((res.solution - exact).norm() <= 1e-9 * exact.norm());
      CHECK_FALSE(res.hit_max_iters);
      CHECK(res.residual_history.size() == static_cast<std::size_t>(res.iterations) + 1);

      double prev = std::numeric_limits<double>::infinity();
      for (int k = 1; k <= std::min(res.iterations, 8); ++k) {
        CgConfig cut = cfg;
        cut.max_iters = k;
        cut.rel_tol = 1e-300;
        const Vector e = cg_solve(LinearOperator(a), b, cut).solution - exact;
        const double err = std::sqrt(e.dot(a * e));
        CHECK(err <= prev * (1.0 + 1e-10));
        prev = err;
      }
    }
  }

  TEST_CASE("CG reports hitting the iteration cap") {
    std::mt19937_64 rng(14);
    const Matrix a = testing::random_spd(rng, 30, 0.01);
    CgConfig cfg;
    cfg.max_iters = 2;
    cfg.rel_tol = 1e-14;
    const auto res = cg_solve(LinearOperator(a), testing::gaussian_vector(rng, 30), cfg);
    CHECK(res.hit_max_iters);
    CHECK(res.iterations == 2);
  }
}
