#include "madmm/core.hpp"
#include "madmm/engine.hpp"

#include "../support/random_problems.hpp"

#include "doctest.h"

using namespace madmm;

TEST_SUITE("core") {
  TEST_CASE("block layout offsets follow the row counts") {
    const BlockLayout lay({2, 1, 3});
    CHECK(lay.num_blocks() == 3);
    CHECK(lay.total_rows() == 6);
    CHECK(lay.offset(0) == 0);
    CHECK(lay.offset(1) == 2);
    CHECK(lay.offset(2) == 3);
    CHECK_THROWS_AS(BlockLayout({2, 0}), StructuralError);
  }

  TEST_CASE("penalty vector expands per row and rejects bad entries") {
    const BlockLayout lay({2, 1});
    Vector rho(2);
    rho << 3.0, 0.5;
    const PenaltyVector pv(rho, lay);
    Vector expect(3);
    expect << 3.0, 3.0, 0.5;
    CHECK((pv.expanded() - expect).norm() == 0.0);
    CHECK_THROWS_AS(PenaltyVector(Vector::Ones(3), lay), StructuralError);
    Vector bad(2);
    bad << 1.0, 0.0;
    CHECK_THROWS_AS(PenaltyVector(bad, lay), StructuralError);
    bad << 1.0, std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(PenaltyVector(bad, lay), StructuralError);
  }

  TEST_CASE("block slicing round-trips") {
    const BlockLayout lay({2, 3});
    Vector w = Vector::LinSpaced(5, 1.0, 5.0);
    CHECK(block_slice(w, lay, 1)[0] == 3.0);
    assign_block(w, lay, 0, Vector::Constant(2, -1.0));
    CHECK(w[0] == -1.0);
    CHECK(w[2] == 3.0);
    CHECK_THROWS_AS(block_slice(w, lay, 2), StructuralError);
  }

  TEST_CASE("rel_residual is zero at the reference and scales with distance") {
    Reference ref{Vector::Constant(3, 1.0), Vector::Constant(1, 1.0)};
    SolverState s;
    s.x = ref.x;
    s.z = ref.z;
    CHECK(rel_residual(s, ref) == 0.0);
    s.z[0] = 3.0;  // distance 2 from a reference of norm 2
    CHECK(rel_residual(s, ref) == doctest::Approx(1.0));
  }

  TEST_CASE("validation catches mismatched blocks") {
    std::mt19937_64 rng(5);
    auto p = testing::random_quadratic(rng, 2);
    CHECK_NOTHROW(p.validate());
    p.blocks.emplace_back(Matrix::Ones(1, p.m + 1), Matrix::Ones(1, p.n), Vector::Ones(1));
    CHECK_THROWS_AS(p.validate(), StructuralError);
    CHECK_THROWS_AS(ConstraintBlock(Matrix::Ones(2, 2), Matrix::Ones(1, 2), Vector::Ones(2)), StructuralError);
  }

  TEST_CASE("stacked residual matches the dense stack") {
    std::mt19937_64 rng(6);
    const auto p = testing::random_quadratic(rng, 3);
    const auto st = stack_blocks(p);
    const Vector x = testing::gaussian_vector(rng, p.m);
    const Vector z = testing::gaussian_vector(rng, p.n);
    CHECK((p.residual(x, z) - (st.a * x + st.b * z - st.c)).norm() < 1e-12);
  }

  TEST_CASE("constraint scaling multiplies each block through") {
    std::mt19937_64 rng(7);
    const auto p = testing::random_quadratic(rng, 2);
    Vector beta(2);
    beta << 2.0, 0.25;
    const auto s = scale_constraints(p, beta);
    const Vector x = testing::gaussian_vector(rng, p.m);
    const Vector z = testing::gaussian_vector(rng, p.n);
    const auto lay = p.layout();
    const Vector r0 = p.residual(x, z);
    const Vector r1 = s.residual(x, z);
    for (Index j = 0; j < 2; ++j) {
      CHECK((block_slice(r1, lay, j) - beta[j] * block_slice(r0, lay, j)).norm() < 1e-12);
    }
  }

  TEST_CASE("rule context keeps a bounded newest-first history") {
    std::mt19937_64 rng(8);
    const auto p = testing::random_quadratic(rng, 1);
    RuleContext ctx(p, 3);
    for (int i = 0; i < 5; ++i) {
      ctx.push(Snapshot{Vector::Constant(1, double(i)), Vector::Zero(p.m), Vector::Zero(p.n), Vector(), Vector()});
    }
    CHECK(ctx.size() == 3);
    CHECK(ctx.at_lag(0).rho[0] == 4.0);
    CHECK(ctx.at_lag(2).rho[0] == 2.0);
    CHECK_FALSE(ctx.has_lag(3));
    CHECK_THROWS_AS(ctx.at_lag(3), StructuralError);
  }
}
