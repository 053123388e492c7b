#include "madmm/bench.hpp"

#include "doctest.h"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace madmm;

namespace {

std::filesystem::path fresh_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(dir);
  return dir;
}

}  // namespace

TEST_SUITE("bench") {
  TEST_CASE("rho grid parsing") {
    const auto g = RhoGrid::parse("1e-2:1e2:5:diag");
    CHECK(g.lo == 1e-2);
    CHECK(g.hi == 1e2);
    CHECK(g.count == 5);
    CHECK(g.diagonal);
    const auto pts = g.points();
    REQUIRE(pts.size() == 5);
    CHECK(pts[2].first == doctest::Approx(1.0));
    CHECK(pts[2].second == doctest::Approx(1.0));

    const auto full = RhoGrid::parse("1:100:3");
    CHECK_FALSE(full.diagonal);
    const auto fp = full.points();
    REQUIRE(fp.size() == 9);
    // Row-major with rho1 outer.
    CHECK(fp[1].first == doctest::Approx(1.0));
    CHECK(fp[1].second == doctest::Approx(10.0));
    CHECK(fp[3].first == doctest::Approx(10.0));

    CHECK_THROWS_AS(RhoGrid::parse("1:2"), StructuralError);
    CHECK_THROWS_AS(RhoGrid::parse("2:1:3"), StructuralError);
    CHECK_THROWS_AS(RhoGrid::parse("0:1:3"), StructuralError);
    CHECK_THROWS_AS(RhoGrid::parse("1:2:3:full"), StructuralError);
    CHECK_THROWS_AS(RhoGrid::parse("a:2:3"), StructuralError);
  }

  TEST_CASE("median conventions") {
    CHECK(median({4.0, 1.0, 2.0}) == 2.0);
    CHECK(median({4.0, 1.0, 2.0, 3.0}) == 2.5);
    CHECK(std::isinf(median({1.0, INFINITY, INFINITY})));
    CHECK_THROWS_AS(median({}), StructuralError);
  }

  TEST_CASE("initial penalty gives the first block rho1") {
    ProblemChoice choice;
    const auto rp = resolve_problem(choice);
    const auto pv = initial_penalty(rp.instance.problem, 0.5, 4.0);
    CHECK(pv[0] == 0.5);
    CHECK(pv[1] == 4.0);
  }

  TEST_CASE("unknown problems list the valid names") {
    ProblemChoice choice;
    choice.name = "nosuch";
    try {
      resolve_problem(choice);
      FAIL("expected an error");
    } catch (const StructuralError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("complex-quads") != std::string::npos);
      CHECK(msg.find("scaled-quads") != std::string::npos);
    }
  }

  TEST_CASE("records round-trip through CSV") {
    const auto dir = fresh_dir("madmm_unit_records");
    std::filesystem::create_directories(dir);
    std::vector<SweepRecord> recs{{"p", "mpsra", 1e-3, 2.5, 1, 0.125, 1e-6}, {"p", "mpsra", 1e-3, 2.5, 2, 1e-9, 2e-6}};
    const auto path = (dir / "mpsra.csv").string();
    {
      std::ofstream out(path);
      write_records(out, recs);
    }
    const auto back = read_records(path);
    REQUIRE(back.size() == 2);
    CHECK(back[1].rel_residual == doctest::Approx(1e-9));
    CHECK(back[0].rho2_0 == doctest::Approx(2.5));
    CHECK(back[1].iter == 2);
    std::ofstream(path) << "wrong,header\n";
    CHECK_THROWS_AS(read_records(path), StructuralError);
  }

  TEST_CASE("solve records stop at K rows and match the solver") {
    ProblemChoice choice;
    const auto rp = resolve_problem(choice);
    const auto rule = make_rule("mpsra");
    const auto out = solve_records(rp, *rule, 1.0, 1.0, 50);
    REQUIRE(out.records.size() == 50);
    CHECK(out.records.front().iter == 1);
    CHECK(out.records.back().iter == 50);
    CHECK(out.records.back().rel_residual < 1e-8);
    CHECK_FALSE(out.abort_message.has_value());
    for (std::size_t i = 1; i < out.records.size(); ++i) {
      CHECK(out.records[i].wall_time_s >= out.records[i - 1].wall_time_s);
    }
  }

  TEST_CASE("parallel_for covers every job and forwards failures") {
    std::vector<int> hits(37, 0);
    parallel_for(hits.size(), [&](std::size_t i) { hits[i] += 1; });
    for (int h : hits) CHECK(h == 1);
    CHECK_THROWS_AS(parallel_for(5, [](std::size_t i) {
                      if (i == 3) throw StructuralError("boom");
                    }),
                    StructuralError);
    CHECK(worker_count(1) == 1);
  }

  TEST_CASE("sweep output, report and determinism") {
    ProblemChoice choice;
    const auto rp = resolve_problem(choice);
    SweepSpec spec;
    spec.rules = {"fixed", "mpsra"};
    spec.grid = RhoGrid::parse("1e-2:1e2:3:diag");
    spec.iters = 20;
    spec.repeats = 2;
    const auto a = run_sweep(rp, spec);
    const auto b = run_sweep(rp, spec);
    CHECK(a.per_rule.at("mpsra").size() == 3u * 20u);
    CHECK(a.runtimes.size() == 2u * 3u * 2u);
    for (const auto& name : spec.rules) {
      const auto& ra = a.per_rule.at(name);
      const auto& rb = b.per_rule.at(name);
      REQUIRE(ra.size() == rb.size());
      for (std::size_t i = 0; i < ra.size(); ++i) CHECK(ra[i].rel_residual == rb[i].rel_residual);
    }

    const auto dir = fresh_dir("madmm_unit_sweep");
    write_sweep(dir.string(), a);
    CHECK(std::filesystem::exists(dir / "fixed.csv"));
    CHECK(std::filesystem::exists(dir / "mpsra.csv"));
    CHECK(std::filesystem::exists(dir / kRuntimeFile));

    const auto report = build_report(dir.string());
    CHECK(report.iter == 20);
    REQUIRE(report.rows.size() == 2);
    for (const auto& row : report.rows) {
      REQUIRE(row.at_rho_one.has_value());
      REQUIRE(row.median.has_value());
      REQUIRE(row.runtime_mean.has_value());
      const auto& recs = a.per_rule.at(row.rule);
      // Diagonal grid point 1 is rho0 = 1; its last record is the reported value.
      CHECK(*row.at_rho_one == doctest::Approx(recs[2 * 20 - 1].rel_residual).epsilon(1e-5));
    }
    const auto table = render_report_table(report);
    CHECK(table.find("mpsra") != std::string::npos);
    const auto csv = render_report_csv(report);
    CHECK(csv.find("fixed") != std::string::npos);

    const auto at5 = build_report(dir.string(), 5);
    CHECK(at5.iter == 5);

    const auto empty = fresh_dir("madmm_unit_empty");
    std::filesystem::create_directories(empty);
    CHECK_THROWS_AS(build_report(empty.string()), StructuralError);
  }

  TEST_CASE("a full grid needs two blocks") {
    ProblemChoice choice;
    choice.name = "scaled-quads";
    const auto rp = resolve_problem(choice);
    SweepSpec spec;
    spec.rules = {"fixed"};
    spec.grid = RhoGrid::parse("1:10:2");
    spec.iters = 2;
    spec.repeats = 1;
    CHECK_THROWS_AS(run_sweep(rp, spec), StructuralError);
  }
}
