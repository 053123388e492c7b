#pragma once

// Benchmark harness shared by the command-line tool and the acceptance suite:
// problem resolution, rho grids, per-iteration CSV records, parallel sweeps
// and the summary report built back from the CSV files alone.

#include "madmm/experiments.hpp"
#include "madmm/rules.hpp"

#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace madmm {

inline constexpr const char* kRecordHeader = "problem,rule,rho1_0,rho2_0,iter,rel_residual,wall_time_s";
inline constexpr const char* kRuntimeHeader = "problem,rule,repeat,rho1_0,rho2_0,wall_time_s";
inline constexpr const char* kRuntimeFile = "runtime.csv";

/// Log-spaced initial penalties, written lo:hi:count[:diag] on the command line.
struct RhoGrid {
  double lo = 1e-3;
  double hi = 1e3;
  int count = 25;
  bool diagonal = true;

  static RhoGrid parse(const std::string& text);
  void validate() const;
  /// (rho1, rho2) pairs; the full grid is row-major with rho1 outer.
  std::vector<std::pair<double, double>> points() const;
};

/// How a --problem argument is turned into an instance.
struct ProblemChoice {
  std::string name = "complex-quads";  // complex-quads | scaled-quads | ct | path to JSON
  std::uint64_t seed = 1;
  int m_power = 2;
  std::optional<double> tv_weight;
  std::optional<Index> image_size;
  int ct_reference_iters = 2000;
  LinearTermPlacement placement = LinearTermPlacement::on_z;
};

struct ResolvedProblem {
  std::string label;
  ExperimentInstance instance;
};

/// Throws StructuralError naming the valid choices for an unknown name.
ResolvedProblem resolve_problem(const ProblemChoice& choice);
const std::vector<std::string>& builtin_problem_names();

/// rho_0 = rho1 and every later block gets rho2 (one block: rho1 only).
PenaltyVector initial_penalty(const MulticonstraintProblem& problem, double rho1, double rho2);

struct SweepRecord {
  std::string problem;
  std::string rule;
  double rho1_0 = 1.0;
  double rho2_0 = 1.0;
  int iter = 0;
  double rel_residual = 0.0;
  double wall_time_s = 0.0;
};

std::string format_record(const SweepRecord& r);
void write_records(std::ostream& out, const std::vector<SweepRecord>& records, bool header = true);
/// Parses a CSV written by write_records; throws StructuralError on a bad header or row.
std::vector<SweepRecord> read_records(const std::string& path);

struct SolveOutcome {
  std::vector<SweepRecord> records;
  double wall_time_s = 0.0;
  /// Set when the iterates stopped being finite; records stop before that iteration.
  std::optional<std::string> abort_message;
};

SolveOutcome solve_records(const ResolvedProblem& problem, const PenaltyRule& rule, double rho1, double rho2, int iters,
                           const CgConfig& cg = {});

/// Worker count for `jobs` independent tasks: hardware threads capped by
/// MADMM_THREADS (when set to a positive integer) and by `jobs`.
unsigned worker_count(std::size_t jobs);
/// Runs task(i) for i in [0, jobs) on a pool of worker_count(jobs) threads.
/// The first exception thrown by any task is rethrown after all workers stop.
void parallel_for(std::size_t jobs, const std::function<void(std::size_t)>& task);

struct SweepSpec {
  std::vector<std::string> rules;
  RhoGrid grid;
  int iters = 50;
  int repeats = 10;
  RuleConfig rule_config;
  CgConfig cg;
};

struct RuntimeRecord {
  std::string problem;
  std::string rule;
  int repeat = 0;
  double rho1_0 = 1.0;
  double rho2_0 = 1.0;
  double wall_time_s = 0.0;
};

struct SweepResult {
  /// rule -> grid points x iterations, in grid order. A point whose iterates
  /// blew up is padded with +inf residuals so every point has `iters` rows.
  std::map<std::string, std::vector<SweepRecord>> per_rule;
  std::vector<RuntimeRecord> runtimes;
  std::vector<std::string> rule_order;
};

SweepResult run_sweep(const ResolvedProblem& problem, const SweepSpec& spec);
/// Writes <dir>/<rule>.csv and <dir>/runtime.csv; creates the directory.
void write_sweep(const std::string& dir, const SweepResult& result);

/// Median with the mean of the two middle values for even counts.
double median(std::vector<double> values);

struct ReportRow {
  std::string problem;
  std::string rule;
  std::optional<double> at_rho_one;
  std::optional<double> median;
  std::optional<double> runtime_mean;
  std::optional<double> runtime_std;
};

struct Report {
  int iter = 0;
  std::vector<ReportRow> rows;  // grouped by problem, rules in canonical order
};

/// Reads every rule CSV in `dir` (plus runtime.csv when present). `iter`
/// defaults to the largest iteration found. Throws StructuralError when the
/// directory holds no records.
Report build_report(const std::string& dir, std::optional<int> iter = std::nullopt);
std::string render_report_table(const Report& report);
std::string render_report_csv(const Report& report);

}  // namespace madmm
