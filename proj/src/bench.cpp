#include "madmm/bench.hpp"

#include "madmm/problem_io.hpp"
#include "madmm/spectral.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace madmm {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6e", v);
  return buf;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

double parse_double(const std::string& s, const std::string& what) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) throw StructuralError("cannot parse " + what + " from \"" + s + "\"");
  return v;
}

int parse_int(const std::string& s, const std::string& what) {
  char* end = nullptr;
  const long v = std::strtol(s.c_str(), &end, 10);
  if (s.empty() || end != s.c_str() + s.size()) throw StructuralError("cannot parse " + what + " from \"" + s + "\"");
  return static_cast<int>(v);
}

std::size_t rule_rank(const std::string& rule) {
  const auto& names = rule_names();
  const auto it = std::find(names.begin(), names.end(), rule);
  return static_cast<std::size_t>(it - names.begin());
}

bool is_one(double v) { return std::abs(v - 1.0) <= 1e-9; }

}  // namespace

RhoGrid RhoGrid::parse(const std::string& text) {
  const auto parts = split(text, ':');
  if (parts.size() != 3 && parts.size() != 4) {
    throw StructuralError("rho grid must look like lo:hi:count or lo:hi:count:diag, got \"" + text + "\"");
  }
  RhoGrid g;
  g.lo = parse_double(parts[0], "grid lower bound");
  g.hi = parse_double(parts[1], "grid upper bound");
  g.count = parse_int(parts[2], "grid count");
  g.diagonal = false;
  if (parts.size() == 4) {
    if (parts[3] != "diag") throw StructuralError("the optional fourth grid field must be \"diag\"");
    g.diagonal = true;
  }
  g.validate();
  return g;
}

void RhoGrid::validate() const {
  if (!(lo > 0.0) || !std::isfinite(hi) || !(lo < hi)) throw StructuralError("rho grid needs 0 < lo < hi");
  if (count < 1) throw StructuralError("rho grid needs at least one point");
}

std::vector<std::pair<double, double>> RhoGrid::points() const {
  validate();
  const auto axis = log_grid(lo, hi, count);
  std::vector<std::pair<double, double>> out;
  if (diagonal) {
    for (double v : axis) out.emplace_back(v, v);
  } else {
    for (double a : axis) {
      for (double b : axis) out.emplace_back(a, b);
    }
  }
  return out;
}

const std::vector<std::string>& builtin_problem_names() {
  static const std::vector<std::string> names{"complex-quads", "scaled-quads", "ct"};
  return names;
}

ResolvedProblem resolve_problem(const ProblemChoice& choice) {
  ExperimentSpec spec;
  spec.seed = choice.seed;
  spec.placement = choice.placement;
  spec.ct_reference_iters = choice.ct_reference_iters;
  if (choice.tv_weight) spec.ct.tv_weight = *choice.tv_weight;
  if (choice.image_size) spec.ct.side = *choice.image_size;
  spec.ct.seed = choice.seed;

  if (choice.name == "complex-quads") {
    spec.kind = ExperimentKind::complex_quads;
  } else if (choice.name == "scaled-quads") {
    spec.kind = ExperimentKind::scaled_quads;
    spec.m_power = choice.m_power;
  } else if (choice.name == "ct") {
    spec.kind = ExperimentKind::l1_tv_ct;
  } else if (choice.name.size() > 5 && choice.name.ends_with(".json")) {
    ProblemDocument doc = load_problem(choice.name);
    if (doc.ct) {
      CtSpec ct = *doc.ct;
      if (choice.tv_weight) ct.tv_weight = *choice.tv_weight;
      spec.kind = ExperimentKind::l1_tv_ct;
      spec.ct = ct;
      return ResolvedProblem{doc.name, make_experiment(spec)};
    }
    MulticonstraintProblem p = std::move(*doc.quadratic);
    if (choice.placement == LinearTermPlacement::literal_x) {
      throw StructuralError("--r-on-x applies to the built-in quadratic benchmarks only");
    }
    Reference ref = reference_solution(p);
    return ResolvedProblem{doc.name, ExperimentInstance{std::move(p), std::move(ref), std::nullopt}};
  } else {
    std::string valid;
    for (const auto& n : builtin_problem_names()) valid += n + ", ";
    throw StructuralError("unknown problem \"" + choice.name + "\" (valid: " + valid + "or a path ending in .json)");
  }
  return ResolvedProblem{spec.label(), make_experiment(spec)};
}

PenaltyVector initial_penalty(const MulticonstraintProblem& problem, double rho1, double rho2) {
  const BlockLayout layout = problem.layout();
  Vector rho = Vector::Constant(layout.num_blocks(), rho2);
  rho[0] = rho1;
  return PenaltyVector(std::move(rho), layout);
}

std::string format_record(const SweepRecord& r) {
  return r.problem + "," + r.rule + "," + fmt(r.rho1_0) + "," + fmt(r.rho2_0) + "," + std::to_string(r.iter) + "," +
         fmt(r.rel_residual) + "," + fmt(r.wall_time_s);
}

void write_records(std::ostream& out, const std::vector<SweepRecord>& records, bool header) {
  if (header) out << kRecordHeader << '\n';
  for (const auto& r : records) out << format_record(r) << '\n';
}

std::vector<SweepRecord> read_records(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw StructuralError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line != kRecordHeader) {
    throw StructuralError(path + " does not start with the record header");
  }
  std::vector<SweepRecord> out;
  long lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 7) throw StructuralError(path + ":" + std::to_string(lineno) + ": expected 7 fields");
    out.push_back(SweepRecord{f[0], f[1], parse_double(f[2], "rho1_0"), parse_double(f[3], "rho2_0"),
                              parse_int(f[4], "iter"), parse_double(f[5], "rel_residual"),
                              parse_double(f[6], "wall_time_s")});
  }
  return out;
}

SolveOutcome solve_records(const ResolvedProblem& problem, const PenaltyRule& rule, double rho1, double rho2, int iters,
                           const CgConfig& cg) {
  const auto& inst = problem.instance;
  RunOptions opts;
  opts.iters = iters;
  opts.reference = inst.reference;
  opts.cg = cg;
  opts.keep_trace = true;

  SolveOutcome out;
  const std::string rule_name(rule.name());
  auto emit = [&](const Reference& ref, const std::vector<SolverState>& trace, const std::vector<double>& elapsed) {
    for (std::size_t k = 0; k < trace.size(); ++k) {
      out.records.push_back(SweepRecord{problem.label, rule_name, rho1, rho2, static_cast<int>(k + 1),
                                        rel_residual(trace[k], ref), elapsed[k]});
    }
  };
  try {
    const SolveReport rep = run(inst.problem, rule, initial_penalty(inst.problem, rho1, rho2), opts);
    out.wall_time_s = rep.wall_time_s;
    for (std::size_t k = 0; k < rep.rel_residual.size(); ++k) {
      out.records.push_back(SweepRecord{problem.label, rule_name, rho1, rho2, static_cast<int>(k + 1),
                                        rep.rel_residual[k], rep.elapsed_s[k]});
    }
  } catch (const IterationAbort& e) {
    // Rerun up to the last finite iterate so the emitted rows stay exact.
    out.abort_message = e.what();
    if (e.iteration() > 0) {
      opts.iters = static_cast<int>(e.iteration());
      const SolveReport rep = run(inst.problem, rule, initial_penalty(inst.problem, rho1, rho2), opts);
      out.wall_time_s = rep.wall_time_s;
      emit(inst.reference, rep.iterates, rep.elapsed_s);
    }
  }
  return out;
}

unsigned worker_count(std::size_t jobs) {
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("MADMM_THREADS")) {
    char* end = nullptr;
    const long cap = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && cap > 0) n = std::min(n, static_cast<unsigned>(cap));
  }
  if (jobs < n) n = static_cast<unsigned>(std::max<std::size_t>(jobs, 1));
  return n;
}

void parallel_for(std::size_t jobs, const std::function<void(std::size_t)>& task) {
  if (jobs == 0) return;
  const unsigned workers = worker_count(jobs);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto body = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= jobs) return;
      try {
        task(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mu);
        if (!failure) failure = std::current_exception();
        next.store(jobs);
        return;
      }
    }
  };
  if (workers == 1) {
    body();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(body);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
}

SweepResult run_sweep(const ResolvedProblem& problem, const SweepSpec& spec) {
  if (spec.rules.empty()) throw StructuralError("sweep needs at least one rule");
  if (spec.iters < 1) throw StructuralError("sweep needs at least one iteration");
  if (spec.repeats < 1) throw StructuralError("repeats must be positive");
  const auto points = spec.grid.points();
  if (!spec.grid.diagonal && problem.instance.problem.num_blocks() != 2) {
    throw StructuralError("a full two-axis grid needs a problem with exactly two constraint blocks");
  }
  std::vector<std::unique_ptr<PenaltyRule>> rules;
  for (const auto& name : spec.rules) rules.push_back(make_rule(name, spec.rule_config));

  const std::size_t per_rule = points.size();
  const std::size_t jobs = rules.size() * per_rule;
  std::vector<std::vector<SweepRecord>> rows(jobs);
  std::vector<std::vector<double>> times(jobs);

  parallel_for(jobs, [&](std::size_t job) {
    const std::size_t r = job / per_rule;
    const auto [rho1, rho2] = points[job % per_rule];
    for (int rep = 0; rep < spec.repeats; ++rep) {
      SolveOutcome out = solve_records(problem, *rules[r], rho1, rho2, spec.iters, spec.cg);
      times[job].push_back(out.wall_time_s);
      if (rep > 0) continue;
      for (int k = static_cast<int>(out.records.size()); k < spec.iters; ++k) {
        out.records.push_back(SweepRecord{problem.label, spec.rules[r], rho1, rho2, k + 1,
                                          std::numeric_limits<double>::infinity(), out.wall_time_s});
      }
      rows[job] = std::move(out.records);
    }
  });

  SweepResult result;
  result.rule_order = spec.rules;
  for (std::size_t job = 0; job < jobs; ++job) {
    const std::string& rule = spec.rules[job / per_rule];
    auto& dst = result.per_rule[rule];
    dst.insert(dst.end(), rows[job].begin(), rows[job].end());
    const auto [rho1, rho2] = points[job % per_rule];
    for (std::size_t rep = 0; rep < times[job].size(); ++rep) {
      result.runtimes.push_back(
          RuntimeRecord{problem.label, rule, static_cast<int>(rep + 1), rho1, rho2, times[job][rep]});
    }
  }
  return result;
}

void write_sweep(const std::string& dir, const SweepResult& result) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) throw StructuralError("cannot create output directory " + dir);
  for (const auto& rule : result.rule_order) {
    const std::string path = (std::filesystem::path(dir) / (rule + ".csv")).string();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw StructuralError("cannot write " + path);
    write_records(out, result.per_rule.at(rule));
  }
  const std::string path = (std::filesystem::path(dir) / kRuntimeFile).string();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw StructuralError("cannot write " + path);
  out << kRuntimeHeader << '\n';
  for (const auto& r : result.runtimes) {
    out << r.problem << ',' << r.rule << ',' << r.repeat << ',' << fmt(r.rho1_0) << ',' << fmt(r.rho2_0) << ','
        << fmt(r.wall_time_s) << '\n';
  }
}

double median(std::vector<double> values) {
  if (values.empty()) throw StructuralError("median of an empty set");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

namespace {

std::map<std::pair<std::string, std::string>, std::vector<double>> read_runtimes(const std::string& path) {
  std::map<std::pair<std::string, std::string>, std::vector<double>> out;
  std::ifstream in(path);
  if (!in) return out;
  std::string line;
  if (!std::getline(in, line) || line != kRuntimeHeader) {
    throw StructuralError(path + " does not start with the runtime header");
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 6) throw StructuralError(path + ": expected 6 fields per row");
    out[{f[0], f[1]}].push_back(parse_double(f[5], "wall_time_s"));
  }
  return out;
}

}  // namespace

Report build_report(const std::string& dir, std::optional<int> iter) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw StructuralError("report directory " + dir + " does not exist");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".csv" && entry.path().filename() != kRuntimeFile) {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  std::vector<SweepRecord> all;
  for (const auto& f : files) {
    auto recs = read_records(f.string());
    all.insert(all.end(), recs.begin(), recs.end());
  }
  if (all.empty()) throw StructuralError("report directory " + dir + " holds no sweep records");

  Report report;
  report.iter = 0;
  if (iter) {
    report.iter = *iter;
  } else {
    for (const auto& r : all) report.iter = std::max(report.iter, r.iter);
  }

  std::map<std::pair<std::string, std::string>, ReportRow> rows;
  std::map<std::pair<std::string, std::string>, std::vector<double>> finals;
  for (const auto& r : all) {
    auto& row = rows[{r.problem, r.rule}];
    row.problem = r.problem;
    row.rule = r.rule;
    if (r.iter != report.iter) continue;
    finals[{r.problem, r.rule}].push_back(r.rel_residual);
    if (is_one(r.rho1_0) && is_one(r.rho2_0)) row.at_rho_one = r.rel_residual;
  }
  const auto runtimes = read_runtimes((fs::path(dir) / kRuntimeFile).string());
  for (auto& [key, row] : rows) {
    if (auto it = finals.find(key); it != finals.end()) row.median = median(it->second);
    if (auto it = runtimes.find(key); it != runtimes.end() && !it->second.empty()) {
      const auto& t = it->second;
      double mean = 0.0;
      for (double v : t) mean += v;
      mean /= static_cast<double>(t.size());
      double var = 0.0;
      for (double v : t) var += (v - mean) * (v - mean);
      row.runtime_mean = mean;
      row.runtime_std = t.size() > 1 ? std::sqrt(var / static_cast<double>(t.size() - 1)) : 0.0;
    }
  }
  for (auto& [key, row] : rows) report.rows.push_back(row);
  std::stable_sort(report.rows.begin(), report.rows.end(), [](const ReportRow& a, const ReportRow& b) {
    if (a.problem != b.problem) return a.problem < b.problem;
    return rule_rank(a.rule) < rule_rank(b.rule);
  });
  return report;
}

namespace {

using Field = std::optional<double> ReportRow::*;

/// Index of the smallest present value among rows[lo, hi) for one column.
std::optional<std::size_t> best_in(const std::vector<ReportRow>& rows, std::size_t lo, std::size_t hi, Field field) {
  std::optional<std::size_t> best;
  for (std::size_t i = lo; i < hi; ++i) {
    const auto& v = rows[i].*field;
    if (!v || std::isnan(*v)) continue;
    if (!best || *v < *(rows[*best].*field)) best = i;
  }
  return best;
}

template <typename Visit>
void for_each_problem(const std::vector<ReportRow>& rows, Visit visit) {
  std::size_t lo = 0;
  while (lo < rows.size()) {
    std::size_t hi = lo;
    while (hi < rows.size() && rows[hi].problem == rows[lo].problem) ++hi;
    visit(lo, hi);
    lo = hi;
  }
}

}  // namespace

std::string render_report_table(const Report& report) {
  std::ostringstream out;
  struct Section {
    std::string title;
    Field field;
  };
  const std::vector<Section> sections{
      {"Relative residual at k=" + std::to_string(report.iter) + " with rho1_0 = rho2_0 = 1", &ReportRow::at_rho_one},
      {"Median relative residual at k=" + std::to_string(report.iter) + " over the grid", &ReportRow::median},
      {"Run time, mean +- standard deviation [s]", &ReportRow::runtime_mean}};
  for (const auto& sec : sections) {
    out << sec.title << "  (* marks the lowest per problem)\n";
    for_each_problem(report.rows, [&](std::size_t lo, std::size_t hi) {
      const auto best = best_in(report.rows, lo, hi, sec.field);
      out << "  " << report.rows[lo].problem << '\n';
      for (std::size_t i = lo; i < hi; ++i) {
        const auto& row = report.rows[i];
        char line[160];
        const auto& v = row.*sec.field;
        std::string cell = v ? fmt(*v) : "n/a";
        if (v && sec.field == &ReportRow::runtime_mean) cell += " +- " + fmt(row.runtime_std.value_or(0.0));
        std::snprintf(line, sizeof line, "    %-8s %s%s\n", row.rule.c_str(), cell.c_str(),
                      best && *best == i ? " *" : "");
        out << line;
      }
    });
    out << '\n';
  }
  return out.str();
}

std::string render_report_csv(const Report& report) {
  std::ostringstream out;
  out << "problem,rule,iter,at_rho_one,median,runtime_mean_s,runtime_std_s,best_at_rho_one,best_median,best_runtime\n";
  for_each_problem(report.rows, [&](std::size_t lo, std::size_t hi) {
    const auto b1 = best_in(report.rows, lo, hi, &ReportRow::at_rho_one);
    const auto b2 = best_in(report.rows, lo, hi, &ReportRow::median);
    const auto b3 = best_in(report.rows, lo, hi, &ReportRow::runtime_mean);
    for (std::size_t i = lo; i < hi; ++i) {
      const auto& r = report.rows[i];
      auto cell = [](const std::optional<double>& v) { return v ? fmt(*v) : std::string(); };
      out << r.problem << ',' << r.rule << ',' << report.iter << ',' << cell(r.at_rho_one) << ',' << cell(r.median)
          << ',' << cell(r.runtime_mean) << ',' << cell(r.runtime_std) << ',' << (b1 && *b1 == i) << ','
          << (b2 && *b2 == i) << ',' << (b3 && *b3 == i) << '\n';
    }
  });
  return out.str();
}

}  // namespace madmm
