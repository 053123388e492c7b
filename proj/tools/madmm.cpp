// Command-line front end: single solves, rho-grid sweeps, eigenvalue
// surfaces and summary reports. Exit codes: 0 success, 1 bad input
// (unknown rule or problem, malformed arguments, unwritable output),
// 2 numerical abort.

#include "madmm/bench.hpp"
#include "madmm/spectral.hpp"

#include "CLI11.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 1;
constexpr int kExitNumerical = 2;

struct ProblemFlags {
  std::string problem = "complex-quads";
  std::uint64_t seed = 1;
  int m_power = 2;
  double tv_weight = 0.0;
  long image_size = 0;
  int ct_reference_iters = 2000;
  bool r_on_x = false;

  void attach(CLI::App* app) {
    app->add_option("--problem", problem, "complex-quads | scaled-quads | ct | path to a .json problem")
        ->capture_default_str();
    app->add_option("--seed", seed, "seed for generated data")->capture_default_str();
    app->add_option("--m-power", m_power, "block scale exponent for scaled-quads")->capture_default_str();
    app->add_option("--tv-weight", tv_weight, "TV weight for ct (default 3)");
    app->add_option("--image-size", image_size, "image side for ct (default 64)");
    app->add_option("--ct-ref-iters", ct_reference_iters, "MpSRA iterations for the ct reference")
        ->capture_default_str();
    app->add_flag("--r-on-x", r_on_x, "place the quadratic benchmarks' r vector on x instead of z");
  }

  madmm::ProblemChoice choice() const {
    madmm::ProblemChoice c;
    c.name = problem;
    c.seed = seed;
    c.m_power = m_power;
    if (tv_weight > 0.0) c.tv_weight = tv_weight;
    if (image_size > 0) c.image_size = image_size;
    c.ct_reference_iters = ct_reference_iters;
    c.placement = r_on_x ? madmm::LinearTermPlacement::literal_x : madmm::LinearTermPlacement::on_z;
    return c;
  }
};

std::vector<std::string> parse_rule_list(const std::string& text) {
  std::vector<std::string> out;
  if (text == "all") return madmm::rule_names();
  std::string cur;
  for (char ch : text + ",") {
    if (ch == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  for (const auto& r : out) madmm::make_rule(r);  // validates the name
  if (out.empty()) throw madmm::StructuralError("no rules given");
  return out;
}

void write_images(const std::string& dir, const madmm::ExperimentInstance& inst, const madmm::Vector& recon) {
  std::filesystem::create_directories(dir);
  const auto side = inst.ct->spec.side;
  const auto base = std::filesystem::path(dir);
  madmm::write_pgm16((base / "ground_truth.pgm").string(), inst.ct->ground_truth, side);
  madmm::write_image_csv((base / "ground_truth.csv").string(), inst.ct->ground_truth, side);
  madmm::write_pgm16((base / "reconstruction.pgm").string(), recon, side);
  madmm::write_image_csv((base / "reconstruction.csv").string(), recon, side);
}

int cmd_solve(const ProblemFlags& pf, const std::string& rule_name, double rho0, double rho0_second, int iters,
              const std::string& images) {
  const auto rule = madmm::make_rule(rule_name);
  if (iters < 1) throw madmm::StructuralError("--iters must be at least 1");
  const auto problem = madmm::resolve_problem(pf.choice());
  const double rho2 = rho0_second > 0.0 ? rho0_second : rho0;
  const auto out = madmm::solve_records(problem, *rule, rho0, rho2, iters);
  madmm::write_records(std::cout, out.records);
  std::cout.flush();
  if (out.abort_message) {
    std::cerr << "numerical abort: " << *out.abort_message << '\n';
    return kExitNumerical;
  }
  if (!images.empty()) {
    if (!problem.instance.ct) throw madmm::StructuralError("--images needs the ct problem");
    madmm::RunOptions opts;
    opts.iters = iters;
    const auto rep = madmm::run(problem.instance.problem, *rule,
                                madmm::initial_penalty(problem.instance.problem, rho0, rho2), opts);
    write_images(images, problem.instance, rep.final_state.x);
  }
  return kExitOk;
}

int cmd_sweep(const ProblemFlags& pf, const std::string& rules, const std::string& grid_text, bool grid_given, int iters,
              int repeats, const std::string& out_dir) {
  madmm::SweepSpec spec;
  spec.rules = parse_rule_list(rules);
  spec.iters = iters;
  spec.repeats = repeats;
  if (out_dir.empty()) throw madmm::StructuralError("--out is required for sweep");
  const auto problem = madmm::resolve_problem(pf.choice());
  if (grid_given) {
    spec.grid = madmm::RhoGrid::parse(grid_text);
  } else if (problem.instance.ct) {
    spec.grid = madmm::RhoGrid{1e-2, 1e2, 9, true};
  } else {
    spec.grid = madmm::RhoGrid{1e-3, 1e3, 25, true};
  }
  const auto result = madmm::run_sweep(problem, spec);
  madmm::write_sweep(out_dir, result);
  std::cerr << "wrote " << result.rule_order.size() << " rule files and " << madmm::kRuntimeFile << " to " << out_dir
            << '\n';
  return kExitOk;
}

int cmd_eigsurface(const ProblemFlags& pf, const std::string& grid_text, const std::string& out_path) {
  const auto grid = madmm::RhoGrid::parse(grid_text);
  const auto problem = madmm::resolve_problem(pf.choice());
  const auto& p = problem.instance.problem;
  if (!p.is_quadratic()) throw madmm::StructuralError("eigsurface needs a quadratic problem");
  if (p.num_blocks() != 2) throw madmm::StructuralError("eigsurface needs exactly two constraint blocks");
  const auto axis = madmm::log_grid(grid.lo, grid.hi, grid.count);
  const auto surf = madmm::radius_surface(p, axis, axis);

  std::ofstream file;
  if (!out_path.empty()) {
    file.open(out_path, std::ios::binary);
    if (!file) throw madmm::StructuralError("cannot write " + out_path);
  }
  std::ostream& out = out_path.empty() ? std::cout : file;
  out << "rho1,rho2,mag,angle\n";
  char buf[128];
  for (std::size_t i = 0; i < axis.size(); ++i) {
    for (std::size_t j = 0; j < axis.size(); ++j) {
      if (grid.diagonal && i != j) continue;
      const auto ii = static_cast<Eigen::Index>(i);
      const auto jj = static_cast<Eigen::Index>(j);
      std::snprintf(buf, sizeof buf, "%.6e,%.6e,%.6e,%.6e\n", axis[i], axis[j], surf.magnitude(ii, jj),
                    surf.angle(ii, jj));
      out << buf;
    }
  }
  return kExitOk;
}

int cmd_report(const std::string& dir, int iter, const std::string& format) {
  const auto report = madmm::build_report(dir, iter > 0 ? std::optional<int>(iter) : std::nullopt);
  if (format == "csv") {
    std::cout << madmm::render_report_csv(report);
  } else {
    std::cout << madmm::render_report_table(report);
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multiparameter ADMM benchmark harness"};
  app.require_subcommand(1);
  std::string rule_list_help = "one of:";
  for (const auto& r : madmm::rule_names()) rule_list_help += " " + r;

  ProblemFlags solve_pf;
  std::string solve_rule = "mpsra";
  double solve_rho0 = 1.0;
  double solve_rho0_second = 0.0;
  int solve_iters = 50;
  std::string solve_images;
  auto* solve = app.add_subcommand("solve", "run one solve and print per-iteration CSV records");
  solve_pf.attach(solve);
  solve->add_option("--rule", solve_rule, rule_list_help)->capture_default_str();
  solve->add_option("--rho0", solve_rho0, "initial penalty for every block")->capture_default_str();
  solve->add_option("--rho0-second", solve_rho0_second, "initial penalty for blocks after the first");
  solve->add_option("--iters", solve_iters, "iterations K")->capture_default_str();
  solve->add_option("--images", solve_images, "directory for ground-truth and reconstruction images (ct)");

  ProblemFlags sweep_pf;
  std::string sweep_rules = "all";
  std::string sweep_grid;
  int sweep_iters = 50;
  int sweep_repeats = 10;
  std::string sweep_out;
  auto* sweep = app.add_subcommand("sweep", "run rules over a grid of initial penalties");
  sweep_pf.attach(sweep);
  sweep->add_option("--rules,--rule", sweep_rules, "comma separated rule names or all")->capture_default_str();
  auto* grid_opt = sweep->add_option("--rho-grid", sweep_grid, "lo:hi:count[:diag]");
  sweep->add_option("--iters", sweep_iters, "iterations K")->capture_default_str();
  sweep->add_option("--repeats", sweep_repeats, "timed repeats per grid point")->capture_default_str();
  sweep->add_option("--out", sweep_out, "output directory")->required();

  ProblemFlags eig_pf;
  std::string eig_grid = "1e-3:1e3:61";
  std::string eig_out;
  auto* eig = app.add_subcommand("eigsurface", "dominant eigenvalue of the iteration matrix over a rho grid");
  eig_pf.attach(eig);
  eig->add_option("--rho-grid", eig_grid, "lo:hi:count[:diag]")->capture_default_str();
  eig->add_option("--out", eig_out, "output CSV (default standard output)");

  std::string report_dir;
  int report_iter = 0;
  std::string report_format = "table";
  auto* report = app.add_subcommand("report", "summarize a sweep directory");
  report->add_option("dir,--out,--dir", report_dir, "sweep directory")->required();
  report->add_option("--iters", report_iter, "iteration to report (default: last)");
  report->add_option("--format", report_format, "csv or table")
      ->check(CLI::IsMember({"csv", "table"}))
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitInput;
  }

  try {
    if (*solve) return cmd_solve(solve_pf, solve_rule, solve_rho0, solve_rho0_second, solve_iters, solve_images);
    if (*sweep) {
      return cmd_sweep(sweep_pf, sweep_rules, sweep_grid, grid_opt->count() > 0, sweep_iters, sweep_repeats,
                       sweep_out);
    }
    if (*eig) return cmd_eigsurface(eig_pf, eig_grid, eig_out);
    if (*report) return cmd_report(report_dir, report_iter, report_format);
  } catch (const madmm::StructuralError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const madmm::NumericalError& e) {
    std::cerr << "numerical abort: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  }
  return kExitInput;
}
