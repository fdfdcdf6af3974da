// Command-line front end: generate synthetic grids, run the consensus
// solvers with trace output, or solve exactly via branch-and-bound.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "ad3/generator.hpp"
#include "ad3/graph.hpp"
#include "ad3/solver.hpp"

namespace {

struct Options {
  std::string input;
  std::string output;
  std::string trace;
  std::string algorithm = "ad3";
  double eta = 1.0;
  bool no_eta_adapt = false;
  int max_iters = 1000;
  double tol = 1e-6;
  int inner_iters = 10;
  bool no_cache = false;
  bool exact = false;
  bool require_convergence = false;
  int threads = 1;
  std::uint64_t seed = 0;
  // generator flags
  std::string family = "ising";
  int rows = 4;
  int cols = 4;
  int num_states = 3;
  double rho = 1.0;
};

void add_solver_flags(CLI::App* cmd, Options* opt) {
  cmd->add_option("--input", opt->input, "factor graph file to load")
      ->required();
  cmd->add_option("--output", opt->output, "write the solved assignment here");
  cmd->add_option("--trace", opt->trace, "per-iteration CSV trace path");
  cmd->add_option("--algorithm", opt->algorithm, "ad3, psg, or both")
      ->check(CLI::IsMember({"ad3", "psg", "both"}));
  cmd->add_option("--eta", opt->eta, "penalty / initial step size");
  cmd->add_flag("--no-eta-adapt", opt->no_eta_adapt,
                "disable residual-balancing eta adaptation");
  cmd->add_option("--max-iters", opt->max_iters, "iteration cap");
  cmd->add_option("--tol", opt->tol, "residual stopping tolerance");
  cmd->add_option("--inner-iters", opt->inner_iters,
                  "active-set iterations per subproblem");
  cmd->add_flag("--no-cache", opt->no_cache, "disable subproblem caching");
  cmd->add_flag("--require-convergence", opt->require_convergence,
                "exit 2 unless the solver converges or certifies");
  cmd->add_option("--threads", opt->threads, "broadcast worker threads");
  cmd->add_option("--seed", opt->seed, "seed (reserved for solver use)");
}

ad3::FactorGraph load_graph(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open input file: " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return ad3::parse_graph(buffer.str());
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open output file: " + path);
  out << content;
}

std::string format_value(double value) {
  if (value == ad3::kNegInf) return "-inf";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", value);
  return buf;
}

std::string assignment_text(const ad3::Assignment& assignment) {
  std::string out;
  for (std::size_t i = 0; i < assignment.states.size(); ++i) {
    if (i > 0) out += ' ';
    out += std::to_string(assignment.states[i]);
  }
  out += '\n';
  return out;
}

// Runs one algorithm, prints the summary line, writes the trace; returns
// whether the run converged or certified.
bool run_one(const ad3::FactorGraph& graph, const Options& opt,
             ad3::Algorithm algorithm, const std::string& trace_path,
             ad3::SolveReport* out_report) {
  ad3::SolverConfig config;
  config.algorithm = algorithm;
  config.eta = opt.eta;
  config.eta_adapt = !opt.no_eta_adapt;
  config.max_iters = opt.max_iters;
  config.residual_tol = opt.tol;
  config.subgrad_eta0 = opt.eta;
  config.inner_iters = opt.inner_iters;
  config.caching = !opt.no_cache;
  config.threads = opt.threads;
  config.seed = opt.seed;

  const auto start = std::chrono::steady_clock::now();
  ad3::SolveReport report = algorithm == ad3::Algorithm::kAd3
                                ? ad3::run_ad3(graph, config)
                                : ad3::run_subgradient(graph, config);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();

  const char* name = algorithm == ad3::Algorithm::kAd3 ? "ad3" : "psg";
  std::printf("%s status=%s dual=%s primal=%s iters=%d time=%.3fs\n", name,
              ad3::solve_status_name(report.status),
              format_value(report.best_dual).c_str(),
              format_value(report.best_primal_value).c_str(),
              report.iterations, seconds);
  if (!trace_path.empty()) {
    write_file(trace_path, ad3::trace_to_csv(report.trace));
  }
  const bool ok = report.status == ad3::SolveStatus::kConverged ||
                  report.status == ad3::SolveStatus::kCertifiedOptimal;
  *out_report = std::move(report);
  return ok;
}

int run_solve(const Options& opt) {
  const ad3::FactorGraph graph = load_graph(opt.input);

  if (opt.exact) {
    ad3::SolverConfig config;
    config.eta = opt.eta;
    config.eta_adapt = !opt.no_eta_adapt;
    config.max_iters = opt.max_iters;
    config.residual_tol = opt.tol;
    config.inner_iters = opt.inner_iters;
    config.caching = !opt.no_cache;
    config.threads = opt.threads;
    const auto start = std::chrono::steady_clock::now();
    const ad3::MapResult result = ad3::branch_and_bound(graph, config);
    const double seconds = std::chrono::duration<double>(
                               std::chrono::steady_clock::now() - start)
                               .count();
    std::printf("exact status=OPTIMAL dual=%s primal=%s iters=0 time=%.3fs\n",
                format_value(result.value).c_str(),
                format_value(result.value).c_str(), seconds);
    if (!opt.output.empty()) {
      write_file(opt.output, assignment_text(result.assignment));
    }
    return 0;
  }

  bool converged = true;
  ad3::SolveReport report;
  if (opt.algorithm == "both") {
    // two runs, two traces
    std::string ad3_trace;
    std::string psg_trace;
    if (!opt.trace.empty()) {
      ad3_trace = opt.trace + ".ad3.csv";
      psg_trace = opt.trace + ".psg.csv";
    }
    converged &= run_one(graph, opt, ad3::Algorithm::kAd3, ad3_trace, &report);
    ad3::SolveReport psg_report;
    converged &= run_one(graph, opt, ad3::Algorithm::kSubgradient, psg_trace,
                         &psg_report);
  } else {
    const ad3::Algorithm algorithm = opt.algorithm == "psg"
                                         ? ad3::Algorithm::kSubgradient
                                         : ad3::Algorithm::kAd3;
    converged = run_one(graph, opt, algorithm, opt.trace, &report);
  }
  if (!opt.output.empty() && !report.assignment.states.empty()) {
    write_file(opt.output, assignment_text(report.assignment));
  }
  if (opt.require_convergence && !converged) return 2;
  return 0;
}

int run_gen(const Options& opt) {
  ad3::GeneratorSpec spec;
  spec.family = opt.family == "potts" ? ad3::Family::kPotts
                                      : ad3::Family::kIsing;
  spec.rows = opt.rows;
  spec.cols = opt.cols;
  spec.num_states = opt.num_states;
  spec.rho = opt.rho;
  spec.seed = opt.seed;
  const ad3::FactorGraph graph = spec.family == ad3::Family::kIsing
                                     ? ad3::gen_ising(spec)
                                     : ad3::gen_potts(spec);
  const std::string text = ad3::serialize_graph(graph);
  if (opt.output.empty()) {
    std::fputs(text.c_str(), stdout);
  } else {
    write_file(opt.output, text);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"factor-graph LP-MAP solver"};
  app.require_subcommand(1);
  Options opt;

  CLI::App* gen = app.add_subcommand("gen", "generate a synthetic grid");
  gen->add_option("--family", opt.family, "ising or potts")
      ->check(CLI::IsMember({"ising", "potts"}));
  gen->add_option("--rows", opt.rows, "grid rows");
  gen->add_option("--cols", opt.cols, "grid columns");
  gen->add_option("--num-states", opt.num_states, "states per variable");
  gen->add_option("--rho", opt.rho, "coupling half-width");
  gen->add_option("--seed", opt.seed, "generator seed");
  gen->add_option("--output", opt.output, "write the graph here");

  CLI::App* solve = app.add_subcommand("solve", "run a relaxation solver");
  add_solver_flags(solve, &opt);
  solve->add_flag("--exact", opt.exact, "branch-and-bound exact MAP");

  CLI::App* exact =
      app.add_subcommand("exact", "exact MAP (alias for solve --exact)");
  add_solver_flags(exact, &opt);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (gen->parsed()) return run_gen(opt);
    if (exact->parsed()) opt.exact = true;
    return run_solve(opt);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
