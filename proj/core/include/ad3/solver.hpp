// Consensus solvers for the LP relaxation of MAP: the augmented-Lagrangian
// splitting loop, the projected-subgradient baseline, residual-based
// stopping, penalty adaptation, subproblem caching, and a branch-and-bound
// wrapper for exact MAP.

#ifndef AD3_SOLVER_HPP_
#define AD3_SOLVER_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "ad3/graph.hpp"

namespace ad3 {

enum class Algorithm { kAd3, kSubgradient };

struct SolverConfig {
  Algorithm algorithm = Algorithm::kAd3;
  double eta = 1.0;
  bool eta_adapt = true;
  int eta_freeze_iter = 100;
  int max_iters = 1000;
  double residual_tol = 1e-6;
  double subgrad_eta0 = 1.0;
  int inner_iters = 10;
  bool caching = true;
  int threads = 1;
  std::uint64_t seed = 0;
};

enum class SolveStatus { kConverged, kCertifiedOptimal, kMaxIters,
                         kInfeasible };

const char* solve_status_name(SolveStatus status);

struct ResidualReport {
  double r_primal = 0.0;
  double r_dual = 0.0;
};

struct TraceRow {
  int iter = 0;
  double dual = 0.0;
  double primal = 0.0;
  double r_primal = 0.0;
  double r_dual = 0.0;
  double eta = 0.0;
  std::int64_t oracle_calls = 0;
};

struct SolveReport {
  SolveStatus status = SolveStatus::kMaxIters;
  double best_dual = 0.0;
  double best_primal_value = kNegInf;
  Assignment assignment;
  bool fractional = true;
  std::vector<TraceRow> trace;
  // final per-variable distributions, for branching and inspection
  std::vector<std::vector<double>> p;
  // final multipliers, indexed per edge
  std::vector<std::vector<double>> lambda;
  std::int64_t oracle_calls = 0;
  int iterations = 0;
  // audits accumulated over the whole run
  double max_lambda_sum_violation = 0.0;
  int activeset_support_violations = 0;
};

// Augmented-Lagrangian consensus loop with exact per-kind subproblem
// solvers (closed-form pairwise, polytope projections for logic kinds,
// active set for dense/sequence factors).
SolveReport run_ad3(const FactorGraph& graph, const SolverConfig& config);

// Projected-subgradient baseline with step sizes eta0 / t.
SolveReport run_subgradient(const FactorGraph& graph,
                            const SolverConfig& config);

// Lagrangian dual g(lambda) = sum over factors of the local MAP value under
// adjusted potentials. lambda is indexed per edge, aligned with
// graph.edges; each lambda[e] has the edge variable's state count.
// Throws if lambda violates the per-variable zero-sum constraint by more
// than 1e-6.
double dual_objective(const FactorGraph& graph,
                      const std::vector<std::vector<double>>& lambda);

// Normalized residuals of the consensus constraints; q and p are per-edge
// and per-variable marginals, p_prev is the previous iterate.
ResidualReport compute_residuals(
    const FactorGraph& graph, const std::vector<std::vector<double>>& q,
    const std::vector<std::vector<double>>& p,
    const std::vector<std::vector<double>>& p_prev);

// Penalty adaptation: double when the primal residual dominates, halve when
// the dual residual dominates, frozen after eta_freeze_iter; result clamped
// to [1e-3, 1e3].
double adjust_eta(double r_primal, double r_dual, double eta, int iteration,
                  const SolverConfig& config);

class BudgetExhaustedError : public std::runtime_error {
 public:
  BudgetExhaustedError(const std::string& what, MapResult incumbent,
                       double bound)
      : std::runtime_error(what),
        incumbent(std::move(incumbent)),
        bound(bound) {}
  MapResult incumbent;
  double bound;
};

struct BranchAndBoundOptions {
  int max_depth = 64;
  int node_budget = 10000;
};

// Exact MAP by recursive branching on the most fractional variable, pruning
// with the relaxation's dual upper bound. nodes_out, when given, receives
// the number of explored nodes.
MapResult branch_and_bound(const FactorGraph& graph,
                           const SolverConfig& config,
                           const BranchAndBoundOptions& options = {},
                           int* nodes_out = nullptr);

// Serializes trace rows as CSV with 12 significant digits.
std::string trace_to_csv(const std::vector<TraceRow>& trace);

}  // namespace ad3

#endif  // AD3_SOLVER_HPP_
