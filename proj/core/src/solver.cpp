#include "ad3/solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <mutex>
#include <thread>

#include "ad3/activeset.hpp"
#include "ad3/logic.hpp"
#include "ad3/pairwise.hpp"

namespace ad3 {

namespace {

// Finite stand-in for -inf potentials inside the numeric solvers; the
// evaluation path keeps the true -inf.
constexpr double kClampedNegInf = -1e8;

double clamp_potential(double value) {
  return std::max(value, kClampedNegInf);
}

int argmax_state(const std::vector<double>& scores) {
  int best = 0;
  for (int s = 1; s < static_cast<int>(scores.size()); ++s) {
    if (scores[s] > scores[best]) best = s;
  }
  return best;
}

struct EdgeLayout {
  std::vector<int> var_degree;
  std::vector<std::vector<int>> factor_edges;  // factor -> edge indices
  std::vector<std::vector<double>> theta_split;  // per edge, clamped
};

EdgeLayout build_layout(const FactorGraph& graph) {
  EdgeLayout layout;
  layout.var_degree.assign(graph.num_variables(), 0);
  layout.factor_edges.assign(graph.num_factors(), {});
  for (std::size_t e = 0; e < graph.edges.size(); ++e) {
    const auto [var, factor] = graph.edges[e];
    ++layout.var_degree[var];
    layout.factor_edges[factor].push_back(static_cast<int>(e));
  }
  layout.theta_split.resize(graph.edges.size());
  for (std::size_t e = 0; e < graph.edges.size(); ++e) {
    const int var = graph.edges[e].first;
    const Variable& variable = graph.variables[var];
    std::vector<double>& split = layout.theta_split[e];
    split.resize(variable.num_states);
    for (int s = 0; s < variable.num_states; ++s) {
      split[s] = clamp_potential(variable.unary[s]) / layout.var_degree[var];
    }
  }
  return layout;
}

// MAP of a single factor under per-edge score adjustments, used by the
// dual objective and the subgradient baseline. Logic kinds use dedicated
// constrained argmax routines.
MapConfig factor_map(const FactorGraph& graph, const Factor& factor,
                     const std::vector<std::vector<double>>& adjustments) {
  switch (factor.kind) {
    case FactorKind::kDense:
    case FactorKind::kPair: {
      std::vector<int> num_states;
      for (int v : factor.variables) {
        num_states.push_back(graph.variables[v].num_states);
      }
      std::vector<double> table(factor.table.size());
      for (std::size_t i = 0; i < table.size(); ++i) {
        table[i] = factor.table[i] == kNegInf ? kNegInf
                                              : clamp_potential(factor.table[i]);
      }
      return DenseMapOracle(std::move(num_states), std::move(table))
          .compute_map(adjustments);
    }
    case FactorKind::kSequence: {
      std::vector<int> num_states;
      for (int v : factor.variables) {
        num_states.push_back(graph.variables[v].num_states);
      }
      return ViterbiMapOracle(std::move(num_states), factor.transitions)
          .compute_map(adjustments);
    }
    case FactorKind::kXor: {
      const int degree = factor.degree();
      MapConfig best;
      for (int k = 0; k < degree; ++k) {
        MapConfig config;
        config.states.resize(degree);
        config.score = 0.0;
        for (int i = 0; i < degree; ++i) {
          const int effective = i == k ? 1 : 0;
          config.states[i] = effective ^ (factor.negated[i] ? 1 : 0);
          config.score += adjustments[i][config.states[i]];
        }
        if (k == 0 || config.score > best.score) best = std::move(config);
      }
      return best;
    }
    case FactorKind::kOr:
    case FactorKind::kOrOut: {
      const int degree = factor.degree();
      const int num_inputs =
          factor.kind == FactorKind::kOrOut ? degree - 1 : degree;
      auto state_for = [&](int index, int effective) {
        return effective ^ (factor.negated[index] ? 1 : 0);
      };
      auto score_for = [&](int index, int effective) {
        return adjustments[index][state_for(index, effective)];
      };
      // best input choices with at least one effective one
      double free_score = 0.0;
      int num_on = 0;
      double min_flip_loss = 0.0;
      int flip_index = -1;
      std::vector<int> effective(num_inputs);
      for (int i = 0; i < num_inputs; ++i) {
        const double s0 = score_for(i, 0);
        const double s1 = score_for(i, 1);
        effective[i] = s1 > s0 ? 1 : 0;
        free_score += std::max(s0, s1);
        num_on += effective[i];
        const double loss = s0 - s1;
        if (flip_index < 0 || loss < min_flip_loss) {
          min_flip_loss = loss;
          flip_index = i;
        }
      }
      double or_score = free_score;
      std::vector<int> or_effective = effective;
      if (num_on == 0) {
        or_score -= min_flip_loss;
        or_effective[flip_index] = 1;
      }
      MapConfig config;
      config.states.resize(degree);
      if (factor.kind == FactorKind::kOr) {
        config.score = or_score;
        for (int i = 0; i < degree; ++i) {
          config.states[i] = state_for(i, or_effective[i]);
        }
        return config;
      }
      // OR_OUT: compare all-zeros against the constrained-OR case.
      double zeros_score = score_for(degree - 1, 0);
      for (int i = 0; i < num_inputs; ++i) zeros_score += score_for(i, 0);
      const double on_score = or_score + score_for(degree - 1, 1);
      if (zeros_score >= on_score) {
        config.score = zeros_score;
        for (int i = 0; i < num_inputs; ++i) config.states[i] = state_for(i, 0);
        config.states[degree - 1] = state_for(degree - 1, 0);
      } else {
        config.score = on_score;
        for (int i = 0; i < num_inputs; ++i) {
          config.states[i] = state_for(i, or_effective[i]);
        }
        config.states[degree - 1] = state_for(degree - 1, 1);
      }
      return config;
    }
  }
  throw std::logic_error("unreachable");
}

bool factor_everywhere_forbidden(const Factor& factor) {
  if (factor.kind != FactorKind::kDense && factor.kind != FactorKind::kPair) {
    return false;
  }
  return std::all_of(factor.table.begin(), factor.table.end(),
                     [](double v) { return v == kNegInf; });
}

Assignment extract_assignment(const FactorGraph& graph,
                              const std::vector<std::vector<double>>& p) {
  Assignment assignment;
  assignment.states.reserve(graph.num_variables());
  for (int i = 0; i < graph.num_variables(); ++i) {
    assignment.states.push_back(argmax_state(p[i]));
  }
  return assignment;
}

bool is_integral(const std::vector<std::vector<double>>& p) {
  for (const std::vector<double>& dist : p) {
    double best = 0.0;
    for (double value : dist) best = std::max(best, value);
    if (best < 1.0 - 1e-9) return false;
  }
  return true;
}

double dual_objective_split(const FactorGraph& graph, const EdgeLayout& layout,
                            const std::vector<std::vector<double>>& lambda) {
  double total = 0.0;
  std::vector<std::vector<double>> adjustments;
  for (int f = 0; f < graph.num_factors(); ++f) {
    const Factor& factor = graph.factors[f];
    adjustments.clear();
    for (int e : layout.factor_edges[f]) {
      std::vector<double> xi = layout.theta_split[e];
      for (std::size_t s = 0; s < xi.size(); ++s) xi[s] += lambda[e][s];
      adjustments.push_back(std::move(xi));
    }
    total += factor_map(graph, factor, adjustments).score;
  }
  // isolated variables bypass the consensus entirely
  for (int i = 0; i < graph.num_variables(); ++i) {
    if (layout.var_degree[i] == 0) {
      double best = kClampedNegInf;
      for (double value : graph.variables[i].unary) {
        best = std::max(best, clamp_potential(value));
      }
      total += best;
    }
  }
  return total;
}

struct ConsensusResult {
  SolveReport report;
  bool pruned = false;
};

// The consensus loop shared by the public entry point and branch-and-bound
// (which passes a prune bound).
ConsensusResult run_ad3_impl(const FactorGraph& graph,
                             const SolverConfig& config, double prune_bound) {
  ConsensusResult result;
  SolveReport& report = result.report;
  const EdgeLayout layout = build_layout(graph);
  const std::size_t num_edges = graph.edges.size();

  for (const Factor& factor : graph.factors) {
    if (factor_everywhere_forbidden(factor)) {
      report.status = SolveStatus::kInfeasible;
      return result;
    }
  }

  // per-factor subproblem machinery
  std::vector<std::unique_ptr<MapOracle>> oracles(graph.num_factors());
  std::vector<ActiveSetState> warm(graph.num_factors());
  for (int f = 0; f < graph.num_factors(); ++f) {
    const Factor& factor = graph.factors[f];
    if (factor.kind == FactorKind::kDense) {
      std::vector<int> num_states;
      for (int v : factor.variables) {
        num_states.push_back(graph.variables[v].num_states);
      }
      oracles[f] = std::make_unique<DenseMapOracle>(std::move(num_states),
                                                    factor.table);
    } else if (factor.kind == FactorKind::kSequence) {
      std::vector<int> num_states;
      for (int v : factor.variables) {
        num_states.push_back(graph.variables[v].num_states);
      }
      oracles[f] = std::make_unique<ViterbiMapOracle>(std::move(num_states),
                                                      factor.transitions);
    }
  }

  // state
  std::vector<std::vector<double>> p(graph.num_variables());
  for (int i = 0; i < graph.num_variables(); ++i) {
    const Variable& var = graph.variables[i];
    if (layout.var_degree[i] == 0) {
      std::vector<double> clamped(var.unary.size());
      for (std::size_t s = 0; s < clamped.size(); ++s) {
        clamped[s] = clamp_potential(var.unary[s]);
      }
      p[i].assign(var.num_states, 0.0);
      p[i][argmax_state(clamped)] = 1.0;
    } else {
      p[i].assign(var.num_states, 1.0 / var.num_states);
    }
  }
  std::vector<std::vector<double>> lambda(num_edges);
  std::vector<std::vector<double>> q(num_edges);
  for (std::size_t e = 0; e < num_edges; ++e) {
    const int var = graph.edges[e].first;
    lambda[e].assign(graph.variables[var].num_states, 0.0);
    q[e] = p[var];
  }

  double eta = config.eta;
  bool eta_changed = true;  // force a full first sweep
  std::vector<bool> lambda_changed(num_edges, true);
  std::vector<bool> p_changed(graph.num_variables(), true);
  std::int64_t oracle_calls = 0;
  double last_dual = 0.0;
  bool have_dual = false;
  report.best_primal_value = kNegInf;
  double last_rp = 1.0;
  double last_rd = 1.0;
  bool infeasible = false;

  std::vector<std::int64_t> factor_calls(graph.num_factors(), 0);
  std::vector<bool> skip(graph.num_factors(), false);

  auto solve_factor = [&](int f, int max_inner) {
    const Factor& factor = graph.factors[f];
    const std::vector<int>& edges = layout.factor_edges[f];
    std::vector<std::vector<double>> a(edges.size());
    for (std::size_t k = 0; k < edges.size(); ++k) {
      const int e = edges[k];
      const int var = graph.edges[e].first;
      a[k].resize(p[var].size());
      for (std::size_t s = 0; s < a[k].size(); ++s) {
        a[k][s] = p[var][s] + (layout.theta_split[e][s] + lambda[e][s]) / eta;
      }
    }
    switch (factor.kind) {
      case FactorKind::kPair: {
        std::array<double, 4> b;
        for (int t = 0; t < 4; ++t) {
          b[t] = clamp_potential(factor.table[t]) / eta;
        }
        const PairwiseCoefficients c = compute_pair_coefficients(
            {a[0][0], a[0][1]}, {a[1][0], a[1][1]}, b);
        const PairwiseSolution z = solve_qp_pair(c);
        q[edges[0]] = {1.0 - z.z1, z.z1};
        q[edges[1]] = {1.0 - z.z2, z.z2};
        factor_calls[f] = 1;
        break;
      }
      case FactorKind::kXor:
      case FactorKind::kOr:
      case FactorKind::kOrOut: {
        std::vector<std::array<double, 2>> pairs(edges.size());
        for (std::size_t k = 0; k < edges.size(); ++k) {
          pairs[k] = {a[k][0], a[k][1]};
        }
        const auto marginals =
            solve_qp_logic(factor.kind, factor.negated, pairs);
        for (std::size_t k = 0; k < edges.size(); ++k) {
          q[edges[k]] = {marginals[k][0], marginals[k][1]};
        }
        factor_calls[f] = 1;
        break;
      }
      default: {
        QpSolution solution = solve_qp_active_set(*oracles[f], a, 1.0 / eta,
                                                  &warm[f], max_inner);
        for (std::size_t k = 0; k < edges.size(); ++k) {
          q[edges[k]] = solution.u[k];
        }
        factor_calls[f] = solution.oracle_calls;
        int bound = 1 - factor.degree();
        for (int v : factor.variables) {
          bound += graph.variables[v].num_states;
        }
        if (static_cast<int>(solution.support.size()) > bound) {
          ++report.activeset_support_violations;
        }
        break;
      }
    }
  };

  int iter = 0;
  for (iter = 1; iter <= config.max_iters; ++iter) {
    const bool near_tolerance =
        std::max(last_rp, last_rd) < 100.0 * config.residual_tol;
    const int max_inner = near_tolerance ? 500 : config.inner_iters;

    // broadcast
    for (int f = 0; f < graph.num_factors(); ++f) {
      bool idle = config.caching && !eta_changed;
      if (idle) {
        for (int e : layout.factor_edges[f]) {
          if (lambda_changed[e] || p_changed[graph.edges[e].first]) {
            idle = false;
            break;
          }
        }
      }
      skip[f] = idle;
      factor_calls[f] = 0;
    }
    try {
      if (config.threads > 1) {
        const int workers =
            std::min(config.threads, graph.num_factors() > 0
                                         ? graph.num_factors()
                                         : 1);
        std::vector<std::thread> pool;
        std::exception_ptr error;
        std::mutex error_mutex;
        for (int w = 0; w < workers; ++w) {
          pool.emplace_back([&, w]() {
            try {
              for (int f = w; f < graph.num_factors(); f += workers) {
                if (!skip[f]) solve_factor(f, max_inner);
              }
            } catch (...) {
              std::lock_guard<std::mutex> hold(error_mutex);
              if (!error) error = std::current_exception();
            }
          });
        }
        for (std::thread& t : pool) t.join();
        if (error) std::rethrow_exception(error);
      } else {
        for (int f = 0; f < graph.num_factors(); ++f) {
          if (!skip[f]) solve_factor(f, max_inner);
        }
      }
    } catch (const InfeasibleFactorError&) {
      infeasible = true;
    }
    if (infeasible) {
      report.status = SolveStatus::kInfeasible;
      return result;
    }
    for (int f = 0; f < graph.num_factors(); ++f) {
      oracle_calls += factor_calls[f];
    }

    // gather: plain average of the per-edge marginals, fixed edge order
    std::vector<std::vector<double>> p_next(graph.num_variables());
    for (int i = 0; i < graph.num_variables(); ++i) {
      if (layout.var_degree[i] == 0) {
        p_next[i] = p[i];
      } else {
        p_next[i].assign(graph.variables[i].num_states, 0.0);
      }
    }
    for (std::size_t e = 0; e < num_edges; ++e) {
      const int var = graph.edges[e].first;
      for (std::size_t s = 0; s < q[e].size(); ++s) {
        p_next[var][s] += q[e][s];
      }
    }
    for (int i = 0; i < graph.num_variables(); ++i) {
      if (layout.var_degree[i] > 0) {
        for (double& value : p_next[i]) value /= layout.var_degree[i];
      }
    }

    // multiplier update
    for (std::size_t e = 0; e < num_edges; ++e) {
      const int var = graph.edges[e].first;
      bool changed = false;
      for (std::size_t s = 0; s < lambda[e].size(); ++s) {
        const double delta = eta * (q[e][s] - p_next[var][s]);
        if (delta != 0.0) {
          lambda[e][s] -= delta;
          changed = true;
        }
      }
      lambda_changed[e] = changed;
    }

    // lambda zero-sum audit
    {
      std::vector<std::vector<double>> sums(graph.num_variables());
      for (int i = 0; i < graph.num_variables(); ++i) {
        sums[i].assign(graph.variables[i].num_states, 0.0);
      }
      for (std::size_t e = 0; e < num_edges; ++e) {
        const int var = graph.edges[e].first;
        for (std::size_t s = 0; s < lambda[e].size(); ++s) {
          sums[var][s] += lambda[e][s];
        }
      }
      for (const std::vector<double>& sum : sums) {
        for (double value : sum) {
          report.max_lambda_sum_violation =
              std::max(report.max_lambda_sum_violation, std::fabs(value));
        }
      }
    }

    const ResidualReport residuals =
        compute_residuals(graph, q, p_next, p);
    for (int i = 0; i < graph.num_variables(); ++i) {
      p_changed[i] = p_next[i] != p[i];
    }
    p = std::move(p_next);
    last_rp = residuals.r_primal;
    last_rd = residuals.r_dual;

    // primal extraction
    const Assignment assignment = extract_assignment(graph, p);
    const double primal_value = evaluate(graph, assignment);
    if (primal_value > report.best_primal_value ||
        report.assignment.states.empty()) {
      report.best_primal_value = primal_value;
      report.assignment = assignment;
    }

    // agreement + integrality certificate
    bool agreement = is_integral(p);
    if (agreement) {
      for (std::size_t e = 0; e < num_edges && agreement; ++e) {
        const int var = graph.edges[e].first;
        for (std::size_t s = 0; s < q[e].size(); ++s) {
          if (std::fabs(q[e][s] - p[var][s]) > 1e-9) {
            agreement = false;
            break;
          }
        }
      }
    }

    const bool residual_stop = residuals.r_primal < config.residual_tol &&
                               residuals.r_dual < config.residual_tol;
    const bool evaluate_dual =
        (iter - 1) % 10 == 0 || agreement || residual_stop ||
        iter == config.max_iters || prune_bound > kNegInf;
    if (evaluate_dual) {
      last_dual = dual_objective_split(graph, layout, lambda);
      if (!have_dual || last_dual < report.best_dual) {
        report.best_dual = last_dual;
      }
      have_dual = true;
    }

    report.trace.push_back({iter, last_dual, report.best_primal_value,
                            residuals.r_primal, residuals.r_dual, eta,
                            oracle_calls});

    // Two sound certificates: exact integral agreement of all subproblems,
    // or weak duality closing the gap on the best rounded assignment (the
    // dual upper-bounds every assignment, so a matching value is optimal).
    const bool gap_closed =
        have_dual &&
        report.best_dual - report.best_primal_value <=
            1e-6 * (1.0 + std::fabs(report.best_primal_value));
    if ((agreement &&
         last_dual - primal_value <=
             1e-6 * (1.0 + std::fabs(primal_value))) ||
        gap_closed) {
      report.status = SolveStatus::kCertifiedOptimal;
      report.fractional = false;
      break;
    }
    if (residual_stop) {
      report.status = SolveStatus::kConverged;
      report.fractional = !is_integral(p);
      break;
    }
    if (prune_bound > kNegInf && have_dual &&
        report.best_dual < prune_bound - 1e-9) {
      result.pruned = true;
      break;
    }

    const double next_eta = config.eta_adapt
                                ? adjust_eta(residuals.r_primal,
                                             residuals.r_dual, eta, iter,
                                             config)
                                : eta;
    eta_changed = next_eta != eta;
    eta = next_eta;
  }

  if (iter > config.max_iters) {
    report.status = SolveStatus::kMaxIters;
    report.fractional = !is_integral(p);
    iter = config.max_iters;
  }
  report.iterations = iter;
  report.p = p;
  report.lambda = lambda;
  report.oracle_calls = oracle_calls;
  return result;
}

}  // namespace

const char* solve_status_name(SolveStatus status) {
  switch (status) {
    case SolveStatus::kConverged: return "CONVERGED";
    case SolveStatus::kCertifiedOptimal: return "CERTIFIED_OPTIMAL";
    case SolveStatus::kMaxIters: return "MAX_ITERS";
    case SolveStatus::kInfeasible: return "INFEASIBLE";
  }
  return "?";
}

SolveReport run_ad3(const FactorGraph& graph, const SolverConfig& config) {
  return run_ad3_impl(graph, config, kNegInf).report;
}

SolveReport run_subgradient(const FactorGraph& graph,
                            const SolverConfig& config) {
  SolveReport report;
  const EdgeLayout layout = build_layout(graph);
  const std::size_t num_edges = graph.edges.size();

  for (const Factor& factor : graph.factors) {
    if (factor_everywhere_forbidden(factor)) {
      report.status = SolveStatus::kInfeasible;
      return report;
    }
  }

  std::vector<std::vector<double>> p(graph.num_variables());
  for (int i = 0; i < graph.num_variables(); ++i) {
    const Variable& var = graph.variables[i];
    if (layout.var_degree[i] == 0) {
      std::vector<double> clamped(var.unary.size());
      for (std::size_t s = 0; s < clamped.size(); ++s) {
        clamped[s] = clamp_potential(var.unary[s]);
      }
      p[i].assign(var.num_states, 0.0);
      p[i][argmax_state(clamped)] = 1.0;
    } else {
      p[i].assign(var.num_states, 1.0 / var.num_states);
    }
  }
  std::vector<std::vector<double>> lambda(num_edges);
  std::vector<std::vector<double>> q(num_edges);
  for (std::size_t e = 0; e < num_edges; ++e) {
    const int var = graph.edges[e].first;
    lambda[e].assign(graph.variables[var].num_states, 0.0);
    q[e].assign(graph.variables[var].num_states, 0.0);
  }

  std::int64_t oracle_calls = 0;
  double last_dual = 0.0;
  bool have_dual = false;
  report.best_primal_value = kNegInf;
  int iter = 0;
  bool infeasible = false;
  std::vector<std::vector<double>> adjustments;

  for (iter = 1; iter <= config.max_iters; ++iter) {
    const double step = config.subgrad_eta0 / iter;
    // broadcast: local MAP per factor
    try {
      for (int f = 0; f < graph.num_factors(); ++f) {
        const Factor& factor = graph.factors[f];
        adjustments.clear();
        for (int e : layout.factor_edges[f]) {
          std::vector<double> xi = layout.theta_split[e];
          for (std::size_t s = 0; s < xi.size(); ++s) xi[s] += lambda[e][s];
          adjustments.push_back(std::move(xi));
        }
        const MapConfig local = factor_map(graph, factor, adjustments);
        ++oracle_calls;
        const std::vector<int>& edges = layout.factor_edges[f];
        for (std::size_t k = 0; k < edges.size(); ++k) {
          const int e = edges[k];
          std::fill(q[e].begin(), q[e].end(), 0.0);
          q[e][local.states[k]] = 1.0;
        }
      }
    } catch (const InfeasibleFactorError&) {
      infeasible = true;
    }
    if (infeasible) {
      report.status = SolveStatus::kInfeasible;
      return report;
    }

    // gather
    std::vector<std::vector<double>> p_next(graph.num_variables());
    for (int i = 0; i < graph.num_variables(); ++i) {
      if (layout.var_degree[i] == 0) {
        p_next[i] = p[i];
      } else {
        p_next[i].assign(graph.variables[i].num_states, 0.0);
      }
    }
    for (std::size_t e = 0; e < num_edges; ++e) {
      const int var = graph.edges[e].first;
      for (std::size_t s = 0; s < q[e].size(); ++s) {
        p_next[var][s] += q[e][s];
      }
    }
    for (int i = 0; i < graph.num_variables(); ++i) {
      if (layout.var_degree[i] > 0) {
        for (double& value : p_next[i]) value /= layout.var_degree[i];
      }
    }

    // certificate after the averaging step: exact agreement
    bool agreement = true;
    for (std::size_t e = 0; e < num_edges && agreement; ++e) {
      const int var = graph.edges[e].first;
      agreement = q[e] == p_next[var];
    }

    for (std::size_t e = 0; e < num_edges; ++e) {
      const int var = graph.edges[e].first;
      for (std::size_t s = 0; s < lambda[e].size(); ++s) {
        lambda[e][s] -= step * (q[e][s] - p_next[var][s]);
      }
    }
    {
      std::vector<std::vector<double>> sums(graph.num_variables());
      for (int i = 0; i < graph.num_variables(); ++i) {
        sums[i].assign(graph.variables[i].num_states, 0.0);
      }
      for (std::size_t e = 0; e < num_edges; ++e) {
        const int var = graph.edges[e].first;
        for (std::size_t s = 0; s < lambda[e].size(); ++s) {
          sums[var][s] += lambda[e][s];
        }
      }
      for (const std::vector<double>& sum : sums) {
        for (double value : sum) {
          report.max_lambda_sum_violation =
              std::max(report.max_lambda_sum_violation, std::fabs(value));
        }
      }
    }

    const ResidualReport residuals = compute_residuals(graph, q, p_next, p);
    p = std::move(p_next);

    const Assignment assignment = extract_assignment(graph, p);
    const double primal_value = evaluate(graph, assignment);
    if (primal_value > report.best_primal_value ||
        report.assignment.states.empty()) {
      report.best_primal_value = primal_value;
      report.assignment = assignment;
    }

    const bool evaluate_dual = (iter - 1) % 10 == 0 || agreement ||
                               iter == config.max_iters;
    if (evaluate_dual) {
      last_dual = dual_objective_split(graph, layout, lambda);
      if (!have_dual || last_dual < report.best_dual) {
        report.best_dual = last_dual;
      }
      have_dual = true;
    }
    report.trace.push_back({iter, last_dual, report.best_primal_value,
                            residuals.r_primal, residuals.r_dual, step,
                            oracle_calls});

    if (agreement) {
      report.status = SolveStatus::kCertifiedOptimal;
      report.fractional = false;
      break;
    }
  }
  if (iter > config.max_iters) {
    report.status = SolveStatus::kMaxIters;
    report.fractional = !is_integral(p);
    iter = config.max_iters;
  }
  report.iterations = iter;
  report.p = p;
  report.lambda = lambda;
  report.oracle_calls = oracle_calls;
  return report;
}

double dual_objective(const FactorGraph& graph,
                      const std::vector<std::vector<double>>& lambda) {
  const EdgeLayout layout = build_layout(graph);
  std::vector<std::vector<double>> sums(graph.num_variables());
  for (int i = 0; i < graph.num_variables(); ++i) {
    sums[i].assign(graph.variables[i].num_states, 0.0);
  }
  for (std::size_t e = 0; e < graph.edges.size(); ++e) {
    const int var = graph.edges[e].first;
    for (std::size_t s = 0; s < lambda[e].size(); ++s) {
      sums[var][s] += lambda[e][s];
    }
  }
  for (const std::vector<double>& sum : sums) {
    for (double value : sum) {
      if (std::fabs(value) > 1e-6) {
        throw std::invalid_argument(
            "lambda violates the per-variable zero-sum constraint");
      }
    }
  }
  return dual_objective_split(graph, layout, lambda);
}

ResidualReport compute_residuals(
    const FactorGraph& graph, const std::vector<std::vector<double>>& q,
    const std::vector<std::vector<double>>& p,
    const std::vector<std::vector<double>>& p_prev) {
  double primal = 0.0;
  double dual = 0.0;
  double denom = 0.0;
  for (std::size_t e = 0; e < graph.edges.size(); ++e) {
    const int var = graph.edges[e].first;
    denom += graph.variables[var].num_states;
    for (std::size_t s = 0; s < q[e].size(); ++s) {
      const double dp = q[e][s] - p[var][s];
      primal += dp * dp;
      const double dd = p[var][s] - p_prev[var][s];
      dual += dd * dd;
    }
  }
  ResidualReport report;
  if (denom > 0.0) {
    report.r_primal = primal / denom;
    report.r_dual = dual / denom;
  }
  return report;
}

double adjust_eta(double r_primal, double r_dual, double eta, int iteration,
                  const SolverConfig& config) {
  if (iteration >= config.eta_freeze_iter) return eta;
  double next = eta;
  if (r_primal > 10.0 * r_dual) next = 2.0 * eta;
  else if (r_dual > 10.0 * r_primal) next = eta / 2.0;
  return std::min(std::max(next, 1e-3), 1e3);
}

MapResult branch_and_bound(const FactorGraph& graph,
                           const SolverConfig& config,
                           const BranchAndBoundOptions& options,
                           int* nodes_out) {
  MapResult incumbent;
  bool has_incumbent = false;
  int nodes = 0;

  auto recurse = [&](auto&& self, const FactorGraph& node_graph,
                     int depth) -> void {
    if (++nodes > options.node_budget || depth > options.max_depth) {
      throw BudgetExhaustedError("branch-and-bound budget exhausted",
                                 incumbent, has_incumbent ? incumbent.value
                                                          : kNegInf);
    }
    const double prune = has_incumbent ? incumbent.value : kNegInf;
    ConsensusResult node = run_ad3_impl(node_graph, config, prune);
    if (node.pruned || node.report.status == SolveStatus::kInfeasible) {
      return;
    }
    const SolveReport& report = node.report;
    if (!report.assignment.states.empty()) {
      const double value = evaluate(node_graph, report.assignment);
      if (!has_incumbent || value > incumbent.value) {
        incumbent.assignment = report.assignment;
        incumbent.value = value;
        has_incumbent = true;
      }
    }
    const bool solved =
        !report.fractional &&
        (report.status == SolveStatus::kCertifiedOptimal ||
         report.status == SolveStatus::kConverged);
    if (solved) return;

    // branch on the most fractional variable (max entropy, ties smallest)
    int branch_var = 0;
    double best_entropy = -1.0;
    for (int i = 0; i < node_graph.num_variables(); ++i) {
      double entropy = 0.0;
      for (double value : report.p[i]) {
        if (value > 0.0) entropy -= value * std::log(value);
      }
      if (entropy > best_entropy) {
        best_entropy = entropy;
        branch_var = i;
      }
    }
    for (int s = 0; s < node_graph.variables[branch_var].num_states; ++s) {
      if (node_graph.variables[branch_var].unary[s] == kNegInf) continue;
      FactorGraph child = node_graph;
      for (int t = 0; t < child.variables[branch_var].num_states; ++t) {
        if (t != s) child.variables[branch_var].unary[t] = kNegInf;
      }
      self(self, child, depth + 1);
    }
  };
  recurse(recurse, graph, 0);
  if (nodes_out != nullptr) *nodes_out = nodes;
  if (!has_incumbent) {
    incumbent.assignment.states.assign(graph.num_variables(), 0);
    incumbent.value = kNegInf;
  }
  return incumbent;
}

std::string trace_to_csv(const std::vector<TraceRow>& trace) {
  std::string out = "iter,dual,primal,r_primal,r_dual,eta,oracle_calls\n";
  char buf[160];
  for (const TraceRow& row : trace) {
    if (row.primal == kNegInf) {
      std::snprintf(buf, sizeof(buf), "%d,%.12g,-inf,%.12g,%.12g,%.12g,%lld\n",
                    row.iter, row.dual, row.r_primal, row.r_dual, row.eta,
                    static_cast<long long>(row.oracle_calls));
    } else {
      std::snprintf(buf, sizeof(buf),
                    "%d,%.12g,%.12g,%.12g,%.12g,%.12g,%lld\n", row.iter,
                    row.dual, row.primal, row.r_primal, row.r_dual, row.eta,
                    static_cast<long long>(row.oracle_calls));
    }
    out += buf;
  }
  return out;
}

}  // namespace ad3
