#include "ad3/activeset.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ad3 {

namespace {

constexpr double kPivotTol = 1e-12;
constexpr double kWeightClampTol = 1e-12;

int common_values(const std::vector<int>& a, const std::vector<int>& b) {
  int count = 0;
  for (std::size_t i = 0; i < a.size(); ++i) count += a[i] == b[i];
  return count;
}

// Gaussian elimination with partial pivoting. Columns whose pivot falls
// below the relative tolerance are treated as free and their unknowns set
// to zero (a null-space completion). Returns false when the resulting
// candidate does not satisfy the system.
bool solve_rank_deficient(int n, std::vector<double> a, std::vector<double> b,
                          std::vector<double>* x) {
  const std::vector<double> a0 = a;
  const std::vector<double> b0 = b;
  double scale = 0.0;
  for (double value : a) scale = std::max(scale, std::fabs(value));
  if (scale == 0.0) scale = 1.0;

  std::vector<int> pivot_row_of_col(n, -1);
  std::vector<bool> row_used(n, false);
  for (int col = 0; col < n; ++col) {
    int pivot = -1;
    double best = kPivotTol * scale;
    for (int row = 0; row < n; ++row) {
      if (row_used[row]) continue;
      const double value = std::fabs(a[row * n + col]);
      if (value > best) {
        best = value;
        pivot = row;
      }
    }
    if (pivot < 0) continue;  // free column
    pivot_row_of_col[col] = pivot;
    row_used[pivot] = true;
    const double diag = a[pivot * n + col];
    for (int row = 0; row < n; ++row) {
      if (row == pivot || a[row * n + col] == 0.0) continue;
      const double ratio = a[row * n + col] / diag;
      for (int j = col; j < n; ++j) a[row * n + j] -= ratio * a[pivot * n + j];
      b[row] -= ratio * b[pivot];
    }
  }
  x->assign(n, 0.0);
  for (int col = n - 1; col >= 0; --col) {
    const int row = pivot_row_of_col[col];
    if (row < 0) continue;
    double value = b[row];
    for (int j = col + 1; j < n; ++j) value -= a[row * n + j] * (*x)[j];
    (*x)[col] = value / a[row * n + col];
  }
  // verify against the untouched system
  double norm_b = 1.0;
  for (double value : b0) norm_b = std::max(norm_b, std::fabs(value));
  for (int row = 0; row < n; ++row) {
    double residual = -b0[row];
    for (int col = 0; col < n; ++col) {
      residual += a0[row * n + col] * (*x)[col];
    }
    if (std::fabs(residual) > 1e-8 * norm_b) return false;
  }
  return true;
}

}  // namespace

void ActiveSetState::push_config(const std::vector<int>& config) {
  const int n = size();
  std::vector<double> next((n + 1) * (n + 1));
  for (int r = 0; r < n; ++r) {
    for (int s = 0; s < n; ++s) next[r * (n + 1) + s] = gram[r * n + s];
    const double overlap = common_values(workset[r], config);
    next[r * (n + 1) + n] = overlap;
    next[n * (n + 1) + r] = overlap;
  }
  next[n * (n + 1) + n] = static_cast<double>(config.size());
  gram = std::move(next);
  workset.push_back(config);
  weights.push_back(0.0);
}

void ActiveSetState::remove_config(int index) {
  const int n = size();
  std::vector<double> next((n - 1) * (n - 1));
  for (int r = 0, rr = 0; r < n; ++r) {
    if (r == index) continue;
    for (int s = 0, ss = 0; s < n; ++s) {
      if (s == index) continue;
      next[rr * (n - 1) + ss] = gram[r * n + s];
      ++ss;
    }
    ++rr;
  }
  gram = std::move(next);
  workset.erase(workset.begin() + index);
  weights.erase(weights.begin() + index);
}

void solve_kkt(const ActiveSetState& state,
               const std::vector<std::vector<double>>& a,
               const std::vector<double>& b, std::vector<double>* weights,
               double* tau) {
  const int n = state.size();
  if (n == 0) throw std::invalid_argument("empty working set");
  std::vector<double> system((n + 1) * (n + 1), 0.0);
  std::vector<double> rhs(n + 1, 0.0);
  for (int r = 0; r < n; ++r) {
    for (int s = 0; s < n; ++s) system[r * (n + 1) + s] = state.gram_at(r, s);
    system[r * (n + 1) + n] = 1.0;
    system[n * (n + 1) + r] = 1.0;
    double dot = b[r];
    for (std::size_t i = 0; i < a.size(); ++i) {
      dot += a[i][state.workset[r][i]];
    }
    rhs[r] = dot;
  }
  rhs[n] = 1.0;
  std::vector<double> solution;
  if (!solve_rank_deficient(n + 1, std::move(system), std::move(rhs),
                            &solution)) {
    throw DegenerateWorksetError("singular KKT system");
  }
  weights->assign(solution.begin(), solution.begin() + n);
  *tau = solution[n];
}

namespace {

std::vector<std::vector<double>> compute_marginals(
    const ActiveSetState& state, const std::vector<int>& num_states) {
  std::vector<std::vector<double>> u(num_states.size());
  for (std::size_t i = 0; i < num_states.size(); ++i) {
    u[i].assign(num_states[i], 0.0);
  }
  for (int r = 0; r < state.size(); ++r) {
    const double weight = state.weights[r];
    if (weight == 0.0) continue;
    for (std::size_t i = 0; i < num_states.size(); ++i) {
      u[i][state.workset[r][i]] += weight;
    }
  }
  return u;
}

// The newest working-set column can be an affine combination of the
// older ones (same marginals, Gram-singular system). Dropping it would
// cycle: the oracle keeps proposing it because its score beats the
// combination. Instead, shift weight onto the new configuration along
// the dependence direction until an old configuration hits zero, and
// remove that one. Returns false when the newest column is not actually
// dependent, so the caller can fall back to discarding it.
bool exchange_dependent_config(ActiveSetState* state) {
  const int n = state->size();
  if (n < 2) return false;
  const int k = n - 1;  // old configurations

  // affine coefficients: min ||M_old c - m_new||^2  s.t.  1'c = 1
  std::vector<double> system((k + 1) * (k + 1), 0.0);
  std::vector<double> rhs(k + 1, 0.0);
  for (int r = 0; r < k; ++r) {
    for (int s = 0; s < k; ++s) system[r * (k + 1) + s] = state->gram_at(r, s);
    system[r * (k + 1) + k] = 1.0;
    system[k * (k + 1) + r] = 1.0;
    rhs[r] = state->gram_at(r, k);
  }
  rhs[k] = 1.0;
  std::vector<double> solution;
  if (!solve_rank_deficient(k + 1, std::move(system), std::move(rhs),
                            &solution)) {
    return false;
  }
  // verify the dependence ||M_old c - m_new||^2 = c'Gc - 2c'g + g_nn = 0
  double residual = state->gram_at(k, k);
  for (int r = 0; r < k; ++r) {
    residual -= 2.0 * solution[r] * state->gram_at(r, k);
    for (int s = 0; s < k; ++s) {
      residual += solution[r] * solution[s] * state->gram_at(r, s);
    }
  }
  if (std::fabs(residual) > 1e-8 * state->gram_at(k, k)) return false;

  double step = std::numeric_limits<double>::infinity();
  int blocking = -1;
  for (int r = 0; r < k; ++r) {
    if (solution[r] <= kWeightClampTol) continue;
    const double ratio = state->weights[r] / solution[r];
    if (ratio < step) {
      step = ratio;
      blocking = r;
    }
  }
  if (blocking < 0) return false;

  state->weights[k] += step;
  for (int r = 0; r < k; ++r) {
    state->weights[r] -= step * solution[r];
    if (state->weights[r] < 0.0) state->weights[r] = 0.0;
  }
  state->remove_config(blocking);
  return true;
}

}  // namespace

QpSolution solve_qp_active_set(const MapOracle& oracle,
                               const std::vector<std::vector<double>>& a,
                               double b_scale, ActiveSetState* state,
                               int max_inner) {
  QpSolution result;
  const std::vector<int>& num_states = oracle.num_states();
  const std::size_t degree = num_states.size();

  auto scaled_adjustments = [&](const std::vector<std::vector<double>>& raw) {
    std::vector<std::vector<double>> adj(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
      adj[i].resize(raw[i].size());
      for (std::size_t s = 0; s < raw[i].size(); ++s) {
        adj[i][s] = raw[i][s] / b_scale;
      }
    }
    return adj;
  };

  if (state->size() == 0) {
    MapConfig seed = oracle.compute_map(scaled_adjustments(a));
    ++result.oracle_calls;
    state->push_config(seed.states);
    state->weights.back() = 1.0;
  }
  auto config_scores = [&]() {
    std::vector<double> b(state->size());
    for (int r = 0; r < state->size(); ++r) {
      b[r] = b_scale * oracle.score(state->workset[r]);
    }
    return b;
  };
  std::vector<double> b = config_scores();

  for (int inner = 0; inner < max_inner; ++inner) {
    std::vector<double> candidate;
    double tau = 0.0;
    try {
      solve_kkt(*state, a, b, &candidate, &tau);
    } catch (const DegenerateWorksetError&) {
      if (state->size() <= 1) throw;
      if (!exchange_dependent_config(state)) {
        state->remove_config(state->size() - 1);
      }
      b = config_scores();
      continue;
    }
    for (double& weight : candidate) {
      if (weight < 0.0 && weight > -kWeightClampTol) weight = 0.0;
    }
    double max_change = 0.0;
    for (int r = 0; r < state->size(); ++r) {
      max_change =
          std::max(max_change, std::fabs(candidate[r] - state->weights[r]));
    }
    if (max_change <= 1e-9) {
      state->weights = candidate;
      state->tau = tau;
      std::vector<std::vector<double>> u = compute_marginals(*state,
                                                             num_states);
      std::vector<std::vector<double>> w(degree);
      double dual = tau;
      for (std::size_t i = 0; i < degree; ++i) {
        w[i].resize(num_states[i]);
        for (int s = 0; s < num_states[i]; ++s) {
          w[i][s] = a[i][s] - u[i][s];
          dual += 0.5 * u[i][s] * u[i][s];
        }
      }
      result.dual_trace.push_back(dual);
      MapConfig best = oracle.compute_map(scaled_adjustments(w));
      ++result.oracle_calls;
      const double violation = b_scale * best.score;
      if (violation <= tau + 1e-9 * (1.0 + std::fabs(tau))) {
        break;  // all KKT inequalities hold; optimum over the full polytope
      }
      bool already_present = false;
      for (const std::vector<int>& config : state->workset) {
        if (config == best.states) {
          already_present = true;
          break;
        }
      }
      if (already_present) {
        throw OracleInconsistencyError(
            "oracle returned a working-set configuration that violates the "
            "stopping test");
      }
      state->push_config(best.states);
      b = config_scores();
    } else {
      double alpha = 1.0;
      int blocking = -1;
      for (int r = 0; r < state->size(); ++r) {
        if (state->weights[r] > candidate[r]) {
          const double ratio =
              state->weights[r] / (state->weights[r] - candidate[r]);
          if (ratio < alpha) {
            alpha = ratio;
            blocking = r;
          }
        }
      }
      for (int r = 0; r < state->size(); ++r) {
        state->weights[r] =
            (1.0 - alpha) * state->weights[r] + alpha * candidate[r];
      }
      state->tau = tau;
      if (blocking >= 0) {
        state->remove_config(blocking);
        b = config_scores();
      }
    }
  }

  result.u = compute_marginals(*state, num_states);
  result.tau = state->tau;
  for (int r = 0; r < state->size(); ++r) {
    if (state->weights[r] > 1e-12) {
      result.support.emplace_back(state->workset[r], state->weights[r]);
    }
  }
  return result;
}

DenseMapOracle::DenseMapOracle(std::vector<int> num_states,
                               std::vector<double> table)
    : num_states_(std::move(num_states)), table_(std::move(table)) {}

MapConfig DenseMapOracle::compute_map(
    const std::vector<std::vector<double>>& adjustments) const {
  const int degree = static_cast<int>(num_states_.size());
  std::vector<int> states(degree, 0);
  MapConfig best;
  bool found = false;
  for (double entry : table_) {
    if (entry != -std::numeric_limits<double>::infinity()) {
      double score = entry;
      for (int i = 0; i < degree; ++i) score += adjustments[i][states[i]];
      if (!found || score > best.score) {
        best.states = states;
        best.score = score;
        found = true;
      }
    }
    for (int pos = degree - 1; pos >= 0; --pos) {
      if (++states[pos] < num_states_[pos]) break;
      states[pos] = 0;
    }
  }
  if (!found) throw InfeasibleFactorError("all configurations forbidden");
  return best;
}

double DenseMapOracle::score(const std::vector<int>& states) const {
  std::size_t index = 0;
  for (std::size_t i = 0; i < num_states_.size(); ++i) {
    index = index * num_states_[i] + states[i];
  }
  return table_[index];
}

ViterbiMapOracle::ViterbiMapOracle(
    std::vector<int> num_states, std::vector<std::vector<double>> transitions)
    : num_states_(std::move(num_states)),
      transitions_(std::move(transitions)) {
  if (transitions_.size() + 1 != num_states_.size()) {
    throw std::invalid_argument("transition table count mismatch");
  }
  for (std::size_t p = 0; p + 1 < num_states_.size(); ++p) {
    if (transitions_[p].size() !=
        static_cast<std::size_t>(num_states_[p]) * num_states_[p + 1]) {
      throw std::invalid_argument("transition table size mismatch");
    }
  }
}

MapConfig ViterbiMapOracle::compute_map(
    const std::vector<std::vector<double>>& adjustments) const {
  const int length = static_cast<int>(num_states_.size());
  // best_suffix[p][s]: best score of the chain from position p onward when
  // position p is in state s. Computed backward so that greedy forward
  // selection realizes the lowest-state tie-break.
  std::vector<std::vector<double>> best_suffix(length);
  for (int p = length - 1; p >= 0; --p) {
    best_suffix[p].assign(num_states_[p], 0.0);
    for (int s = 0; s < num_states_[p]; ++s) {
      double value = adjustments[p][s];
      if (p + 1 < length) {
        double best = -std::numeric_limits<double>::infinity();
        for (int t = 0; t < num_states_[p + 1]; ++t) {
          best = std::max(best, transitions_[p][s * num_states_[p + 1] + t] +
                                    best_suffix[p + 1][t]);
        }
        value += best;
      }
      best_suffix[p][s] = value;
    }
  }
  MapConfig config;
  config.states.resize(length);
  for (int p = 0; p < length; ++p) {
    int chosen = 0;
    double best = -std::numeric_limits<double>::infinity();
    for (int s = 0; s < num_states_[p]; ++s) {
      double value = best_suffix[p][s];
      if (p > 0) {
        value += transitions_[p - 1][config.states[p - 1] * num_states_[p] + s];
      }
      if (value > best) {
        best = value;
        chosen = s;
      }
    }
    config.states[p] = chosen;
    if (p == 0) config.score = best;
  }
  return config;
}

double ViterbiMapOracle::score(const std::vector<int>& states) const {
  double total = 0.0;
  for (std::size_t p = 0; p + 1 < num_states_.size(); ++p) {
    total += transitions_[p][states[p] * num_states_[p + 1] + states[p + 1]];
  }
  return total;
}

}  // namespace ad3
