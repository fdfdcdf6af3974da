// Active-set method for the consensus quadratic subproblem of an arbitrary
// factor, driven only by a MAP oracle, plus the shipped oracles
// (brute-force dense tables, Viterbi over chains).

#ifndef AD3_ACTIVESET_HPP_
#define AD3_ACTIVESET_HPP_

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <vector>

namespace ad3 {

struct MapConfig {
  std::vector<int> states;  // one state per incident variable
  double score = 0.0;       // factor score plus adjustments
};

// Black box returning a factor's best configuration under per-variable
// score adjustments. Implementations must be deterministic and must skip
// configurations whose factor score is -inf.
class MapOracle {
 public:
  virtual ~MapOracle() = default;
  // argmax over configurations of score(y) + sum_i adjustments[i][y_i]
  virtual MapConfig compute_map(
      const std::vector<std::vector<double>>& adjustments) const = 0;
  // factor score of a single configuration
  virtual double score(const std::vector<int>& states) const = 0;
  virtual const std::vector<int>& num_states() const = 0;
};

class InfeasibleFactorError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class OracleInconsistencyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DegenerateWorksetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Working set of configurations with the cached Gram matrix
// gram(r, s) = number of positions where configurations r and s agree.
struct ActiveSetState {
  std::vector<std::vector<int>> workset;
  std::vector<double> gram;  // row-major |workset| x |workset|
  std::vector<double> weights;
  double tau = 0.0;

  int size() const { return static_cast<int>(workset.size()); }
  double gram_at(int r, int s) const { return gram[r * size() + s]; }
  void push_config(const std::vector<int>& config);
  void remove_config(int index);
};

struct QpSolution {
  std::vector<std::vector<double>> u;  // per-variable marginals
  std::vector<std::pair<std::vector<int>, double>> support;  // (config, weight)
  double tau = 0.0;
  int oracle_calls = 0;
  std::vector<double> dual_trace;  // dual objective after each inner iteration
};

// Solves the bordered Gram system
//   [ G  1 ] [v]   [ m_r^T a + b_r ]
//   [ 1' 0 ] [t] = [ 1 ]
// for the current working set. Throws DegenerateWorksetError when the
// system is singular beyond null-space recovery.
void solve_kkt(const ActiveSetState& state,
               const std::vector<std::vector<double>>& a,
               const std::vector<double>& b, std::vector<double>* weights,
               double* tau);

// Runs the active-set iteration for at most max_inner rounds:
// minimize 0.5 ||u - a||^2 - sum_r b_r v_r over the factor's local polytope,
// where b_r = b_scale * oracle.score(config_r). The state is updated in
// place and can warm-start the next call.
QpSolution solve_qp_active_set(const MapOracle& oracle,
                               const std::vector<std::vector<double>>& a,
                               double b_scale, ActiveSetState* state,
                               int max_inner);

// Exhaustive argmax over a dense table; lexicographic tie-break.
class DenseMapOracle : public MapOracle {
 public:
  DenseMapOracle(std::vector<int> num_states, std::vector<double> table);
  MapConfig compute_map(
      const std::vector<std::vector<double>>& adjustments) const override;
  double score(const std::vector<int>& states) const override;
  const std::vector<int>& num_states() const override { return num_states_; }

 private:
  std::vector<int> num_states_;
  std::vector<double> table_;
};

// Max-sum dynamic program over a chain; lowest-state tie-break during
// backtracking.
class ViterbiMapOracle : public MapOracle {
 public:
  ViterbiMapOracle(std::vector<int> num_states,
                   std::vector<std::vector<double>> transitions);
  MapConfig compute_map(
      const std::vector<std::vector<double>>& adjustments) const override;
  double score(const std::vector<int>& states) const override;
  const std::vector<int>& num_states() const override { return num_states_; }

 private:
  std::vector<int> num_states_;
  std::vector<std::vector<double>> transitions_;
};

}  // namespace ad3

#endif  // AD3_ACTIVESET_HPP_
