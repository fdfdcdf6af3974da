// Factor graph data model: variables with finite state sets, factors with
// typed potentials, scoring, text serialization, binarization, and a
// brute-force exact-MAP oracle for small instances.

#ifndef AD3_GRAPH_HPP_
#define AD3_GRAPH_HPP_

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ad3 {

// Log-potentials live in R U {-inf}; kNegInf marks forbidden configurations.
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

enum class FactorKind { kDense, kPair, kXor, kOr, kOrOut, kSequence };

const char* factor_kind_name(FactorKind kind);
bool is_logic_kind(FactorKind kind);

struct Variable {
  int id = 0;
  int num_states = 0;
  std::vector<double> unary;  // length num_states, entries in R U {-inf}
};

struct Factor {
  FactorKind kind = FactorKind::kDense;
  std::vector<int> variables;  // incident variable indices, declaration order
  // Logic kinds only: true marks a negated input. For kOrOut the last
  // incident variable is the output.
  std::vector<bool> negated;
  // kDense: full table over the incident variables' state product, row-major.
  // kPair: 4 entries (00, 01, 10, 11).
  std::vector<double> table;
  // kSequence: one |Y_p| x |Y_{p+1}| row-major table per adjacent pair.
  std::vector<std::vector<double>> transitions;

  int degree() const { return static_cast<int>(variables.size()); }
};

struct FactorGraph {
  std::vector<Variable> variables;
  std::vector<Factor> factors;
  // (variable, factor) pairs in declaration order.
  std::vector<std::pair<int, int>> edges;

  int num_variables() const { return static_cast<int>(variables.size()); }
  int num_factors() const { return static_cast<int>(factors.size()); }
};

struct Assignment {
  std::vector<int> states;  // one state index per variable

  bool operator==(const Assignment&) const = default;
};

struct MapResult {
  Assignment assignment;
  double value = kNegInf;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(int line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Checks structural invariants; throws ValidationError on the first breach.
void validate_graph(const FactorGraph& graph);

// Parses the line-based text format. Throws ParseError on malformed input
// and ValidationError if the parsed graph is inconsistent.
FactorGraph parse_graph(const std::string& text);

// Deterministic inverse of parse_graph: the output re-parses to a
// structurally identical graph.
std::string serialize_graph(const FactorGraph& graph);

// Score of a single factor under the given states of its incident variables.
double factor_score(const Factor& factor, const FactorGraph& graph,
                    const std::vector<int>& states);

// MAP objective: sum of unary and factor scores. Logic factors contribute 0
// when satisfied and -inf otherwise.
double evaluate(const FactorGraph& graph, const Assignment& assignment);

// Exhaustive argmax over all assignments; ties go to the lexicographically
// smallest. Refuses instances whose configuration count exceeds the cap.
MapResult brute_force_map(const FactorGraph& graph,
                          std::uint64_t enumeration_cap = (1ull << 24));

// Recovers an assignment of the original graph from one of its binarization.
struct BinarizeMap {
  // state_vars[i][s] is the binarized variable indicating state s of
  // original variable i.
  std::vector<std::vector<int>> state_vars;

  Assignment recover(const Assignment& binarized) const;
};

struct BinarizeResult {
  FactorGraph graph;
  BinarizeMap map;
};

// Converts a graph with DENSE/PAIR factors into an equivalent one with only
// binary variables and XOR factors. Original unary potentials move onto the
// per-state indicator variables; factor tables onto per-configuration
// indicator variables.
BinarizeResult binarize(const FactorGraph& graph);

}  // namespace ad3

#endif  // AD3_GRAPH_HPP_
