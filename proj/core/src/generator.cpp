#include "ad3/generator.hpp"

#include <stdexcept>

namespace ad3 {

namespace {

std::uint64_t rotl(std::uint64_t x, int k) {
  return (x << k) | (x >> (64 - k));
}

}  // namespace

std::uint64_t splitmix64_next(std::uint64_t* state) {
  std::uint64_t z = (*state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Rng::Rng(std::uint64_t seed) {
  for (std::uint64_t& word : s_) word = splitmix64_next(&seed);
}

std::uint64_t Rng::next_u64() {
  const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Rng::next_double() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
  return lo + (hi - lo) * next_double();
}

namespace {

void check_spec(const GeneratorSpec& spec) {
  if (spec.rows < 1 || spec.cols < 1) {
    throw std::invalid_argument("grid dimensions must be positive");
  }
  if (spec.rho <= 0.0) throw std::invalid_argument("rho must be positive");
}

// Adds 4-neighbor PAIR/DENSE factors in a canonical order: cells row-major,
// right edge before down edge. Couplings are drawn in this order, after all
// unaries.
template <typename MakeTable>
void add_grid_factors(FactorGraph* graph, const GeneratorSpec& spec,
                      FactorKind kind, MakeTable make_table) {
  for (int r = 0; r < spec.rows; ++r) {
    for (int c = 0; c < spec.cols; ++c) {
      const int v = r * spec.cols + c;
      const int neighbors[2] = {c + 1 < spec.cols ? v + 1 : -1,
                                r + 1 < spec.rows ? v + spec.cols : -1};
      for (int w : neighbors) {
        if (w < 0) continue;
        Factor factor;
        factor.kind = kind;
        factor.variables = {v, w};
        factor.table = make_table();
        const int f = static_cast<int>(graph->factors.size());
        graph->factors.push_back(std::move(factor));
        graph->edges.emplace_back(v, f);
        graph->edges.emplace_back(w, f);
      }
    }
  }
}

}  // namespace

FactorGraph gen_ising(const GeneratorSpec& spec) {
  check_spec(spec);
  Rng rng(spec.seed);
  FactorGraph graph;
  const int n = spec.rows * spec.cols;
  for (int i = 0; i < n; ++i) {
    Variable var;
    var.id = i;
    var.num_states = 2;
    var.unary = {0.0, rng.uniform(-1.0, 1.0)};
    graph.variables.push_back(std::move(var));
  }
  add_grid_factors(&graph, spec, FactorKind::kPair, [&rng, &spec]() {
    return std::vector<double>{0.0, 0.0, 0.0,
                               rng.uniform(-spec.rho, spec.rho)};
  });
  validate_graph(graph);
  return graph;
}

FactorGraph gen_potts(const GeneratorSpec& spec) {
  check_spec(spec);
  if (spec.num_states < 2) {
    throw std::invalid_argument("num_states must be at least 2");
  }
  Rng rng(spec.seed);
  FactorGraph graph;
  const int n = spec.rows * spec.cols;
  const int k = spec.num_states;
  for (int i = 0; i < n; ++i) {
    Variable var;
    var.id = i;
    var.num_states = k;
    var.unary.resize(k);
    for (double& value : var.unary) value = rng.uniform(-1.0, 1.0);
    graph.variables.push_back(std::move(var));
  }
  add_grid_factors(&graph, spec, FactorKind::kDense, [&rng, k]() {
    std::vector<double> table(k * k, 0.0);
    for (int s = 0; s < k; ++s) table[s * k + s] = rng.uniform(-10.0, 10.0);
    return table;
  });
  validate_graph(graph);
  return graph;
}

}  // namespace ad3
