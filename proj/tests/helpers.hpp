// Shared test utilities: independent QP oracles (facet enumeration,
// Dykstra, grid search), random instance builders, and the forward
// binarization image used to enumerate binarized graphs.

#ifndef AD3_TESTS_HELPERS_HPP_
#define AD3_TESTS_HELPERS_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "ad3/generator.hpp"
#include "ad3/graph.hpp"

namespace testutil {

// ---------------------------------------------------------------------------
// Small dense linear algebra for the oracles.

// Solves A x = rhs by Gaussian elimination with partial pivoting. Returns
// false when the matrix is singular within tolerance.
inline bool solve_linear(std::vector<double> a, std::vector<double> rhs,
                         int n, std::vector<double>* x) {
  for (int col = 0; col < n; ++col) {
    int pivot = col;
    for (int r = col + 1; r < n; ++r) {
      if (std::fabs(a[r * n + col]) > std::fabs(a[pivot * n + col])) pivot = r;
    }
    if (std::fabs(a[pivot * n + col]) < 1e-10) return false;
    if (pivot != col) {
      for (int c = 0; c < n; ++c) std::swap(a[pivot * n + c], a[col * n + c]);
      std::swap(rhs[pivot], rhs[col]);
    }
    for (int r = col + 1; r < n; ++r) {
      const double m = a[r * n + col] / a[col * n + col];
      if (m == 0.0) continue;
      for (int c = col; c < n; ++c) a[r * n + c] -= m * a[col * n + c];
      rhs[r] -= m * rhs[col];
    }
  }
  x->assign(n, 0.0);
  for (int r = n - 1; r >= 0; --r) {
    double sum = rhs[r];
    for (int c = r + 1; c < n; ++c) sum -= a[r * n + c] * (*x)[c];
    (*x)[r] = sum / a[r * n + r];
  }
  return true;
}

// ---------------------------------------------------------------------------
// Facet-enumeration projection oracle.
//
// A polytope is given as equalities Ez = f plus inequalities Gz <= h. The
// projection of z0 is found by enumerating subsets of inequalities treated
// as tight, solving each equality-constrained least-squares problem, and
// keeping the feasible candidate closest to z0.

struct Polytope {
  int dim = 0;
  std::vector<std::vector<double>> eq_rows;
  std::vector<double> eq_rhs;
  std::vector<std::vector<double>> ineq_rows;
  std::vector<double> ineq_rhs;
};

// min ||z - z0||^2 s.t. rows * z = rhs, via the normal equations of the
// KKT system: z = z0 + rows^T mu, (rows rows^T) mu = rhs - rows z0.
inline bool project_affine(const std::vector<double>& z0,
                           const std::vector<std::vector<double>>& rows,
                           const std::vector<double>& rhs,
                           std::vector<double>* z) {
  const int n = static_cast<int>(z0.size());
  const int m = static_cast<int>(rows.size());
  if (m == 0) {
    *z = z0;
    return true;
  }
  std::vector<double> gram(m * m, 0.0);
  std::vector<double> b(m, 0.0);
  for (int r = 0; r < m; ++r) {
    for (int s = 0; s < m; ++s) {
      double dot = 0.0;
      for (int c = 0; c < n; ++c) dot += rows[r][c] * rows[s][c];
      gram[r * m + s] = dot;
    }
    double dot = 0.0;
    for (int c = 0; c < n; ++c) dot += rows[r][c] * z0[c];
    b[r] = rhs[r] - dot;
  }
  std::vector<double> mu;
  if (!solve_linear(gram, b, m, &mu)) return false;
  *z = z0;
  for (int r = 0; r < m; ++r) {
    for (int c = 0; c < n; ++c) (*z)[c] += mu[r] * rows[r][c];
  }
  return true;
}

inline bool polytope_member(const Polytope& poly, const std::vector<double>& z,
                            double tol) {
  for (std::size_t r = 0; r < poly.eq_rows.size(); ++r) {
    double dot = 0.0;
    for (int c = 0; c < poly.dim; ++c) dot += poly.eq_rows[r][c] * z[c];
    if (std::fabs(dot - poly.eq_rhs[r]) > tol) return false;
  }
  for (std::size_t r = 0; r < poly.ineq_rows.size(); ++r) {
    double dot = 0.0;
    for (int c = 0; c < poly.dim; ++c) dot += poly.ineq_rows[r][c] * z[c];
    if (dot > poly.ineq_rhs[r] + tol) return false;
  }
  return true;
}

inline std::vector<double> facet_projection(const Polytope& poly,
                                            const std::vector<double>& z0) {
  const int num_ineq = static_cast<int>(poly.ineq_rows.size());
  std::vector<double> best;
  double best_dist = 0.0;
  bool found = false;
  // Active sets never need more than dim constraints beyond the equalities.
  const int max_active = poly.dim;
  std::vector<int> subset;
  auto consider = [&]() {
    std::vector<std::vector<double>> rows = poly.eq_rows;
    std::vector<double> rhs = poly.eq_rhs;
    for (int idx : subset) {
      rows.push_back(poly.ineq_rows[idx]);
      rhs.push_back(poly.ineq_rhs[idx]);
    }
    std::vector<double> z;
    if (!project_affine(z0, rows, rhs, &z)) return;
    if (!polytope_member(poly, z, 1e-9)) return;
    double dist = 0.0;
    for (int c = 0; c < poly.dim; ++c) {
      dist += (z[c] - z0[c]) * (z[c] - z0[c]);
    }
    if (!found || dist < best_dist) {
      best = z;
      best_dist = dist;
      found = true;
    }
  };
  auto recurse = [&](auto&& self, int start) -> void {
    consider();
    if (static_cast<int>(subset.size()) >= max_active) return;
    for (int idx = start; idx < num_ineq; ++idx) {
      subset.push_back(idx);
      self(self, idx + 1);
      subset.pop_back();
    }
  };
  recurse(recurse, 0);
  return best;
}

inline Polytope simplex_polytope(int k) {
  Polytope poly;
  poly.dim = k;
  poly.eq_rows.push_back(std::vector<double>(k, 1.0));
  poly.eq_rhs.push_back(1.0);
  for (int i = 0; i < k; ++i) {
    std::vector<double> row(k, 0.0);
    row[i] = -1.0;
    poly.ineq_rows.push_back(row);
    poly.ineq_rhs.push_back(0.0);
  }
  return poly;
}

inline Polytope box_polytope(int n) {
  Polytope poly;
  poly.dim = n;
  for (int i = 0; i < n; ++i) {
    std::vector<double> low(n, 0.0), high(n, 0.0);
    low[i] = -1.0;
    high[i] = 1.0;
    poly.ineq_rows.push_back(low);
    poly.ineq_rhs.push_back(0.0);
    poly.ineq_rows.push_back(high);
    poly.ineq_rhs.push_back(1.0);
  }
  return poly;
}

// Z_OR: unit cube with sum z >= 1.
inline Polytope or_polytope(int k) {
  Polytope poly = box_polytope(k);
  poly.ineq_rows.push_back(std::vector<double>(k, -1.0));
  poly.ineq_rhs.push_back(-1.0);
  return poly;
}

// Z_OR-out over (z_1..z_K, z_out): cube, z_k <= z_out, sum_k z_k >= z_out.
inline Polytope or_out_polytope(int k) {
  Polytope poly = box_polytope(k + 1);
  for (int i = 0; i < k; ++i) {
    std::vector<double> row(k + 1, 0.0);
    row[i] = 1.0;
    row[k] = -1.0;
    poly.ineq_rows.push_back(row);
    poly.ineq_rhs.push_back(0.0);
  }
  std::vector<double> row(k + 1, -1.0);
  row[k] = 1.0;
  poly.ineq_rows.push_back(row);
  poly.ineq_rhs.push_back(0.0);
  return poly;
}

// Cone A1 = {z : z_k <= z_out for all k}, unbounded.
inline Polytope cone_a1_polytope(int k) {
  Polytope poly;
  poly.dim = k + 1;
  for (int i = 0; i < k; ++i) {
    std::vector<double> row(k + 1, 0.0);
    row[i] = 1.0;
    row[k] = -1.0;
    poly.ineq_rows.push_back(row);
    poly.ineq_rhs.push_back(0.0);
  }
  return poly;
}

// ---------------------------------------------------------------------------
// Dykstra's alternating projection onto an intersection of convex sets,
// used as an extra oracle for the OR-with-output polytope.

inline std::vector<double> dykstra_or_out(const std::vector<double>& z0,
                                          int iterations) {
  const int n = static_cast<int>(z0.size());
  const int k = n - 1;
  auto project_cube = [&](std::vector<double> z) {
    for (double& value : z) value = std::min(std::max(value, 0.0), 1.0);
    return z;
  };
  const Polytope cone = cone_a1_polytope(k);
  auto project_a1 = [&](const std::vector<double>& z) {
    return facet_projection(cone, z);
  };
  auto project_halfspace = [&](std::vector<double> z) {
    // {sum_k z_k >= z_out} with normal g = (1,..,1,-1)
    double violation = -z[n - 1];
    for (int i = 0; i < k; ++i) violation += z[i];
    if (violation >= 0.0) return z;
    const double shift = -violation / n;
    for (int i = 0; i < k; ++i) z[i] += shift;
    z[n - 1] -= shift;
    return z;
  };
  std::vector<std::vector<double>> corrections(3,
                                               std::vector<double>(n, 0.0));
  std::vector<double> z = z0;
  for (int t = 0; t < iterations; ++t) {
    for (int set = 0; set < 3; ++set) {
      std::vector<double> y(n);
      for (int i = 0; i < n; ++i) y[i] = z[i] + corrections[set][i];
      std::vector<double> projected;
      if (set == 0) projected = project_cube(y);
      else if (set == 1) projected = project_a1(y);
      else projected = project_halfspace(y);
      for (int i = 0; i < n; ++i) {
        corrections[set][i] = y[i] - projected[i];
      }
      z = std::move(projected);
    }
  }
  return z;
}

// ---------------------------------------------------------------------------
// Random instance builders (driven by the library's deterministic RNG).

// Random tree over n variables with mixed PAIR/DENSE factors on its edges.
// State counts are 2 for PAIR edges and 2..max_states for DENSE edges.
inline ad3::FactorGraph random_tree(int n, int max_states, ad3::Rng* rng) {
  ad3::FactorGraph graph;
  // decide state counts after attaching factor kinds; PAIR needs binary ends
  std::vector<int> parent(n, -1);
  for (int i = 1; i < n; ++i) {
    parent[i] = static_cast<int>(rng->next_u64() % i);
  }
  std::vector<bool> needs_binary(n, false);
  std::vector<int> kind(n, 0);  // per non-root node: 0 = PAIR, 1 = DENSE
  for (int i = 1; i < n; ++i) {
    kind[i] = rng->next_double() < 0.5 ? 0 : 1;
    if (kind[i] == 0) {
      needs_binary[i] = true;
      needs_binary[parent[i]] = true;
    }
  }
  for (int i = 0; i < n; ++i) {
    ad3::Variable var;
    var.id = i;
    var.num_states =
        needs_binary[i] ? 2
                        : 2 + static_cast<int>(rng->next_u64() %
                                               (max_states - 1));
    var.unary.resize(var.num_states);
    for (double& value : var.unary) value = rng->uniform(-1.0, 1.0);
    graph.variables.push_back(std::move(var));
  }
  for (int i = 1; i < n; ++i) {
    ad3::Factor factor;
    factor.variables = {parent[i], i};
    if (kind[i] == 0) {
      factor.kind = ad3::FactorKind::kPair;
      factor.table.resize(4);
    } else {
      factor.kind = ad3::FactorKind::kDense;
      factor.table.resize(graph.variables[parent[i]].num_states *
                          graph.variables[i].num_states);
    }
    for (double& value : factor.table) value = rng->uniform(-1.0, 1.0);
    const int f = graph.num_factors();
    graph.edges.emplace_back(parent[i], f);
    graph.edges.emplace_back(i, f);
    graph.factors.push_back(std::move(factor));
  }
  ad3::validate_graph(graph);
  return graph;
}

// Frustrated cycle: binary variables on a cycle, disagreement-rewarding PAIR
// tables, with one agreement-rewarding edge on even lengths so the cycle is
// frustrated (odd sign product) and the root LP is fractional.
inline ad3::FactorGraph frustrated_cycle(int length, ad3::Rng* rng) {
  ad3::FactorGraph graph;
  for (int i = 0; i < length; ++i) {
    ad3::Variable var;
    var.id = i;
    var.num_states = 2;
    var.unary = {0.0, rng->uniform(-0.05, 0.05)};
    graph.variables.push_back(std::move(var));
  }
  for (int i = 0; i < length; ++i) {
    const int j = (i + 1) % length;
    const double w = rng->uniform(0.5, 1.5);
    ad3::Factor factor;
    factor.kind = ad3::FactorKind::kPair;
    factor.variables = {i, j};
    const bool attractive = length % 2 == 0 && i == 0;
    factor.table = attractive ? std::vector<double>{w, 0.0, 0.0, w}
                              : std::vector<double>{0.0, w, w, 0.0};
    const int f = graph.num_factors();
    graph.edges.emplace_back(i, f);
    graph.edges.emplace_back(j, f);
    graph.factors.push_back(std::move(factor));
  }
  ad3::validate_graph(graph);
  return graph;
}

// ---------------------------------------------------------------------------
// Forward binarization image: maps an original assignment to the
// corresponding assignment of the binarized graph. Mirrors the binarize
// construction order (state indicators per variable, then configuration
// indicators per factor).
inline ad3::Assignment binarized_image(const ad3::FactorGraph& original,
                                       const ad3::BinarizeResult& bin,
                                       const ad3::Assignment& assignment) {
  ad3::Assignment image;
  image.states.assign(bin.graph.num_variables(), 0);
  for (int i = 0; i < original.num_variables(); ++i) {
    image.states[bin.map.state_vars[i][assignment.states[i]]] = 1;
  }
  int next = 0;
  for (int i = 0; i < original.num_variables(); ++i) {
    next += original.variables[i].num_states;
  }
  for (const ad3::Factor& factor : original.factors) {
    std::uint64_t index = 0;
    for (int v : factor.variables) {
      index = index * original.variables[v].num_states + assignment.states[v];
    }
    std::uint64_t num_configs = 1;
    for (int v : factor.variables) {
      num_configs *= original.variables[v].num_states;
    }
    image.states[next + static_cast<int>(index)] = 1;
    next += static_cast<int>(num_configs);
  }
  return image;
}

}  // namespace testutil

#endif  // AD3_TESTS_HELPERS_HPP_
