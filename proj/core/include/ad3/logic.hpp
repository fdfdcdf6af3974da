// Exact Euclidean projections onto the marginal polytopes of the
// hard-constraint logic factors (XOR, OR, OR-with-output), with negation
// handled by coordinate reflection.

#ifndef AD3_LOGIC_HPP_
#define AD3_LOGIC_HPP_

#include <array>
#include <vector>

#include "ad3/graph.hpp"

namespace ad3 {

// Projection onto the probability simplex {z >= 0, sum z = 1}.
std::vector<double> project_simplex(const std::vector<double>& z0);

// Projection onto {z in [0,1]^K | sum z >= 1}: clip to the cube, fall back
// to the simplex when the clipped point misses the sum constraint.
std::vector<double> project_or(const std::vector<double>& z0);

// Projection onto the cone {z | z_k <= z_out for all k}, output coordinate
// last. Sort-based threshold search.
std::vector<double> project_cone_a1(const std::vector<double>& z0);

// Projection onto {z in [0,1]^{K+1} | sum_k z_k >= z_out, z_k <= z_out},
// output coordinate last. Three-stage sifting procedure.
std::vector<double> project_or_out(const std::vector<double>& z0);

// Reflects flagged coordinates: z_k -> 1 - z_k.
std::vector<double> apply_signs(const std::vector<double>& z,
                                const std::vector<bool>& flags);

// Solves the quadratic consensus subproblem of a logic factor given the
// per-variable target pairs a_i = (a_i(0), a_i(1)). Returns the
// per-variable marginals q_i = (1 - z_i, z_i).
std::vector<std::array<double, 2>> solve_qp_logic(
    FactorKind kind, const std::vector<bool>& signs,
    const std::vector<std::array<double, 2>>& a);

}  // namespace ad3

#endif  // AD3_LOGIC_HPP_
