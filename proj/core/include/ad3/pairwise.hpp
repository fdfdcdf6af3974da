// Closed-form solution of the consensus subproblem for binary pairwise
// factors.

#ifndef AD3_PAIRWISE_HPP_
#define AD3_PAIRWISE_HPP_

#include <array>

namespace ad3 {

struct PairwiseCoefficients {
  double c1 = 0.0;
  double c2 = 0.0;
  double c12 = 0.0;
};

// Marginals in the reduced parametrization
// q = (1 - z1 - z2 + z12, z1 - z12, z2 - z12, z12).
struct PairwiseSolution {
  double z1 = 0.0;
  double z2 = 0.0;
  double z12 = 0.0;
};

// Reduces target pairs a1, a2 and the 4-entry score table b (order 00, 01,
// 10, 11) to the three coefficients of the scalar problem.
PairwiseCoefficients compute_pair_coefficients(
    const std::array<double, 2>& a1, const std::array<double, 2>& a2,
    const std::array<double, 4>& b);

// Minimizes 0.5 (z1-c1)^2 + 0.5 (z2-c2)^2 - c12 z12 subject to
// z12 <= z1, z12 <= z2, z12 >= z1 + z2 - 1, z in [0,1]^3.
PairwiseSolution solve_qp_pair(const PairwiseCoefficients& c);

}  // namespace ad3

#endif  // AD3_PAIRWISE_HPP_
