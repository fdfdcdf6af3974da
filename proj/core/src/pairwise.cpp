#include "ad3/pairwise.hpp"

#include <algorithm>

namespace ad3 {

namespace {

double clip_unit(double x) { return std::min(std::max(x, 0.0), 1.0); }

}  // namespace

PairwiseCoefficients compute_pair_coefficients(
    const std::array<double, 2>& a1, const std::array<double, 2>& a2,
    const std::array<double, 4>& b) {
  // b indexed as (y1, y2): b[2*y1 + y2]
  PairwiseCoefficients c;
  c.c1 = (a1[1] + 1.0 - a1[0] - b[0] + b[2]) / 2.0;
  c.c2 = (a2[1] + 1.0 - a2[0] - b[0] + b[1]) / 2.0;
  c.c12 = (b[0] - b[2] - b[1] + b[3]) / 2.0;
  return c;
}

PairwiseSolution solve_qp_pair(const PairwiseCoefficients& c) {
  PairwiseSolution s;
  if (c.c12 >= 0.0) {
    if (c.c1 > c.c2 + c.c12) {
      s.z1 = clip_unit(c.c1);
      s.z2 = clip_unit(c.c2 + c.c12);
    } else if (c.c2 > c.c1 + c.c12) {
      s.z1 = clip_unit(c.c1 + c.c12);
      s.z2 = clip_unit(c.c2);
    } else {
      s.z1 = s.z2 = clip_unit((c.c1 + c.c2 + c.c12) / 2.0);
    }
    s.z12 = std::min(s.z1, s.z2);
  } else {
    if (c.c1 + c.c2 + 2.0 * c.c12 > 1.0) {
      s.z1 = clip_unit(c.c1 + c.c12);
      s.z2 = clip_unit(c.c2 + c.c12);
    } else if (c.c1 + c.c2 < 1.0) {
      s.z1 = clip_unit(c.c1);
      s.z2 = clip_unit(c.c2);
    } else {
      s.z1 = clip_unit((c.c1 + 1.0 - c.c2) / 2.0);
      s.z2 = clip_unit((c.c2 + 1.0 - c.c1) / 2.0);
    }
    s.z12 = std::max(0.0, s.z1 + s.z2 - 1.0);
  }
  return s;
}

}  // namespace ad3
