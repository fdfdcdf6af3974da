#include "ad3/logic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace ad3 {

namespace {

constexpr double kFeasTol = 1e-12;

double clip_unit(double x) { return std::min(std::max(x, 0.0), 1.0); }

}  // namespace

std::vector<double> project_simplex(const std::vector<double>& z0) {
  const int k = static_cast<int>(z0.size());
  std::vector<double> sorted(z0);
  std::stable_sort(sorted.begin(), sorted.end(), std::greater<double>());
  double prefix = 0.0;
  double tau = 0.0;
  for (int j = 0; j < k; ++j) {
    prefix += sorted[j];
    const double candidate = (prefix - 1.0) / (j + 1);
    if (sorted[j] - candidate > 0.0) tau = candidate;
  }
  std::vector<double> z(z0.size());
  for (int i = 0; i < k; ++i) z[i] = std::max(z0[i] - tau, 0.0);
  return z;
}

std::vector<double> project_or(const std::vector<double>& z0) {
  std::vector<double> clipped(z0.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < z0.size(); ++i) {
    clipped[i] = clip_unit(z0[i]);
    sum += clipped[i];
  }
  if (sum >= 1.0 - kFeasTol) return clipped;
  return project_simplex(z0);
}

std::vector<double> project_cone_a1(const std::vector<double>& z0) {
  const int k = static_cast<int>(z0.size()) - 1;
  if (k < 1) throw std::invalid_argument("cone projection needs K >= 1");
  std::vector<double> sorted(z0.begin(), z0.end() - 1);
  std::stable_sort(sorted.begin(), sorted.end(), std::greater<double>());
  double acc = z0[k];
  double tau = 0.0;
  for (int j = 1; j <= k + 1; ++j) {
    tau = acc / j;
    if (j > k || tau > sorted[j - 1]) break;
    acc += sorted[j - 1];
  }
  std::vector<double> z(z0.size());
  for (int i = 0; i < k; ++i) z[i] = std::min(z0[i], tau);
  z[k] = tau;
  return z;
}

namespace {

bool in_cone(const std::vector<double>& z) {
  const double out = z.back();
  for (std::size_t i = 0; i + 1 < z.size(); ++i) {
    if (z[i] > out + kFeasTol) return false;
  }
  return true;
}

bool sum_dominates_output(const std::vector<double>& z) {
  const double sum = std::accumulate(z.begin(), z.end() - 1, 0.0);
  return sum >= z.back() - kFeasTol;
}

// Projection onto {z in [0,1]^{K+1} | sum_k z_k = z_out}: a XOR polytope
// with the output coordinate reflected.
std::vector<double> project_xor_negated_output(const std::vector<double>& z0) {
  std::vector<double> reflected(z0);
  reflected.back() = 1.0 - reflected.back();
  std::vector<double> z = project_simplex(reflected);
  z.back() = 1.0 - z.back();
  return z;
}

}  // namespace

std::vector<double> project_or_out(const std::vector<double>& z0) {
  if (z0.size() < 2) {
    throw std::invalid_argument("OR_OUT projection needs K >= 1");
  }
  std::vector<double> clipped(z0.size());
  for (std::size_t i = 0; i < z0.size(); ++i) clipped[i] = clip_unit(z0[i]);
  const bool cone_ok = in_cone(clipped);
  if (cone_ok && sum_dominates_output(clipped)) return clipped;
  if (!cone_ok) {
    std::vector<double> z = project_cone_a1(z0);
    for (double& value : z) value = clip_unit(value);
    if (sum_dominates_output(z)) return z;
  }
  return project_xor_negated_output(z0);
}

std::vector<double> apply_signs(const std::vector<double>& z,
                                const std::vector<bool>& flags) {
  std::vector<double> out(z);
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (flags[i]) out[i] = 1.0 - out[i];
  }
  return out;
}

std::vector<std::array<double, 2>> solve_qp_logic(
    FactorKind kind, const std::vector<bool>& signs,
    const std::vector<std::array<double, 2>>& a) {
  if (!is_logic_kind(kind)) {
    throw std::invalid_argument("solve_qp_logic expects a logic kind");
  }
  if (signs.size() != a.size()) {
    throw std::invalid_argument("sign mask length mismatch");
  }
  std::vector<double> z0(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    z0[i] = (a[i][1] + 1.0 - a[i][0]) / 2.0;
  }
  z0 = apply_signs(z0, signs);
  std::vector<double> z;
  switch (kind) {
    case FactorKind::kXor: z = project_simplex(z0); break;
    case FactorKind::kOr: z = project_or(z0); break;
    case FactorKind::kOrOut: z = project_or_out(z0); break;
    default: break;
  }
  z = apply_signs(z, signs);
  std::vector<std::array<double, 2>> q(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) q[i] = {1.0 - z[i], z[i]};
  return q;
}

}  // namespace ad3
