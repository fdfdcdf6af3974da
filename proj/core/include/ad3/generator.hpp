// Deterministic synthetic grid instances (Ising and Potts) built on a
// fixed, documented 64-bit PRNG so instances reproduce byte-for-byte across
// platforms and language reimplementations.

#ifndef AD3_GENERATOR_HPP_
#define AD3_GENERATOR_HPP_

#include <array>
#include <cstdint>

#include "ad3/graph.hpp"

namespace ad3 {

// splitmix64: used only to expand a user seed into stream state.
std::uint64_t splitmix64_next(std::uint64_t* state);

// xoshiro256++ stream, seeded via four splitmix64 draws.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);
  std::uint64_t next_u64();
  // uniform in [0, 1): top 53 bits scaled by 2^-53
  double next_double();
  // uniform in [lo, hi)
  double uniform(double lo, double hi);

 private:
  std::array<std::uint64_t, 4> s_;
};

enum class Family { kIsing, kPotts };

struct GeneratorSpec {
  Family family = Family::kIsing;
  int rows = 1;
  int cols = 1;
  int num_states = 2;  // POTTS only
  double rho = 1.0;    // ISING coupling half-width
  std::uint64_t seed = 0;
};

// Grid Ising model: binary variables with theta_i(0)=0, theta_i(1)~U[-1,1];
// PAIR factors on 4-neighbor edges with only b(1,1)~U[-rho,rho] nonzero.
FactorGraph gen_ising(const GeneratorSpec& spec);

// Grid Potts model: num_states-valued variables with unaries ~U[-1,1];
// DENSE factors on 4-neighbor edges with diagonal entries ~U[-10,10] and
// zero off-diagonal.
FactorGraph gen_potts(const GeneratorSpec& spec);

}  // namespace ad3

#endif  // AD3_GENERATOR_HPP_
