// Microbenchmarks for the hot paths: polytope projections, the pairwise
// closed form, and full consensus iterations on grid instances.

#include <benchmark/benchmark.h>

#include <vector>

#include "ad3/generator.hpp"
#include "ad3/logic.hpp"
#include "ad3/pairwise.hpp"
#include "ad3/solver.hpp"

namespace {

std::vector<std::vector<double>> random_points(int count, int dim,
                                               std::uint64_t seed) {
  ad3::Rng rng(seed);
  std::vector<std::vector<double>> points(count);
  for (auto& point : points) {
    point.resize(dim);
    for (double& value : point) value = rng.uniform(-2.0, 3.0);
  }
  return points;
}

void BM_ProjectSimplex(benchmark::State& state) {
  const auto points = random_points(1024, static_cast<int>(state.range(0)), 1);
  std::size_t index = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        ad3::project_simplex(points[index++ % points.size()]));
  }
}
BENCHMARK(BM_ProjectSimplex)->Arg(4)->Arg(16)->Arg(64);

void BM_ProjectOrOut(benchmark::State& state) {
  const auto points = random_points(1024, static_cast<int>(state.range(0)), 2);
  std::size_t index = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        ad3::project_or_out(points[index++ % points.size()]));
  }
}
BENCHMARK(BM_ProjectOrOut)->Arg(4)->Arg(16)->Arg(64);

void BM_SolveQpPair(benchmark::State& state) {
  const auto points = random_points(1024, 3, 3);
  std::size_t index = 0;
  for (auto _ : state) {
    const auto& p = points[index++ % points.size()];
    benchmark::DoNotOptimize(ad3::solve_qp_pair({p[0], p[1], p[2]}));
  }
}
BENCHMARK(BM_SolveQpPair);

void BM_Ad3IsingIteration(benchmark::State& state) {
  ad3::GeneratorSpec spec;
  spec.rows = spec.cols = static_cast<int>(state.range(0));
  spec.rho = 1.0;
  spec.seed = 4;
  const ad3::FactorGraph graph = ad3::gen_ising(spec);
  ad3::SolverConfig config;
  config.max_iters = 50;
  config.residual_tol = 1e-14;
  for (auto _ : state) {
    benchmark::DoNotOptimize(ad3::run_ad3(graph, config));
  }
  state.SetItemsProcessed(state.iterations() * config.max_iters);
}
BENCHMARK(BM_Ad3IsingIteration)->Arg(6)->Arg(10);

void BM_Ad3PottsIteration(benchmark::State& state) {
  ad3::GeneratorSpec spec;
  spec.family = ad3::Family::kPotts;
  spec.rows = spec.cols = 4;
  spec.num_states = static_cast<int>(state.range(0));
  spec.seed = 5;
  const ad3::FactorGraph graph = ad3::gen_potts(spec);
  ad3::SolverConfig config;
  config.max_iters = 20;
  config.residual_tol = 1e-14;
  for (auto _ : state) {
    benchmark::DoNotOptimize(ad3::run_ad3(graph, config));
  }
  state.SetItemsProcessed(state.iterations() * config.max_iters);
}
BENCHMARK(BM_Ad3PottsIteration)->Arg(3)->Arg(5);

}  // namespace

BENCHMARK_MAIN();
