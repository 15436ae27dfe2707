#include <benchmark/benchmark.h>

#include <random>

#include "../tests/support/random_networks.hpp"
#include "polyinv/attention.hpp"
#include "polyinv/gp.hpp"
#include "polyinv/gpopt.hpp"
#include "polyinv/invariance.hpp"
#include "polyinv/polynet.hpp"

namespace {

using namespace polyinv;

void bm_evaluate(benchmark::State& state) {
  const int width = static_cast<int>(state.range(0));
  const std::vector<int> dims = {width, width, width, width};
  const auto net = testing::make_random_network(dims, {2.0, 2.0}, 42);
  Vector x(width, 0.5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(evaluate(net, x));
  }
}
BENCHMARK(bm_evaluate)->Arg(4)->Arg(16)->Arg(64);

void bm_apply_element(benchmark::State& state) {
  const int width = static_cast<int>(state.range(0));
  const std::vector<int> dims = {width, width, width, width};
  const std::vector<double> alphas = {2.0, 2.0};
  const auto net = testing::make_random_network(dims, alphas, 7);
  const auto g = random_element(dims, alphas, 11);
  for (auto _ : state) {
    benchmark::DoNotOptimize(apply(net, g));
  }
}
BENCHMARK(bm_apply_element)->Arg(4)->Arg(16)->Arg(64);

void bm_solve_range_gp(benchmark::State& state) {
  const int width = static_cast<int>(state.range(0));
  const std::vector<int> dims = {width, width, width, width};
  const auto net = testing::make_unbalanced_network(dims, {2.0, 2.0}, 99);
  const GpProblem problem = build_range_gp(net);
  for (auto _ : state) {
    benchmark::DoNotOptimize(solve_gp(problem));
  }
}
BENCHMARK(bm_solve_range_gp)->Arg(4)->Arg(8);

void bm_block_forward(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  const auto bp = make_random_block(d, 4 * d, d / 2, FfnActivation::Relu, 3);
  std::mt19937_64 rng(5);
  const Matrix x = random_gaussian(16, d, rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(block_forward(bp, x));
  }
}
BENCHMARK(bm_block_forward)->Arg(8)->Arg(32);

}  // namespace

BENCHMARK_MAIN();
