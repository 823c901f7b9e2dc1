#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "diffeo/haar.hpp"

namespace {

std::vector<double> random_array(std::size_t n) {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  std::vector<double> x(n);
  for (double& v : x) v = dist(rng);
  return x;
}

void BM_fwt_square(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const std::vector<int> shape = {side, side};
  const auto x = random_array(diffeo::element_count(shape));
  for (auto _ : state) {
    benchmark::DoNotOptimize(diffeo::fwt(x, shape, 1.0));
  }
  state.SetComplexityN(static_cast<int64_t>(x.size()));
}
BENCHMARK(BM_fwt_square)->RangeMultiplier(2)->Range(16, 256)->Complexity();

void BM_fwt_iwt_roundtrip_nondyadic(benchmark::State& state) {
  const std::vector<int> shape = {105, 100};  // non-dyadic extents
  const auto x = random_array(diffeo::element_count(shape));
  for (auto _ : state) {
    const diffeo::WaveletPyramid p = diffeo::fwt(x, shape, 1.0);
    benchmark::DoNotOptimize(diffeo::iwt(p));
  }
}
BENCHMARK(BM_fwt_iwt_roundtrip_nondyadic);

void BM_renormalization_factors(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const std::vector<int> shape = {side, side};
  for (auto _ : state) {
    benchmark::DoNotOptimize(diffeo::renormalization_factors(shape));
  }
}
BENCHMARK(BM_renormalization_factors)->Arg(64)->Arg(256);

}  // namespace
