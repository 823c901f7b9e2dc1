#include <benchmark/benchmark.h>

#include <random>

#include "diffeo/datasets.hpp"
#include "diffeo/geodesic.hpp"
#include "diffeo/objective.hpp"

namespace {

diffeo::MomentumField toy_momenta(double sigma_g) {
  const std::vector<int> shape = {50, 50};
  diffeo::MomentumField m =
      diffeo::MomentumField::zeros(diffeo::make_control_grid(shape, sigma_g));
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> dist(-0.4, 0.4);
  for (double& a : m.alphas) a = dist(rng);
  return m;
}

void BM_shoot(benchmark::State& state) {
  const diffeo::MomentumField m = toy_momenta(2.0);
  const diffeo::KernelConfig kernel{2.0, 4.0};
  for (auto _ : state) {
    benchmark::DoNotOptimize(diffeo::shoot(m, kernel, 20));
  }
}
BENCHMARK(BM_shoot);

void BM_inverse_flow(benchmark::State& state) {
  const diffeo::MomentumField m = toy_momenta(2.0);
  const diffeo::KernelConfig kernel{2.0, 4.0};
  const diffeo::FlowTrajectory traj = diffeo::shoot(m, kernel, 20);
  const std::vector<int> shape = {50, 50};
  for (auto _ : state) {
    benchmark::DoNotOptimize(diffeo::integrate_flow(traj, shape, diffeo::FlowDirection::kInverse));
  }
}
BENCHMARK(BM_inverse_flow);

void BM_registration_gradient(benchmark::State& state) {
  const diffeo::ToyPair toy = diffeo::make_toy_squares(50);
  const diffeo::KernelConfig kernel{2.0, 4.0};
  const diffeo::CostConfig cc{0.1};
  std::vector<diffeo::MomentumField> ms = {toy_momenta(2.0)};
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        diffeo::gradient(toy.source, ms, {&toy.target, 1}, cc, kernel, 20));
  }
}
BENCHMARK(BM_registration_gradient);

}  // namespace

BENCHMARK_MAIN();
