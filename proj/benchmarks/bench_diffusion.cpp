#include <benchmark/benchmark.h>

#include <Eigen/Core>
#include <random>

#include "sleepdyn/diffusion.hpp"

namespace {

Eigen::MatrixXd random_cloud(Eigen::Index n, Eigen::Index dim) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd x(n, dim);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < dim; ++j) x(i, j) = gauss(rng);
  }
  return x;
}

}  // namespace

static void AffinityMatrix(benchmark::State& state) {
  const Eigen::MatrixXd pts = random_cloud(state.range(0), 64);
  for (auto _ : state) {
    auto g = sleepdyn::affinity_matrix(pts, 0.01);
    benchmark::DoNotOptimize(g);
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(AffinityMatrix)->Arg(200)->Arg(500)->Arg(1000)->Unit(benchmark::kMillisecond)->Complexity();

static void DiffusionMapDense(benchmark::State& state) {
  const Eigen::MatrixXd pts = random_cloud(state.range(0), 64);
  const auto graph = sleepdyn::affinity_matrix(pts, 0.01);
  sleepdyn::DiffusionOptions opt;
  opt.dim = 20;
  for (auto _ : state) {
    auto emb = sleepdyn::diffusion_map(graph, opt);
    benchmark::DoNotOptimize(emb);
  }
}
BENCHMARK(DiffusionMapDense)->Arg(200)->Arg(500)->Arg(1000)->Unit(benchmark::kMillisecond);

static void MultiviewDm(benchmark::State& state) {
  const Eigen::MatrixXd x = random_cloud(state.range(0), 32);
  const Eigen::MatrixXd y = random_cloud(state.range(0), 32);
  const auto gx = sleepdyn::affinity_matrix(x, 0.01);
  const auto gy = sleepdyn::affinity_matrix(y, 0.01);
  sleepdyn::DiffusionOptions opt;
  opt.dim = 20;
  for (auto _ : state) {
    auto emb = sleepdyn::multiview_dm(gx, gy, opt);
    benchmark::DoNotOptimize(emb);
  }
}
BENCHMARK(MultiviewDm)->Arg(200)->Arg(400)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
