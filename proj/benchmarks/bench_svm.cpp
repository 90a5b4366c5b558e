#include <benchmark/benchmark.h>

#include <Eigen/Core>
#include <random>
#include <vector>

#include "sleepdyn/svm.hpp"

namespace {

struct Blobs {
  Eigen::MatrixXd x;
  std::vector<int> y;
};

Blobs two_blobs(Eigen::Index n, Eigen::Index dim) {
  std::mt19937_64 rng(23);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Blobs b;
  b.x.resize(n, dim);
  b.y.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const int label = i % 2 == 0 ? 1 : -1;
    b.y[static_cast<std::size_t>(i)] = label;
    for (Eigen::Index j = 0; j < dim; ++j) {
      b.x(i, j) = gauss(rng) + (label > 0 ? 2.0 : -2.0);
    }
  }
  return b;
}

}  // namespace

static void TrainBinaryRbf(benchmark::State& state) {
  const Blobs b = two_blobs(state.range(0), 40);
  sleepdyn::SvmTrainOptions opt;
  opt.c = 1.0;
  opt.sigma = 3.0;
  for (auto _ : state) {
    auto model = sleepdyn::train_binary(b.x, b.y, opt);
    benchmark::DoNotOptimize(model);
  }
}
BENCHMARK(TrainBinaryRbf)->Arg(200)->Arg(500)->Arg(1000)->Unit(benchmark::kMillisecond);

static void DecisionValues(benchmark::State& state) {
  const Blobs b = two_blobs(500, 40);
  sleepdyn::SvmTrainOptions opt;
  opt.c = 1.0;
  opt.sigma = 3.0;
  const auto model = sleepdyn::train_binary(b.x, b.y, opt);
  const Blobs q = two_blobs(state.range(0), 40);
  for (auto _ : state) {
    auto values = sleepdyn::decision_values(model, q.x);
    benchmark::DoNotOptimize(values);
  }
}
BENCHMARK(DecisionValues)->Arg(100)->Arg(1000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
