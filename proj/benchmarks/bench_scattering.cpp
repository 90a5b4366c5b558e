#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "sleepdyn/scattering.hpp"

namespace {

std::vector<double> random_window(std::size_t n) {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> gauss(0.0, 30.0);
  std::vector<double> w(n);
  for (double& v : w) v = gauss(rng);
  return w;
}

}  // namespace

static void FilterBankBuild(benchmark::State& state) {
  for (auto _ : state) {
    auto bank = sleepdyn::FilterBank::build(2, 17, 16384);
    benchmark::DoNotOptimize(bank);
  }
}
BENCHMARK(FilterBankBuild)->Unit(benchmark::kMillisecond);

static void ScatterEpoch(benchmark::State& state) {
  const auto bank =
      sleepdyn::FilterBank::build(2, static_cast<int>(state.range(0)), 16384);
  const std::vector<double> window = random_window(9000);
  for (auto _ : state) {
    auto coeffs = sleepdyn::scatter(window, bank);
    benchmark::DoNotOptimize(coeffs);
  }
}
BENCHMARK(ScatterEpoch)->Arg(8)->Arg(12)->Arg(17)->Unit(benchmark::kMillisecond);

static void ScatterFullFeature(benchmark::State& state) {
  const auto bank = sleepdyn::FilterBank::build(2, 17, 16384);
  const auto layout = sleepdyn::feature_layout(bank, 9000);
  const std::vector<double> window = random_window(9000);
  for (auto _ : state) {
    auto coeffs = sleepdyn::scatter(window, bank);
    sleepdyn::renormalize_and_log(coeffs);
    auto values = sleepdyn::subsample_concat(coeffs, layout);
    benchmark::DoNotOptimize(values);
  }
}
BENCHMARK(ScatterFullFeature)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
