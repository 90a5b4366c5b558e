#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "sleepdyn/scattering.hpp"

using namespace sleepdyn;

namespace {

std::vector<double> sine(std::size_t n, double cycles_per_sample, double phase = 0.0) {
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = std::sin(2.0 * std::numbers::pi * cycles_per_sample *
                        static_cast<double>(i) +
                    phase);
  }
  return x;
}

}  // namespace

TEST_CASE("bank shape at the production parameters") {
  const FilterBank bank = FilterBank::build(2, 17, 16384);
  CHECK(bank.num_dyadic() == 18);   // j = 0..17
  CHECK(bank.num_filters() == 19);  // plus q-1 = 1 low-frequency filter
  CHECK(bank.subsample_stride() == 181);
  CHECK(bank.path_filters().size() == 18);  // low-frequency paths default off

  const FilterBank with_low = FilterBank::build(2, 17, 16384, true);
  CHECK(with_low.path_filters().size() == 19);
}

TEST_CASE("bank parameter validation") {
  CHECK_THROWS_AS(FilterBank::build(0, 17, 16384), InvalidParameters);
  CHECK_THROWS_AS(FilterBank::build(2, 0, 16384), InvalidParameters);
  CHECK_THROWS_AS(FilterBank::build(2, 17, 0), InvalidParameters);
  CHECK_THROWS_AS(FilterBank::build(2, 17, 12000), InvalidParameters);  // not 2^k
  CHECK_THROWS_AS(FilterBank::build(1, 10, 512), InvalidParameters);    // 2^10 > 512
}

TEST_CASE("filter peaks sit at 2^{-j/q} within one FFT bin") {
  const FilterBank bank = FilterBank::build(2, 17, 16384);
  const double bin = 2.0 / 16384.0;
  for (int j = 0; j < bank.num_dyadic(); ++j) {
    const Eigen::ArrayXd& f = bank.psi_hat(j);
    Eigen::Index argmax = 0;
    f.maxCoeff(&argmax);
    const double peak = 2.0 * static_cast<double>(argmax) / 16384.0;
    CHECK(std::abs(peak - bank.center_frequency(j)) <= bin + 1e-12);
    CHECK(f.minCoeff() >= 0.0);  // analytic, non-negative spectrum
  }

  // Small case: q=1, h=1, n=8 puts the j=1 filter at half Nyquist.
  const FilterBank tiny = FilterBank::build(1, 1, 8);
  Eigen::Index argmax = 0;
  tiny.psi_hat(1).maxCoeff(&argmax);
  CHECK(2.0 * static_cast<double>(argmax) / 8.0 == doctest::Approx(0.5));
}

TEST_CASE("half-power width decreases with j") {
  const FilterBank bank = FilterBank::build(2, 10, 4096);
  auto half_power_width = [&](int j) {
    const Eigen::ArrayXd& f = bank.psi_hat(j);
    const double half = f.maxCoeff() / std::sqrt(2.0);
    int count = 0;
    for (Eigen::Index k = 0; k < f.size(); ++k) {
      if (f[k] >= half) ++count;
    }
    return count;
  };
  for (int j = 0; j + 1 < bank.num_dyadic(); ++j) {
    CHECK(half_power_width(j) >= half_power_width(j + 1));
  }
}

TEST_CASE("Littlewood-Paley sum is bounded on the covered band") {
  const FilterBank bank = FilterBank::build(2, 17, 16384);
  const double lo = bank.center_frequency(bank.num_filters() - 1);
  double min_sum = 1e9, max_sum = -1e9;
  for (int k = 1; k <= 8192; ++k) {
    const double w = 2.0 * k / 16384.0;
    if (w < lo || w > 1.0) continue;
    double s = bank.phi_hat()[k] * bank.phi_hat()[k];
    for (int j = 0; j < bank.num_filters(); ++j) {
      s += bank.psi_hat(j)[k] * bank.psi_hat(j)[k];
    }
    min_sum = std::min(min_sum, s);
    max_sum = std::max(max_sum, s);
  }
  // Direct evaluation on this grid gives [1.149, 1.652].
  CHECK(min_sum >= 1.0);
  CHECK(max_sum <= 2.0);
}

TEST_CASE("zero signal scatters to the log floor everywhere") {
  const FilterBank bank = FilterBank::build(1, 3, 256);
  ScatteringCoefficients c = scatter(std::vector<double>(256, 0.0), bank);
  CHECK(c.s0.cwiseAbs().maxCoeff() == 0.0);
  CHECK(c.s1.cwiseAbs().maxCoeff() == 0.0);
  CHECK(c.s2.cwiseAbs().maxCoeff() == 0.0);

  renormalize_and_log(c);
  const double floor = std::log(kScatterEpsilon);
  CHECK(c.s0.minCoeff() == doctest::Approx(floor));
  CHECK(c.s0.maxCoeff() == doctest::Approx(floor));
  CHECK(c.s1.minCoeff() == doctest::Approx(floor));
  CHECK(c.s1.maxCoeff() == doctest::Approx(floor));
  CHECK(c.s2.maxCoeff() == doctest::Approx(floor));
}

TEST_CASE("non-finite input is rejected") {
  const FilterBank bank = FilterBank::build(1, 3, 256);
  std::vector<double> x(256, 0.0);
  x[7] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(scatter(x, bank), NonFiniteInput);
}

TEST_CASE("pure tones land in their own band") {
  const FilterBank bank = FilterBank::build(1, 6, 512);
  for (int jstar = 0; jstar <= 6; ++jstar) {
    const double f = bank.center_frequency(jstar) * 0.5;  // cycles per sample
    const ScatteringCoefficients c = scatter(sine(512, f), bank);
    int best = -1;
    double best_mean = -1.0;
    for (int j = 0; j <= 6; ++j) {
      const double m = c.s1.col(j).mean();
      if (m > best_mean) {
        best_mean = m;
        best = j;
      }
    }
    CHECK(best == jstar);
  }
}

TEST_CASE("amplitude modulation shows up at the envelope scale") {
  const FilterBank bank = FilterBank::build(1, 6, 4096);
  const int j1 = 1, j2_true = 4;
  const double fc = bank.center_frequency(j1) * 0.5;
  const double fe = bank.center_frequency(j2_true) * 0.5;
  std::vector<double> x(4096);
  for (int i = 0; i < 4096; ++i) {
    x[i] = (1.0 + 0.9 * std::sin(2.0 * std::numbers::pi * fe * i)) *
           std::sin(2.0 * std::numbers::pi * fc * i);
  }
  const ScatteringCoefficients c = scatter(x, bank);
  double true_mean = 0.0;
  for (std::size_t p = 0; p < c.s2_pairs.size(); ++p) {
    if (c.s2_pairs[p] == std::pair<int, int>{j1, j2_true}) {
      true_mean = c.s2.col(static_cast<Eigen::Index>(p)).mean();
    }
  }
  for (std::size_t p = 0; p < c.s2_pairs.size(); ++p) {
    if (c.s2_pairs[p].first == j1 && c.s2_pairs[p].second != j2_true) {
      CHECK(c.s2.col(static_cast<Eigen::Index>(p)).mean() < true_mean);
    }
  }
}

TEST_CASE("raw coefficients are non-negative and energy-ordered") {
  const FilterBank bank = FilterBank::build(1, 5, 512);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> x(512);
    for (double& v : x) v = gauss(rng);
    const ScatteringCoefficients c = scatter(x, bank);
    CHECK(c.s1.minCoeff() >= 0.0);
    CHECK(c.s2.minCoeff() >= 0.0);
    // The averaged second-order modulus cannot exceed the band envelope.
    for (std::size_t p = 0; p < c.s2_pairs.size(); ++p) {
      const int j1 = c.s2_pairs[p].first;
      CHECK(c.s2.col(static_cast<Eigen::Index>(p)).mean() <=
            c.s1.col(j1).mean() + 1e-12);
    }
  }
}

TEST_CASE("renormalization formulas") {
  // One unit S1 entry with a matching 0.5 S2 entry: S2~ = 0.5 / (1 + eps).
  const double eps = kScatterEpsilon;
  ScatteringCoefficients c;
  c.signal_len = 1;
  c.subsample_stride = 1;
  c.s0.resize(1);
  c.s0[0] = 2.0;
  c.abs_lowpass.resize(1);
  c.abs_lowpass[0] = 4.0;
  c.s1.resize(1, 1);
  c.s1(0, 0) = 1.0;
  c.s1_filters = {0};
  c.s2.resize(1, 1);
  c.s2(0, 0) = 0.5;
  c.s2_pairs = {{0, 1}};
  renormalize_and_log(c);
  CHECK(c.s2(0, 0) == doctest::Approx(std::log(0.5 / (1.0 + eps))));
  CHECK(c.s1(0, 0) == doctest::Approx(std::log(1.0 / (4.0 + eps))));
  CHECK(c.s0[0] == doctest::Approx(std::log(2.0 + eps)));
  CHECK_THROWS_AS(renormalize_and_log(c), Error);  // already compressed
}

TEST_CASE("scaling the input leaves renormalized S2 invariant") {
  const FilterBank bank = FilterBank::build(1, 5, 1024);
  std::mt19937_64 rng(2);
  std::normal_distribution<double> gauss(0.0, 10.0);
  std::vector<double> x(1024), x2(1024);
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = gauss(rng);
    x2[i] = 2.0 * x[i];
  }
  ScatteringCoefficients a = scatter(x, bank);
  ScatteringCoefficients b = scatter(x2, bank);
  renormalize_and_log(a);
  renormalize_and_log(b);
  CHECK((a.s2 - b.s2).norm() / a.s2.norm() < 1e-3);
}

TEST_CASE("subsampled feature layout at the production parameters") {
  const FilterBank bank = FilterBank::build(2, 17, 16384);
  const FeatureLayout layout = feature_layout(bank, 9000);
  CHECK(layout.stride == 181);
  CHECK(layout.window == 362);
  // Slots whose averaging window fits inside the 9000-sample support.
  CHECK(layout.t_sub == 48);
  CHECK(layout.paths.size() == 1 + 18 + 153);
  CHECK(layout.dim() == 172u * 48u);

  CHECK(layout.path_of(0).order == 0);
  CHECK(layout.path_of(48).order == 1);
  CHECK(layout.path_of(48).j1 == 0);
  CHECK(layout.slot_of(49) == 1);
  const PathKey last = layout.paths.back();
  CHECK(last.order == 2);
  CHECK(last.j1 == 16);
  CHECK(last.j2 == 17);
}

TEST_CASE("small-case path enumeration") {
  const FilterBank bank = FilterBank::build(1, 2, 16);
  const FeatureLayout layout = feature_layout(bank, 16);
  CHECK(layout.stride == 2);
  // Paths: S0, three first-order, three second-order.
  CHECK(layout.paths.size() == 7);
  const ScatteringCoefficients c = scatter(std::vector<double>(16, 1.0), bank);
  CHECK(c.s1.cols() == 3);
  CHECK(c.s2.cols() == 3);
}

TEST_CASE("identical inputs give bit-identical features") {
  const FilterBank bank = FilterBank::build(1, 5, 1024);
  const FeatureLayout layout = feature_layout(bank, 900);
  std::mt19937_64 rng(9);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> x(900);
  for (double& v : x) v = gauss(rng);

  ScatteringCoefficients a = scatter(x, bank);
  ScatteringCoefficients b = scatter(x, bank);
  renormalize_and_log(a);
  renormalize_and_log(b);
  const std::vector<double> fa = subsample_concat(a, layout);
  const std::vector<double> fb = subsample_concat(b, layout);
  REQUIRE(fa.size() == fb.size());
  for (std::size_t i = 0; i < fa.size(); ++i) {
    CHECK(fa[i] == fb[i]);  // exact
  }
}

TEST_CASE("translation stability improves with the averaging scale") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> x(16384), shifted(16384);
  for (double& v : x) v = gauss(rng);
  const int shift = 8;
  for (int i = 0; i < 16384; ++i) shifted[i] = x[(i + 16384 - shift) % 16384];

  std::vector<double> changes;
  for (const int h : {6, 10, 14}) {
    const FilterBank bank = FilterBank::build(1, h, 16384);
    const FeatureLayout layout = feature_layout(bank, 16384);
    ScatteringCoefficients a = scatter(x, bank);
    ScatteringCoefficients b = scatter(shifted, bank);
    renormalize_and_log(a);
    renormalize_and_log(b);
    const std::vector<double> fa = subsample_concat(a, layout);
    const std::vector<double> fb = subsample_concat(b, layout);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < fa.size(); ++i) {
      num += (fa[i] - fb[i]) * (fa[i] - fb[i]);
      den += fa[i] * fa[i];
    }
    changes.push_back(std::sqrt(num / den));
  }
  CHECK(changes[0] < 0.5);
  CHECK(changes[1] < changes[0]);
  CHECK(changes[2] < changes[1]);
}
