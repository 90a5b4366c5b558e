#include <doctest.h>

#include <array>
#include <random>

#include "sleepdyn/metrics.hpp"

using namespace sleepdyn;

namespace {

// Published confusion counts used as ground truth throughout:
// single-channel Fpz-Cz (trace 34702, total 41950) ...
constexpr std::array<std::array<std::uint64_t, 5>, 5> kFpzCzCounts = {{
    {6871, 298, 563, 171, 24},
    {295, 6253, 378, 790, 1},
    {549, 616, 1040, 591, 8},
    {416, 692, 272, 15821, 598},
    {101, 13, 0, 872, 4717},
}};

// ... and the two-channel fusion table.
constexpr std::array<std::array<std::uint64_t, 5>, 5> kTwoChannelCounts = {{
    {7034, 148, 525, 197, 23},
    {125, 6070, 528, 991, 3},
    {498, 436, 1218, 643, 9},
    {115, 492, 313, 16337, 542},
    {17, 0, 1, 921, 4764},
}};

ConfusionMatrix from_counts(const std::array<std::array<std::uint64_t, 5>, 5>& counts) {
  ConfusionMatrix m;
  for (int r = 0; r < kNumStages; ++r) {
    for (int c = 0; c < kNumStages; ++c) {
      if (counts[r][c] > 0) {
        m.add(static_cast<SleepStage>(r), static_cast<SleepStage>(c), counts[r][c]);
      }
    }
  }
  return m;
}

}  // namespace

TEST_CASE("confusion matrix from pairs") {
  std::vector<SleepStage> truth(10, SleepStage::N2);
  std::vector<SleepStage> pred(10, SleepStage::N2);
  const ConfusionMatrix perfect = ConfusionMatrix::from_pairs(truth, pred);
  CHECK(perfect.trace() == 10);
  CHECK(perfect.total() == 10);

  const ConfusionMatrix single = ConfusionMatrix::from_pairs(
      std::vector<SleepStage>{SleepStage::N2}, std::vector<SleepStage>{SleepStage::N3});
  CHECK(single.at(SleepStage::N2, SleepStage::N3) == 1);
  CHECK(single.trace() == 0);

  CHECK_THROWS_AS(ConfusionMatrix::from_pairs(
                      std::vector<SleepStage>{SleepStage::N2},
                      std::vector<SleepStage>{}),
                  LengthMismatch);
}

TEST_CASE("confusion matrix matches a brute-force tally on random sequences") {
  std::mt19937 rng(7);
  std::uniform_int_distribution<int> stage(0, 4);
  std::vector<SleepStage> truth(100), pred(100);
  for (int i = 0; i < 100; ++i) {
    truth[i] = static_cast<SleepStage>(stage(rng));
    pred[i] = static_cast<SleepStage>(stage(rng));
  }
  const ConfusionMatrix m = ConfusionMatrix::from_pairs(truth, pred);
  for (int r = 0; r < kNumStages; ++r) {
    for (int c = 0; c < kNumStages; ++c) {
      std::uint64_t count = 0;
      for (int i = 0; i < 100; ++i) {
        if (static_cast<int>(truth[i]) == r && static_cast<int>(pred[i]) == c) ++count;
      }
      CHECK(m.at(r, c) == count);
    }
  }
}

TEST_CASE("per-class metrics on the published two-channel table") {
  const ConfusionMatrix m = from_counts(kTwoChannelCounts);
  const PerClassMetrics pc = per_class_metrics(m);
  // Awake row: 7034 of 7927 expert epochs, 7789 predicted-Awake epochs.
  CHECK(pc.recall[0] == doctest::Approx(0.8874).epsilon(1e-3));
  CHECK(pc.precision[0] == doctest::Approx(0.9031).epsilon(1e-3));
  CHECK_FALSE(pc.precision_undefined[0]);
}

TEST_CASE("per-class metrics degenerate cases") {
  ConfusionMatrix identity;
  for (int s = 0; s < kNumStages; ++s) {
    identity.add(static_cast<SleepStage>(s), static_cast<SleepStage>(s));
  }
  const PerClassMetrics pc = per_class_metrics(identity);
  for (int s = 0; s < kNumStages; ++s) {
    CHECK(pc.precision[s] == 1.0);
    CHECK(pc.recall[s] == 1.0);
    CHECK(pc.f1[s] == 1.0);
  }

  ConfusionMatrix two_active;
  two_active.add(SleepStage::Awake, SleepStage::Awake, 3);
  two_active.add(SleepStage::Awake, SleepStage::Rem, 1);
  two_active.add(SleepStage::Rem, SleepStage::Awake, 1);
  two_active.add(SleepStage::Rem, SleepStage::Rem, 3);
  const PerClassMetrics pc2 = per_class_metrics(two_active);
  CHECK(pc2.precision[0] == doctest::Approx(0.75));
  CHECK(pc2.recall[0] == doctest::Approx(0.75));
  CHECK(pc2.f1[0] == doctest::Approx(0.75));
  CHECK(pc2.precision[1] == doctest::Approx(0.75));
  // Empty column and row for the other stages: undefined, reported as zero.
  CHECK(pc2.precision_undefined[2]);
  CHECK(pc2.recall_undefined[2]);
  CHECK(pc2.precision[2] == 0.0);
  CHECK(pc2.f1[2] == 0.0);
}

TEST_CASE("overall metrics reproduce the published numbers") {
  const ConfusionMatrix fpz = from_counts(kFpzCzCounts);
  CHECK(fpz.trace() == 34702);
  CHECK(fpz.total() == 41950);
  const OverallMetrics m1 = overall_metrics(fpz);
  CHECK(m1.accuracy * 100.0 == doctest::Approx(82.72).epsilon(5e-4));
  CHECK(m1.macro_f1 * 100.0 == doctest::Approx(75.91).epsilon(5e-4));
  CHECK(m1.kappa * 100.0 == doctest::Approx(76.10).epsilon(5e-4));

  const OverallMetrics m2 = overall_metrics(from_counts(kTwoChannelCounts));
  CHECK(m2.accuracy * 100.0 == doctest::Approx(84.44).epsilon(5e-4));
  CHECK(m2.macro_f1 * 100.0 == doctest::Approx(78.25).epsilon(5e-4));
  CHECK(m2.kappa * 100.0 == doctest::Approx(78.36).epsilon(5e-4));
}

TEST_CASE("kappa degenerate and bound properties") {
  ConfusionMatrix single_cell;
  single_cell.add(SleepStage::Rem, SleepStage::Rem, 42);
  const OverallMetrics m = overall_metrics(single_cell);
  CHECK(m.accuracy == 1.0);
  CHECK(m.expected_accuracy == doctest::Approx(1.0));
  CHECK(m.kappa_degenerate);
  CHECK(m.kappa == 1.0);

  ConfusionMatrix wrong;
  wrong.add(SleepStage::Rem, SleepStage::N1, 5);
  const OverallMetrics mw = overall_metrics(wrong);
  CHECK(mw.accuracy == 0.0);
  // Row and column marginals are disjoint, so EA = 0 and kappa = ACC.
  CHECK(mw.kappa == doctest::Approx(0.0));

  // kappa <= accuracy whenever EA > 0 and ACC < 1; kappa = 0 when ACC = EA.
  std::mt19937 rng(21);
  std::uniform_int_distribution<int> count(0, 30);
  for (int trial = 0; trial < 50; ++trial) {
    ConfusionMatrix random;
    for (int r = 0; r < kNumStages; ++r) {
      for (int c = 0; c < kNumStages; ++c) {
        random.add(static_cast<SleepStage>(r), static_cast<SleepStage>(c),
                   static_cast<std::uint64_t>(count(rng)));
      }
    }
    if (random.total() == 0) continue;
    const OverallMetrics mr = overall_metrics(random);
    if (!mr.kappa_degenerate && mr.expected_accuracy > 0.0 && mr.accuracy < 1.0) {
      CHECK(mr.kappa <= mr.accuracy + 1e-12);
    }
  }

  ConfusionMatrix uniform;  // ACC = EA = 1/5 -> kappa 0
  for (int r = 0; r < kNumStages; ++r) {
    for (int c = 0; c < kNumStages; ++c) {
      uniform.add(static_cast<SleepStage>(r), static_cast<SleepStage>(c), 4);
    }
  }
  const OverallMetrics mu = overall_metrics(uniform);
  CHECK(mu.kappa == doctest::Approx(0.0).epsilon(1e-12));

  CHECK_THROWS_AS(overall_metrics(ConfusionMatrix{}), EmptyMatrix);
}

TEST_CASE("metric self-consistency: pooled equals entrywise sum") {
  const ConfusionMatrix a = from_counts(kFpzCzCounts);
  const ConfusionMatrix b = from_counts(kTwoChannelCounts);
  ConfusionMatrix pooled = a;
  pooled += b;
  for (int r = 0; r < kNumStages; ++r) {
    for (int c = 0; c < kNumStages; ++c) {
      CHECK(pooled.at(r, c) == a.at(r, c) + b.at(r, c));
    }
  }
}
