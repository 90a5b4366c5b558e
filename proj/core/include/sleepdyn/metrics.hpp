#pragma once

#include <array>
#include <cstdint>
#include <span>

#include "sleepdyn/errors.hpp"
#include "sleepdyn/stage.hpp"

namespace sleepdyn {

// Unnormalized 5x5 count matrix; rows are expert stages, columns predictions.
class ConfusionMatrix {
 public:
  ConfusionMatrix() { counts_.fill({}); }

  static ConfusionMatrix from_pairs(std::span<const SleepStage> truth,
                                    std::span<const SleepStage> predicted);

  void add(SleepStage truth, SleepStage predicted, std::uint64_t n = 1);

  std::uint64_t at(int row, int col) const { return counts_[row][col]; }
  std::uint64_t at(SleepStage t, SleepStage p) const {
    return counts_[static_cast<int>(t)][static_cast<int>(p)];
  }

  std::uint64_t total() const;
  std::uint64_t trace() const;
  std::uint64_t row_sum(int row) const;
  std::uint64_t col_sum(int col) const;

  ConfusionMatrix& operator+=(const ConfusionMatrix& other);
  bool operator==(const ConfusionMatrix& other) const = default;

 private:
  std::array<std::array<std::uint64_t, kNumStages>, kNumStages> counts_;
};

struct PerClassMetrics {
  std::array<double, kNumStages> precision;
  std::array<double, kNumStages> recall;
  std::array<double, kNumStages> f1;
  // Set when the class has an empty predicted column (precision 0/0) or an
  // empty expert row (recall 0/0); the value is reported as 0 in that case.
  std::array<bool, kNumStages> precision_undefined;
  std::array<bool, kNumStages> recall_undefined;
};

struct OverallMetrics {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  double kappa = 0.0;
  double expected_accuracy = 0.0;
  // EA == 1 (single class, perfectly concentrated): kappa is 0/0 and is
  // defined as 1 when accuracy is 1, else 0.
  bool kappa_degenerate = false;
};

PerClassMetrics per_class_metrics(const ConfusionMatrix& m);

OverallMetrics overall_metrics(const ConfusionMatrix& m);

}  // namespace sleepdyn
