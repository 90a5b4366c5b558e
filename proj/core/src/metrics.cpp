#include "sleepdyn/metrics.hpp"

#include <string>

namespace sleepdyn {

std::optional<SleepStage> stage_from_string(std::string_view name) {
  for (SleepStage s : kAllStages) {
    if (name == to_string(s)) return s;
  }
  if (name == to_string(SleepStage::Excluded)) return SleepStage::Excluded;
  return std::nullopt;
}

ConfusionMatrix ConfusionMatrix::from_pairs(std::span<const SleepStage> truth,
                                            std::span<const SleepStage> predicted) {
  if (truth.size() != predicted.size()) {
    throw LengthMismatch("confusion matrix: " + std::to_string(truth.size()) +
                         " expert labels vs " + std::to_string(predicted.size()) +
                         " predictions");
  }
  ConfusionMatrix m;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    m.add(truth[i], predicted[i]);
  }
  return m;
}

void ConfusionMatrix::add(SleepStage truth, SleepStage predicted, std::uint64_t n) {
  if (!is_scorable(truth) || !is_scorable(predicted)) {
    throw LengthMismatch("confusion matrix: Excluded epochs cannot be scored");
  }
  counts_[static_cast<int>(truth)][static_cast<int>(predicted)] += n;
}

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t t = 0;
  for (const auto& row : counts_)
    for (std::uint64_t c : row) t += c;
  return t;
}

std::uint64_t ConfusionMatrix::trace() const {
  std::uint64_t t = 0;
  for (int i = 0; i < kNumStages; ++i) t += counts_[i][i];
  return t;
}

std::uint64_t ConfusionMatrix::row_sum(int row) const {
  std::uint64_t t = 0;
  for (std::uint64_t c : counts_[row]) t += c;
  return t;
}

std::uint64_t ConfusionMatrix::col_sum(int col) const {
  std::uint64_t t = 0;
  for (int i = 0; i < kNumStages; ++i) t += counts_[i][col];
  return t;
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  for (int i = 0; i < kNumStages; ++i)
    for (int j = 0; j < kNumStages; ++j) counts_[i][j] += other.counts_[i][j];
  return *this;
}

PerClassMetrics per_class_metrics(const ConfusionMatrix& m) {
  PerClassMetrics out{};
  for (int p = 0; p < kNumStages; ++p) {
    const double diag = static_cast<double>(m.at(p, p));
    const double col = static_cast<double>(m.col_sum(p));
    const double row = static_cast<double>(m.row_sum(p));
    out.precision_undefined[p] = (col == 0.0);
    out.recall_undefined[p] = (row == 0.0);
    out.precision[p] = col > 0.0 ? diag / col : 0.0;
    out.recall[p] = row > 0.0 ? diag / row : 0.0;
    const double pr = out.precision[p];
    const double re = out.recall[p];
    out.f1[p] = (pr + re) > 0.0 ? 2.0 * pr * re / (pr + re) : 0.0;
  }
  return out;
}

OverallMetrics overall_metrics(const ConfusionMatrix& m) {
  const double total = static_cast<double>(m.total());
  if (total == 0.0) throw EmptyMatrix("overall metrics of an empty confusion matrix");

  OverallMetrics out;
  out.accuracy = static_cast<double>(m.trace()) / total;

  double ea = 0.0;
  for (int p = 0; p < kNumStages; ++p) {
    ea += static_cast<double>(m.row_sum(p)) * static_cast<double>(m.col_sum(p));
  }
  ea /= total * total;
  out.expected_accuracy = ea;

  const double denom = 1.0 - ea;
  if (denom <= 1e-12) {
    out.kappa_degenerate = true;
    out.kappa = (out.accuracy >= 1.0) ? 1.0 : 0.0;
  } else {
    out.kappa = (out.accuracy - ea) / denom;
  }

  const PerClassMetrics pc = per_class_metrics(m);
  double sum_f1 = 0.0;
  for (double f : pc.f1) sum_f1 += f;
  out.macro_f1 = sum_f1 / kNumStages;
  return out;
}

}  // namespace sleepdyn
