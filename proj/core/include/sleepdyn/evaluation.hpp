#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sleepdyn/metrics.hpp"
#include "sleepdyn/stage.hpp"
#include "sleepdyn/svm.hpp"

namespace sleepdyn {

// Identity and expert label of one scored epoch, aligned with a feature row.
struct EpochRef {
  std::string subject_id;
  std::string recording_id;
  std::size_t epoch_index = 0;
  SleepStage stage = SleepStage::Excluded;
};

struct FoldResult {
  std::string held_out_subject;
  ConfusionMatrix confusion;
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  double kappa = 0.0;
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> test_indices;
  std::vector<SleepStage> predictions;  // aligned with test_indices
};

struct LosocvResult {
  std::vector<FoldResult> folds;  // ordered by subject id
  ConfusionMatrix pooled;
};

struct LosocvOptions {
  double c = 1.0;
  double sigma = 0.0;  // <= 0 selects the median heuristic per fold
  double svm_tol = 1e-3;
  bool class_balanced = false;
  std::uint64_t seed = 0;
  int threads = 0;  // 0 = hardware concurrency
};

// Leave-one-subject-out over a fixed (transductive) feature matrix: the
// embedding is computed once over all subjects upstream; each fold trains on
// every other subject's rows and predicts the held-out subject's rows.
LosocvResult losocv(const Eigen::MatrixXd& features, std::span<const EpochRef> epochs,
                    const LosocvOptions& options);

// Per-recording class-balanced subsample of the candidate indices: each
// present stage contributes exactly K epochs, K = the recording's smallest
// class count. Deterministic for a fixed seed.
std::vector<std::size_t> class_balanced_sample(std::span<const EpochRef> epochs,
                                               std::span<const std::size_t> candidates,
                                               std::uint64_t seed);

// Per-recording metric series (accuracy, macro F1, kappa) out of fold
// results, for the paired statistical comparisons.
struct PerRecordingMetrics {
  std::vector<std::string> recording_ids;  // sorted
  std::vector<double> accuracy;
  std::vector<double> macro_f1;
  std::vector<double> kappa;
};

PerRecordingMetrics per_recording_metrics(const LosocvResult& result,
                                          std::span<const EpochRef> epochs);

}  // namespace sleepdyn
