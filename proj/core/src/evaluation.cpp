#include "sleepdyn/evaluation.hpp"

#include <algorithm>
#include <map>
#include <random>
#include <set>

#include "sleepdyn/parallel.hpp"

namespace sleepdyn {

namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (const char c : s) {
    h ^= static_cast<std::uint8_t>(c);
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace

std::vector<std::size_t> class_balanced_sample(std::span<const EpochRef> epochs,
                                               std::span<const std::size_t> candidates,
                                               std::uint64_t seed) {
  std::map<std::string, std::vector<std::size_t>> by_recording;
  for (const std::size_t idx : candidates) {
    by_recording[epochs[idx].recording_id].push_back(idx);
  }

  std::vector<std::size_t> out;
  out.reserve(candidates.size());
  for (auto& [recording, members] : by_recording) {
    std::array<std::vector<std::size_t>, kNumStages> per_class;
    for (const std::size_t idx : members) {
      per_class[static_cast<int>(epochs[idx].stage)].push_back(idx);
    }
    std::size_t k = members.size();
    for (const auto& cls : per_class) {
      if (!cls.empty()) k = std::min(k, cls.size());
    }
    // The recording seeds its own generator, so a recording's subset does not
    // depend on which fold or which other recordings are in the training set.
    std::mt19937_64 rng(seed ^ fnv1a(recording));
    for (auto& cls : per_class) {
      if (cls.empty()) continue;
      std::shuffle(cls.begin(), cls.end(), rng);
      cls.resize(k);
      out.insert(out.end(), cls.begin(), cls.end());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

LosocvResult losocv(const Eigen::MatrixXd& features, std::span<const EpochRef> epochs,
                    const LosocvOptions& opt) {
  if (static_cast<Eigen::Index>(epochs.size()) != features.rows()) {
    throw LengthMismatch("epoch metadata does not match the feature rows");
  }
  std::set<std::string> subject_set;
  for (const EpochRef& e : epochs) subject_set.insert(e.subject_id);
  if (subject_set.size() < 2) {
    throw InsufficientSubjects("leave-one-subject-out needs at least two subjects");
  }
  const std::vector<std::string> subjects(subject_set.begin(), subject_set.end());

  LosocvResult result;
  result.folds.resize(subjects.size());

  parallel_for(subjects.size(), opt.threads, [&](std::size_t f) {
    const std::string& held_out = subjects[f];
    FoldResult fold;
    fold.held_out_subject = held_out;
    for (std::size_t i = 0; i < epochs.size(); ++i) {
      if (epochs[i].subject_id == held_out) {
        fold.test_indices.push_back(i);
      } else {
        fold.train_indices.push_back(i);
      }
    }
    if (opt.class_balanced) {
      fold.train_indices = class_balanced_sample(epochs, fold.train_indices, opt.seed);
    }

    Eigen::MatrixXd train_x(static_cast<Eigen::Index>(fold.train_indices.size()),
                            features.cols());
    std::vector<SleepStage> train_y(fold.train_indices.size());
    for (std::size_t i = 0; i < fold.train_indices.size(); ++i) {
      train_x.row(static_cast<Eigen::Index>(i)) =
          features.row(static_cast<Eigen::Index>(fold.train_indices[i]));
      train_y[i] = epochs[fold.train_indices[i]].stage;
    }
    Eigen::MatrixXd test_x(static_cast<Eigen::Index>(fold.test_indices.size()),
                           features.cols());
    std::vector<SleepStage> test_y(fold.test_indices.size());
    for (std::size_t i = 0; i < fold.test_indices.size(); ++i) {
      test_x.row(static_cast<Eigen::Index>(i)) =
          features.row(static_cast<Eigen::Index>(fold.test_indices[i]));
      test_y[i] = epochs[fold.test_indices[i]].stage;
    }

    SvmTrainOptions svm_opt;
    svm_opt.c = opt.c;
    svm_opt.tol = opt.svm_tol;
    svm_opt.sigma = opt.sigma > 0.0
                        ? opt.sigma
                        : median_heuristic_sigma(train_x, 2000, opt.seed + 7919 * f);
    // Classes train sequentially inside a fold; folds already run in parallel.
    const OvaModel model = train_ova(train_x, train_y, svm_opt, 1);
    fold.predictions = predict(model, test_x);

    fold.confusion = ConfusionMatrix::from_pairs(test_y, fold.predictions);
    const OverallMetrics m = overall_metrics(fold.confusion);
    fold.accuracy = m.accuracy;
    fold.macro_f1 = m.macro_f1;
    fold.kappa = m.kappa;
    result.folds[f] = std::move(fold);
  });

  for (const FoldResult& fold : result.folds) result.pooled += fold.confusion;
  return result;
}

PerRecordingMetrics per_recording_metrics(const LosocvResult& result,
                                          std::span<const EpochRef> epochs) {
  std::map<std::string, ConfusionMatrix> by_recording;
  for (const FoldResult& fold : result.folds) {
    for (std::size_t i = 0; i < fold.test_indices.size(); ++i) {
      const EpochRef& e = epochs[fold.test_indices[i]];
      by_recording[e.recording_id].add(e.stage, fold.predictions[i]);
    }
  }
  PerRecordingMetrics out;
  for (const auto& [recording, confusion] : by_recording) {
    const OverallMetrics m = overall_metrics(confusion);
    out.recording_ids.push_back(recording);
    out.accuracy.push_back(m.accuracy);
    out.macro_f1.push_back(m.macro_f1);
    out.kappa.push_back(m.kappa);
  }
  return out;
}

}  // namespace sleepdyn
