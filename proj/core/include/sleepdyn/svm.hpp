#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "sleepdyn/errors.hpp"
#include "sleepdyn/stage.hpp"

namespace sleepdyn {

struct SvmTrainOptions {
  double c = 1.0;
  double sigma = 1.0;      // RBF bandwidth, K = exp(-||x-x'||^2 / (2 sigma^2))
  double tol = 1e-3;       // KKT stopping tolerance (maximal violating pair gap)
  long max_iterations = 20'000'000;
  std::size_t kernel_cache_rows = 4096;
};

struct BinarySvmModel {
  Eigen::MatrixXd support_vectors;  // rows
  Eigen::VectorXd dual_coeffs;      // alpha_i * y_i per support vector
  double bias = 0.0;
  double sigma = 1.0;
  double c = 1.0;
  double kkt_gap = 0.0;   // final maximal violating pair gap
  double dual_objective = 0.0;
};

// Soft-margin dual solved by sequential minimal optimization with maximal
// violating pair selection. Labels must contain both signs.
BinarySvmModel train_binary(const Eigen::MatrixXd& features,
                            std::span<const int> labels,
                            const SvmTrainOptions& options);

double decision_value(const BinarySvmModel& model, const Eigen::VectorXd& x);
Eigen::VectorXd decision_values(const BinarySvmModel& model,
                                const Eigen::MatrixXd& x);

struct OvaModel {
  // One model per stage present in training; absent stages never win argmax.
  std::array<std::optional<BinarySvmModel>, kNumStages> models;
};

OvaModel train_ova(const Eigen::MatrixXd& features,
                   std::span<const SleepStage> labels,
                   const SvmTrainOptions& options, int threads = 0);

// Argmax of the five decision values; exact ties resolve to the first stage
// in the fixed order Awake < REM < N1 < N2 < N3.
std::vector<SleepStage> predict(const OvaModel& model, const Eigen::MatrixXd& x);

// Median pairwise distance over a subsample of at most max_points rows.
double median_heuristic_sigma(const Eigen::MatrixXd& features,
                              std::size_t max_points = 2000,
                              std::uint64_t seed = 99);

// Versioned little-endian model persistence with a JSON manifest line.
void save_ova_model(const OvaModel& model, const std::filesystem::path& path);
OvaModel load_ova_model(const std::filesystem::path& path);

}  // namespace sleepdyn
