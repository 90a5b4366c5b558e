#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sleepdyn/errors.hpp"

namespace sleepdyn {

struct ScatteringConfig {
  int q = 2;
  int h = 17;
  bool include_lowfreq_paths = false;
};

struct DiffusionConfig {
  double t = 0.3;
  int d_hat = 80;
  int d_tilde = 80;
  double percentile = 0.01;
  long dense_threshold = 2000;
  long knn_threshold = 10000;
  int knn = 256;
  std::string multiview_input = "dm_coords";  // or "raw_features"
  std::string dim_policy = "fixed";           // or "spectral_gap"
};

struct SvmConfig {
  double c = 1.0;
  double sigma = 0.0;  // <= 0 selects the median heuristic
  double tol = 1e-3;
};

struct EvalConfig {
  bool class_balanced = false;
  std::uint64_t seed = 0;
  bool ablation = true;
  bool strict_inductive = false;
};

struct PipelineConfig {
  std::filesystem::path dataset_root;
  std::filesystem::path cache_dir;
  std::filesystem::path output_dir;
  std::vector<std::string> channels;  // 1 or 2
  int truncation_minutes = 30;
  std::map<std::string, int> truncation_overrides;  // recording_id -> minutes
  std::string fusion = "multiview";                 // single | concat | multiview
  ScatteringConfig scattering;
  DiffusionConfig diffusion;
  SvmConfig svm;
  EvalConfig evaluation;
  std::vector<int> export_dims = {2, 3, 4};  // eigenvector indices (2-based)
  int threads = 0;

  static PipelineConfig from_json(const nlohmann::json& j);
  static PipelineConfig from_file(const std::filesystem::path& path);
  nlohmann::json to_json() const;

  // Applies a dotted KEY=VALUE override (e.g. "diffusion.t=0.5").
  void apply_override(const std::string& key_value);

  void validate() const;  // throws ConfigInvalid
};

enum class Stage { Ingest, Features, Embed, Fuse, TrainEval, Export, Report };

Stage stage_from_name(const std::string& name);  // throws ConfigInvalid
std::string stage_name(Stage stage);

struct StageReport {
  Stage stage = Stage::Ingest;
  bool cache_hit = false;
  double wall_seconds = 0.0;
  long peak_rss_kb = 0;
};

// Runs one stage with config-hash caching; reruns only when its config
// subset or an upstream artifact changed. Holds the cache directory lock.
StageReport run_stage(Stage stage, const PipelineConfig& config);

// ingest -> features -> embed -> fuse -> train-eval -> export -> report.
std::vector<StageReport> run_all(const PipelineConfig& config);

}  // namespace sleepdyn
