#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sleepdyn/evaluation.hpp"
#include "sleepdyn/stage.hpp"

namespace sleepdyn {

// 64-bit FNV-1a, used for cache stamping and corruption checks.
std::uint64_t fnv1a_hash(std::span<const std::byte> bytes);
std::uint64_t fnv1a_hash(std::string_view text);
std::uint64_t hash_file(const std::filesystem::path& path);

// Generic per-epoch table of fixed-dimension double vectors with a JSON
// header. The on-disk layout is little-endian:
//   "SDFT" | u32 version | u64 header_len | header JSON | u64 rows | u64 dim
//   rows x ( u16+subject | u16+recording | u64 epoch_index | u8 stage | f64*dim )
//   u64 fnv1a of everything above
struct FeatureTable {
  nlohmann::json header;
  std::vector<EpochRef> epochs;
  Eigen::MatrixXd values;
};

void save_feature_table(const FeatureTable& table, const std::filesystem::path& path);
FeatureTable load_feature_table(const std::filesystem::path& path);

// CSV with subject_id, recording_id, epoch_index, stage and one column per
// value dimension (named by `value_columns` when given).
void export_feature_csv(const FeatureTable& table, const std::filesystem::path& path,
                        std::span<const std::string> value_columns = {});

// Ingest cache: windows are kept as raw digital samples next to the per-
// recording calibration, so reloading reproduces calibrated values exactly.
//   "SDEP" | u32 version | u64 header_len | header JSON |
//   u64 epochs x ( u32 recording_ref | u64 epoch_index | u8 stage |
//                  channels x window_samples x i16 ) | u64 fnv1a
struct EpochWindowStore {
  struct Recording {
    std::string subject_id;
    std::string recording_id;
    // physical_min, physical_max, digital_min, digital_max per channel
    std::vector<std::array<double, 4>> calibration;
  };
  struct Epoch {
    std::uint32_t recording = 0;
    std::uint64_t epoch_index = 0;
    SleepStage stage = SleepStage::Excluded;
    std::vector<std::vector<std::int16_t>> digital;  // [channel][sample]
  };

  std::vector<std::string> channel_names;
  double sampling_rate = 0.0;
  std::size_t window_samples = 0;
  std::vector<Recording> recordings;
  std::vector<Epoch> epochs;

  EpochRef ref(std::size_t epoch) const;
  std::vector<double> window(std::size_t epoch, std::size_t channel) const;
};

void save_epoch_store(const EpochWindowStore& store, const std::filesystem::path& path);
EpochWindowStore load_epoch_store(const std::filesystem::path& path);

}  // namespace sleepdyn
