#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sleepdyn/stage.hpp"

namespace sleepdyn {

// Demo/test dataset generator: EDF recordings at 100 Hz with two EEG
// channels whose spectral content depends on the expert stage, plus sidecar
// hypnograms and a manifest.json. Stages follow a fixed block template so
// classes are separable by construction.
struct SyntheticDatasetSpec {
  int subjects = 5;
  int recordings_per_subject = 1;
  std::uint64_t seed = 20240101;
  double noise_amplitude = 5.0;   // microvolts
  double carrier_amplitude = 32.0;
  bool include_movement_slots = false;  // sprinkle Excluded slots
  std::vector<SleepStage> stage_template;  // empty -> built-in template

  static std::vector<SleepStage> default_template();
};

struct SyntheticRecordingInfo {
  std::string subject_id;
  std::string recording_id;
  std::filesystem::path psg;
  std::filesystem::path hypnogram;
  std::vector<SleepStage> slots;
};

std::vector<SyntheticRecordingInfo> write_synthetic_dataset(
    const std::filesystem::path& root, const SyntheticDatasetSpec& spec);

}  // namespace sleepdyn
