#pragma once

#include <span>
#include <string>
#include <vector>

#include "sleepdyn/edf.hpp"
#include "sleepdyn/hypnogram.hpp"
#include "sleepdyn/stage.hpp"

namespace sleepdyn {

// One scored 30 s epoch with its 90 s feature-extraction window per channel,
// covering [epoch_start - 60, epoch_start + 30].
struct StagedEpoch {
  std::string subject_id;
  std::string recording_id;
  std::size_t epoch_index = 0;  // slot index within the recording
  double epoch_start = 0.0;     // seconds from recording start
  SleepStage stage = SleepStage::Excluded;
  std::vector<std::vector<double>> window;  // [channel][90 * fs samples]
};

// Slots that actually get scored: the retained range minus its first three
// and last slot, minus Excluded slots.
std::vector<std::size_t> scored_slots(std::span<const SleepStage> slots,
                                      const EpochRange& retained);

// Uncalibrated windows, one per scored slot; windows[e][channel] holds the
// raw digital samples. Shared by extract_epochs and the ingest cache.
struct DigitalEpochs {
  std::vector<std::size_t> slot_indices;
  std::vector<std::vector<std::vector<std::int16_t>>> windows;
  std::size_t window_samples = 0;
  double sampling_rate = 0.0;
  std::vector<int> channel_indices;
};

DigitalEpochs extract_epoch_windows(const EdfRecording& rec,
                                    std::span<const SleepStage> slots,
                                    const EpochRange& retained,
                                    std::span<const std::string> channel_names);

std::vector<StagedEpoch> extract_epochs(const EdfRecording& rec,
                                        std::span<const SleepStage> slots,
                                        const EpochRange& retained,
                                        std::span<const std::string> channel_names,
                                        const std::string& subject_id,
                                        const std::string& recording_id);

}  // namespace sleepdyn
