#include "sleepdyn/epochs.hpp"

#include <cmath>

namespace sleepdyn {

std::vector<std::size_t> scored_slots(std::span<const SleepStage> slots,
                                      const EpochRange& retained) {
  std::vector<std::size_t> out;
  if (retained.last >= slots.size() || retained.first > retained.last) {
    throw WindowOutOfBounds("retained range does not fit the slot sequence");
  }
  if (retained.count() <= 4) return out;
  // Drop the first three and the last retained slot, then Excluded ones.
  for (std::size_t l = retained.first + 3; l < retained.last; ++l) {
    if (slots[l] != SleepStage::Excluded) out.push_back(l);
  }
  return out;
}

DigitalEpochs extract_epoch_windows(const EdfRecording& rec,
                                    std::span<const SleepStage> slots,
                                    const EpochRange& retained,
                                    std::span<const std::string> channel_names) {
  DigitalEpochs out;
  out.channel_indices.reserve(channel_names.size());
  for (const std::string& name : channel_names) {
    const int idx = rec.channel_index(name);
    if (idx < 0) throw MissingChannel("channel '" + name + "' not in recording");
    out.channel_indices.push_back(idx);
  }
  if (out.channel_indices.empty()) throw MissingChannel("no channels requested");

  const double fs = rec.sampling_rate(static_cast<std::size_t>(out.channel_indices[0]));
  for (int idx : out.channel_indices) {
    if (rec.sampling_rate(static_cast<std::size_t>(idx)) != fs) {
      throw UnsupportedSamplingRate("requested channels have differing sampling rates");
    }
  }
  const double ws = 90.0 * fs;
  if (std::abs(ws - std::round(ws)) > 1e-9) {
    throw UnsupportedSamplingRate("90 s window is not a whole number of samples at " +
                                  std::to_string(fs) + " Hz");
  }
  out.sampling_rate = fs;
  out.window_samples = static_cast<std::size_t>(std::llround(ws));

  out.slot_indices = scored_slots(slots, retained);
  out.windows.reserve(out.slot_indices.size());
  for (const std::size_t l : out.slot_indices) {
    const double t_start = 30.0 * static_cast<double>(l) - 60.0;
    const auto start = static_cast<std::ptrdiff_t>(std::llround(t_start * fs));
    std::vector<std::vector<std::int16_t>> per_channel;
    per_channel.reserve(out.channel_indices.size());
    for (int idx : out.channel_indices) {
      const std::vector<std::int16_t>& sig = rec.digital.at(static_cast<std::size_t>(idx));
      if (start < 0 ||
          static_cast<std::size_t>(start) + out.window_samples > sig.size()) {
        throw WindowOutOfBounds("slot " + std::to_string(l) +
                                " window leaves the recording");
      }
      per_channel.emplace_back(sig.begin() + start,
                               sig.begin() + start + static_cast<std::ptrdiff_t>(out.window_samples));
    }
    out.windows.push_back(std::move(per_channel));
  }
  return out;
}

std::vector<StagedEpoch> extract_epochs(const EdfRecording& rec,
                                        std::span<const SleepStage> slots,
                                        const EpochRange& retained,
                                        std::span<const std::string> channel_names,
                                        const std::string& subject_id,
                                        const std::string& recording_id) {
  const DigitalEpochs digital = extract_epoch_windows(rec, slots, retained, channel_names);
  std::vector<StagedEpoch> epochs;
  epochs.reserve(digital.slot_indices.size());
  for (std::size_t e = 0; e < digital.slot_indices.size(); ++e) {
    const std::size_t l = digital.slot_indices[e];
    StagedEpoch ep;
    ep.subject_id = subject_id;
    ep.recording_id = recording_id;
    ep.epoch_index = l;
    ep.epoch_start = 30.0 * static_cast<double>(l);
    ep.stage = slots[l];
    ep.window.reserve(digital.channel_indices.size());
    for (std::size_t c = 0; c < digital.channel_indices.size(); ++c) {
      const auto ch = static_cast<std::size_t>(digital.channel_indices[c]);
      std::vector<double> w(digital.window_samples);
      for (std::size_t s = 0; s < w.size(); ++s) {
        w[s] = rec.calibrate(ch, digital.windows[e][c][s]);
      }
      ep.window.push_back(std::move(w));
    }
    epochs.push_back(std::move(ep));
  }
  return epochs;
}

}  // namespace sleepdyn
