#pragma once

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "sleepdyn/edf.hpp"
#include "sleepdyn/stage.hpp"

namespace sleepdyn {

struct StageInterval {
  double onset_seconds = 0.0;
  double duration_seconds = 0.0;
  SleepStage stage = SleepStage::Excluded;
};

// Maps the standard annotation strings, case-insensitively:
//   "Sleep stage W/R/1/2/3"  -> the stage, "Sleep stage 4" -> N3,
//   "Movement time" / "Sleep stage ?" -> Excluded.
std::optional<SleepStage> stage_from_annotation(std::string_view label);

// Sidecar format: one "onset<TAB>duration<TAB>label" per line; blank lines
// and lines starting with '#' are skipped. Unrecognized labels throw.
std::vector<StageInterval> parse_hypnogram_text(std::string_view text);

// EDF+ time-stamped annotation lists; annotations that are not stage strings
// (timekeeping TALs, free-text events) are ignored.
std::vector<StageInterval> parse_tal_stream(std::string_view tal_bytes);
std::vector<StageInterval> parse_hypnogram_edf(const EdfRecording& rec);

// Expands validated intervals into consecutive 30 s scoring slots starting at
// t = 0; uncovered slots are Excluded. Intervals must be onset-ascending with
// onsets and durations that are multiples of 30 s.
std::vector<SleepStage> stage_slots(std::span<const StageInterval> intervals);

// Inclusive retained slot range.
struct EpochRange {
  std::size_t first = 0;
  std::size_t last = 0;
  std::size_t count() const { return last - first + 1; }
};

// Keeps margin_minutes of wake on each side of the sleep period:
// [first_sleep - margin, last_sleep + margin] clipped to the recording,
// margin = margin_minutes * 2 slots. Excluded slots do not count as sleep.
EpochRange truncate_wake(std::span<const SleepStage> slots, int margin_minutes);

}  // namespace sleepdyn
