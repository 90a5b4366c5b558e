#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>

namespace sleepdyn {

// Scoring classes in the fixed order used everywhere (confusion matrices,
// one-versus-all models, tie breaking). Excluded marks MOVEMENT/UNKNOWN slots
// during ingestion; it never survives into scored epochs.
enum class SleepStage : std::uint8_t {
  Awake = 0,
  Rem = 1,
  N1 = 2,
  N2 = 3,
  N3 = 4,
  Excluded = 5,
};

inline constexpr int kNumStages = 5;

inline constexpr bool is_scorable(SleepStage s) {
  return static_cast<int>(s) < kNumStages;
}

inline constexpr std::array<SleepStage, kNumStages> kAllStages = {
    SleepStage::Awake, SleepStage::Rem, SleepStage::N1, SleepStage::N2,
    SleepStage::N3};

constexpr std::string_view to_string(SleepStage s) {
  switch (s) {
    case SleepStage::Awake: return "Awake";
    case SleepStage::Rem: return "REM";
    case SleepStage::N1: return "N1";
    case SleepStage::N2: return "N2";
    case SleepStage::N3: return "N3";
    case SleepStage::Excluded: return "Excluded";
  }
  return "?";
}

std::optional<SleepStage> stage_from_string(std::string_view name);

}  // namespace sleepdyn
