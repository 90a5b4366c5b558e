#include <doctest.h>

#include <string>
#include <vector>

#include "sleepdyn/hypnogram.hpp"

using namespace sleepdyn;

TEST_CASE("annotation label mapping") {
  CHECK(stage_from_annotation("Sleep stage W") == SleepStage::Awake);
  CHECK(stage_from_annotation("sleep stage r") == SleepStage::Rem);
  CHECK(stage_from_annotation("SLEEP STAGE 1") == SleepStage::N1);
  CHECK(stage_from_annotation("Sleep stage 2") == SleepStage::N2);
  CHECK(stage_from_annotation("Sleep stage 3") == SleepStage::N3);
  CHECK(stage_from_annotation("Sleep stage 4") == SleepStage::N3);
  CHECK(stage_from_annotation("Movement time") == SleepStage::Excluded);
  CHECK(stage_from_annotation("Sleep stage ?") == SleepStage::Excluded);
  CHECK_FALSE(stage_from_annotation("Lights off").has_value());
}

TEST_CASE("N4 relabels to N3 across slots") {
  const std::vector<StageInterval> intervals =
      parse_hypnogram_text("0\t60\tSleep stage 4\n");
  const std::vector<SleepStage> slots = stage_slots(intervals);
  REQUIRE(slots.size() == 2);
  CHECK(slots[0] == SleepStage::N3);
  CHECK(slots[1] == SleepStage::N3);
}

TEST_CASE("movement maps to an excluded slot") {
  const std::vector<SleepStage> slots =
      stage_slots(parse_hypnogram_text("0\t30\tMovement time\n"));
  REQUIRE(slots.size() == 1);
  CHECK(slots[0] == SleepStage::Excluded);
}

TEST_CASE("overlapping annotations are rejected") {
  std::vector<StageInterval> intervals = {
      {0.0, 30.0, SleepStage::Awake},
      {15.0, 30.0, SleepStage::Rem},
  };
  // The second onset is also misaligned; alignment is checked first.
  CHECK_THROWS_AS(stage_slots(intervals), NonMultipleDuration);

  intervals[1].onset_seconds = 0.0;
  CHECK_THROWS_AS(stage_slots(intervals), OverlappingAnnotations);
}

TEST_CASE("durations must be slot multiples") {
  const std::vector<StageInterval> intervals = {{0.0, 45.0, SleepStage::Awake}};
  CHECK_THROWS_AS(stage_slots(intervals), NonMultipleDuration);
}

TEST_CASE("gaps become excluded slots") {
  const std::vector<StageInterval> intervals = {
      {0.0, 30.0, SleepStage::Awake},
      {60.0, 30.0, SleepStage::N2},
  };
  const std::vector<SleepStage> slots = stage_slots(intervals);
  REQUIRE(slots.size() == 3);
  CHECK(slots[1] == SleepStage::Excluded);
}

TEST_CASE("sidecar text parsing is strict") {
  CHECK_THROWS_AS(parse_hypnogram_text("0\t30\tSleep stage Z\n"), DataError);
  CHECK_THROWS_AS(parse_hypnogram_text("0 30 Sleep stage W\n"), DataError);
  const auto ok = parse_hypnogram_text("# comment\n\n0\t30\tSleep stage W\n");
  REQUIRE(ok.size() == 1);
  CHECK(ok[0].stage == SleepStage::Awake);
}

TEST_CASE("TAL stream parsing") {
  // Timestamp TAL, then two stage annotations; non-stage text is ignored.
  std::string tal;
  tal += "+0\x14\x14";
  tal += '\0';
  tal += "+0\x15" "60\x14Sleep stage W\x14";
  tal += '\0';
  tal += "+60\x15" "30\x14Sleep stage 4\x14";
  tal += '\0';
  tal += "+90\x15" "30\x14" "Body moves\x14";
  tal += '\0';
  const std::vector<StageInterval> intervals = parse_tal_stream(tal);
  REQUIRE(intervals.size() == 2);
  CHECK(intervals[0].onset_seconds == 0.0);
  CHECK(intervals[0].duration_seconds == 60.0);
  CHECK(intervals[0].stage == SleepStage::Awake);
  CHECK(intervals[1].stage == SleepStage::N3);
}

TEST_CASE("wake truncation retains the margin around sleep") {
  // 100 awake, 10 N2, 100 awake; 30 minutes = 60 slots of margin.
  std::vector<SleepStage> slots(210, SleepStage::Awake);
  for (int i = 100; i < 110; ++i) slots[i] = SleepStage::N2;
  const EpochRange r = truncate_wake(slots, 30);
  CHECK(r.first == 40);
  CHECK(r.last == 169);
}

TEST_CASE("wake truncation clips at the recording edges") {
  std::vector<SleepStage> slots(50, SleepStage::Awake);
  slots[0] = SleepStage::N1;  // sleep starts immediately
  const EpochRange r = truncate_wake(slots, 30);
  CHECK(r.first == 0);
  CHECK(r.last == 49);
}

TEST_CASE("all-awake recordings have no sleep to anchor on") {
  const std::vector<SleepStage> slots(40, SleepStage::Awake);
  CHECK_THROWS_AS(truncate_wake(slots, 30), NoSleepFound);

  // Excluded slots do not count as sleep either.
  std::vector<SleepStage> excluded(40, SleepStage::Awake);
  excluded[10] = SleepStage::Excluded;
  CHECK_THROWS_AS(truncate_wake(excluded, 30), NoSleepFound);
}
