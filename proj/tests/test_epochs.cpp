#include <doctest.h>

#include <numeric>
#include <vector>

#include "sleepdyn/epochs.hpp"

using namespace sleepdyn;

namespace {

EdfRecording recording_with_slots(std::size_t n_slots) {
  ChannelMeta ch0 = make_channel("EEG Fpz-Cz", "uV", -250.0, 250.0, -2048, 2047, 3000);
  ChannelMeta ch1 = make_channel("EEG Pz-Oz", "uV", -250.0, 250.0, -2048, 2047, 3000);
  EdfRecording rec =
      make_recording("p", "r", "01.01.01", "00.00.00", 30.0, {ch0, ch1});
  set_record_count(rec, static_cast<int>(n_slots));
  for (auto& d : rec.digital) {
    d.resize(n_slots * 3000);
    std::iota(d.begin(), d.end(), 0);
    for (auto& v : d) v = static_cast<std::int16_t>(v % 1000);
  }
  return rec;
}

}  // namespace

TEST_CASE("ten labeled slots yield six scored epochs") {
  std::vector<SleepStage> slots(10, SleepStage::N2);
  const EpochRange all{0, 9};
  const std::vector<std::size_t> scored = scored_slots(slots, all);
  CHECK(scored == std::vector<std::size_t>{3, 4, 5, 6, 7, 8});
}

TEST_CASE("excluded slots are dropped from the scored set") {
  std::vector<SleepStage> slots(10, SleepStage::N2);
  slots[5] = SleepStage::Excluded;
  const std::vector<std::size_t> scored = scored_slots(slots, {0, 9});
  CHECK(scored == std::vector<std::size_t>{3, 4, 6, 7, 8});
}

TEST_CASE("short retained ranges yield nothing") {
  std::vector<SleepStage> slots(10, SleepStage::N2);
  CHECK(scored_slots(slots, {2, 5}).empty());  // 4 retained slots
}

TEST_CASE("bookkeeping identity across many recordings") {
  // 22 recordings, drop 4 each: sum(slots) - 88 scored epochs.
  std::vector<std::size_t> sizes(22);
  for (std::size_t i = 0; i < sizes.size(); ++i) sizes[i] = 900 + 13 * i;
  std::size_t total = 0, scored = 0;
  for (const std::size_t n : sizes) {
    std::vector<SleepStage> slots(n, SleepStage::N2);
    total += n;
    scored += scored_slots(slots, {0, n - 1}).size();
  }
  CHECK(scored == total - 4 * sizes.size());
}

TEST_CASE("extracted windows cover [t-60, t+30] at 100 Hz") {
  const EdfRecording rec = recording_with_slots(10);
  const std::vector<SleepStage> slots(10, SleepStage::N2);
  const std::vector<std::string> channels = {"EEG Fpz-Cz", "EEG Pz-Oz"};
  const std::vector<StagedEpoch> epochs =
      extract_epochs(rec, slots, {0, 9}, channels, "subj", "rec");

  REQUIRE(epochs.size() == 6);
  const StagedEpoch& first = epochs.front();
  CHECK(first.epoch_index == 3);
  CHECK(first.epoch_start == doctest::Approx(90.0));
  REQUIRE(first.window.size() == 2);
  for (const auto& w : first.window) CHECK(w.size() == 9000);

  // Window of slot 3 starts at t = 30 s, sample 3000.
  const double expected = rec.calibrate(0, rec.digital[0][3000]);
  CHECK(first.window[0][0] == doctest::Approx(expected));
}

TEST_CASE("missing channels are reported") {
  const EdfRecording rec = recording_with_slots(10);
  const std::vector<SleepStage> slots(10, SleepStage::N2);
  const std::vector<std::string> channels = {"EEG Cz-A1"};
  CHECK_THROWS_AS(extract_epochs(rec, slots, {0, 9}, channels, "s", "r"),
                  MissingChannel);
}

TEST_CASE("windows outside the recording are rejected") {
  const EdfRecording rec = recording_with_slots(8);  // shorter signal
  const std::vector<SleepStage> slots(10, SleepStage::N2);
  const std::vector<std::string> channels = {"EEG Fpz-Cz"};
  CHECK_THROWS_AS(extract_epochs(rec, slots, {0, 9}, channels, "s", "r"),
                  WindowOutOfBounds);
}

TEST_CASE("epoch count identity with exclusions") {
  // S retained slots minus 4 minus excluded-in-range.
  std::vector<SleepStage> slots(40, SleepStage::N2);
  slots[10] = SleepStage::Excluded;
  slots[20] = SleepStage::Excluded;
  slots[39] = SleepStage::Excluded;  // the last slot is dropped anyway
  const EpochRange retained{0, 39};
  CHECK(scored_slots(slots, retained).size() == 40 - 4 - 2);
}
