#include <doctest.h>

#include <algorithm>
#include <vector>

#include "sleepdyn/edf.hpp"

using namespace sleepdyn;

namespace {

// Hand-assembled fixture: every header field written out explicitly rather
// than through the library writer, so the round trip has an independent
// reference.
std::vector<std::byte> hand_assembled_fixture() {
  auto field = [](std::string s, std::size_t width) {
    s.resize(width, ' ');
    return s;
  };
  std::string h;
  h += field("0", 8);
  h += field("subj-001", 80);
  h += field("night-01", 80);
  h += field("02.03.95", 8);
  h += field("22.15.00", 8);
  h += field("768", 8);  // 256 * (2 + 1)
  h += field("", 44);
  h += field("2", 8);
  h += field("1", 8);   // 1 s records
  h += field("2", 4);

  // Two channels at 100 Hz.
  h += field("EEG Fpz-Cz", 16) + field("EEG Pz-Oz", 16);
  h += field("AgAgCl electrode", 80) + field("AgAgCl electrode", 80);
  h += field("uV", 8) + field("uV", 8);
  h += field("-250", 8) + field("-125", 8);    // physical min
  h += field("250", 8) + field("125", 8);      // physical max
  h += field("-2048", 8) + field("-1024", 8);  // digital min
  h += field("2047", 8) + field("1023", 8);    // digital max
  h += field("HP:0.5Hz LP:35Hz", 80) + field("", 80);
  h += field("100", 8) + field("100", 8);
  h += field("", 32) + field("", 32);

  std::vector<std::byte> bytes;
  bytes.reserve(h.size() + 2 * 2 * 100 * 2);
  for (const char c : h) bytes.push_back(static_cast<std::byte>(c));
  // Two records, little-endian int16 ramps with distinct per-channel slopes.
  for (int record = 0; record < 2; ++record) {
    for (int ch = 0; ch < 2; ++ch) {
      for (int s = 0; s < 100; ++s) {
        const int v = (ch == 0 ? -300 : 450) + 3 * s + record * 17;
        bytes.push_back(static_cast<std::byte>(v & 0xff));
        bytes.push_back(static_cast<std::byte>((v >> 8) & 0xff));
      }
    }
  }
  return bytes;
}

}  // namespace

TEST_CASE("affine calibration endpoint") {
  // 1 channel, 2 records x 100 samples, all digital values at digital_min.
  ChannelMeta ch = make_channel("EEG Fpz-Cz", "uV", -250.0, 250.0, -2048, 2047, 100);
  EdfRecording rec = make_recording("p", "r", "01.01.01", "00.00.00", 1.0, {ch});
  set_record_count(rec, 2);
  rec.digital[0].assign(200, -2048);
  const std::vector<std::byte> bytes = write_edf(rec);
  const EdfRecording parsed = parse_edf(bytes);
  const std::vector<double> phys = parsed.physical(0);
  REQUIRE(phys.size() == 200);
  for (const double v : phys) CHECK(v == doctest::Approx(-250.0));
}

TEST_CASE("minimal recording header length") {
  ChannelMeta ch = make_channel("EEG Fpz-Cz", "uV", -250.0, 250.0, -2048, 2047, 100);
  EdfRecording rec = make_recording("p", "r", "01.01.01", "00.00.00", 1.0, {ch});
  set_record_count(rec, 0);
  const std::vector<std::byte> bytes = write_edf(rec);
  CHECK(bytes.size() == 512);  // 256 + 256 * 1
}

TEST_CASE("round trip is byte-exact on the hand-assembled fixture") {
  const std::vector<std::byte> original = hand_assembled_fixture();
  const EdfRecording rec = parse_edf(original);

  CHECK(rec.patient_id == "subj-001");
  CHECK(rec.num_records == 2);
  CHECK(rec.record_duration == 1.0);
  REQUIRE(rec.channels.size() == 2);
  CHECK(rec.channels[0].label == "EEG Fpz-Cz");
  CHECK(rec.sampling_rate(0) == 100.0);
  CHECK(rec.channel_index("eeg pz-oz") == 1);
  CHECK(rec.channel_index("EEG Cz-A1") == -1);

  const std::vector<std::byte> rewritten = write_edf(rec);
  REQUIRE(rewritten.size() == original.size());
  CHECK(std::equal(rewritten.begin(), rewritten.end(), original.begin()));
}

TEST_CASE("truncated data is rejected") {
  std::vector<std::byte> bytes = hand_assembled_fixture();
  bytes.pop_back();
  CHECK_THROWS_AS(parse_edf(bytes), TruncatedData);

  // Declared record count implying more bytes than present.
  std::vector<std::byte> short_file = hand_assembled_fixture();
  short_file.resize(768 + 2 * 100 * 2);  // only one of two records
  CHECK_THROWS_AS(parse_edf(short_file), TruncatedData);

  CHECK_THROWS_AS(parse_edf(std::vector<std::byte>(10)), TruncatedData);
}

TEST_CASE("malformed headers are rejected") {
  std::vector<std::byte> bad_version = hand_assembled_fixture();
  bad_version[0] = static_cast<std::byte>('9');
  CHECK_THROWS_AS(parse_edf(bad_version), MalformedHeader);

  std::vector<std::byte> bad_count = hand_assembled_fixture();
  bad_count[236] = static_cast<std::byte>('x');  // number of records field
  CHECK_THROWS_AS(parse_edf(bad_count), MalformedHeader);
}

TEST_CASE("bad calibration is rejected") {
  // physical_min == physical_max
  std::vector<std::byte> bytes = hand_assembled_fixture();
  const std::size_t phys_min_offset = 256 + 104 * 2;  // first channel
  const std::string swapped = "250     ";
  for (std::size_t i = 0; i < 8; ++i) {
    bytes[phys_min_offset + i] = static_cast<std::byte>(swapped[i]);
  }
  CHECK_THROWS_AS(parse_edf(bytes), BadCalibration);
}

TEST_CASE("unrepresentable physical values fail the writer") {
  ChannelMeta ch = make_channel("EEG Fpz-Cz", "uV", -250.0, 250.0, -2048, 2047, 100);
  EdfRecording rec = make_recording("p", "r", "01.01.01", "00.00.00", 1.0, {ch});
  set_record_count(rec, 1);
  rec.physical_only[0].assign(100, 0.0);
  rec.physical_only[0][50] = 260.0;  // outside [-250, 250]
  CHECK_THROWS_AS(write_edf(rec), UnrepresentableValue);

  rec.physical_only[0][50] = 250.0;
  const std::vector<std::byte> bytes = write_edf(rec);
  const EdfRecording parsed = parse_edf(bytes);
  CHECK(parsed.physical(0)[50] == doctest::Approx(250.0).epsilon(1e-3));
}

TEST_CASE("quantization round trip stays within half a step") {
  ChannelMeta ch = make_channel("x", "uV", -100.0, 100.0, -1000, 999, 10);
  const std::vector<double> values = {-100.0, -3.725, 0.0, 42.42, 99.9};
  const std::vector<std::int16_t> digital = quantize(ch, values);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double back =
        ch.physical_min + (digital[i] - ch.digital_min) * ch.lsb();
    CHECK(std::abs(back - values[i]) <= 0.5 * ch.lsb() + 1e-12);
  }
}
