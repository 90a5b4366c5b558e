#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sleepdyn/errors.hpp"

namespace sleepdyn {

// One signal header entry. The raw_* fields keep the fixed-width header text
// exactly as read so that write_edf() can reproduce the input byte for byte;
// helpers that build recordings in code fill them with canonical formatting.
struct ChannelMeta {
  std::string label;                // trimmed
  std::string physical_dimension;   // trimmed
  double physical_min = 0.0;
  double physical_max = 0.0;
  int digital_min = 0;
  int digital_max = 0;
  int samples_per_record = 0;

  std::string raw_label;             // 16 bytes
  std::string raw_transducer;        // 80
  std::string raw_dimension;         // 8
  std::string raw_physical_min;      // 8
  std::string raw_physical_max;      // 8
  std::string raw_digital_min;       // 8
  std::string raw_digital_max;       // 8
  std::string raw_prefiltering;      // 80
  std::string raw_samples_per_record;  // 8
  std::string raw_reserved;          // 32

  bool is_annotation() const;
  double lsb() const;  // physical units per digital step
};

struct EdfRecording {
  std::string patient_id;    // trimmed local patient identification
  std::string recording_id;  // trimmed local recording identification
  std::string start_date;    // dd.mm.yy
  std::string start_time;    // hh.mm.ss
  int num_records = 0;
  double record_duration = 0.0;  // seconds per data record
  std::vector<ChannelMeta> channels;

  // Per channel: digital samples (authoritative when non-empty) or physical
  // samples to be quantized on write. parse_edf always fills digital.
  std::vector<std::vector<std::int16_t>> digital;
  std::vector<std::vector<double>> physical_only;

  std::string raw_version;      // 8 bytes
  std::string raw_patient;      // 80
  std::string raw_recording;    // 80
  std::string raw_date;         // 8
  std::string raw_time;         // 8
  std::string raw_header_bytes; // 8
  std::string raw_reserved;     // 44
  std::string raw_num_records;  // 8
  std::string raw_duration;     // 8
  std::string raw_num_signals;  // 4

  double sampling_rate(std::size_t channel) const;
  std::size_t sample_count(std::size_t channel) const;
  double duration_seconds() const { return num_records * record_duration; }

  // Calibrated samples of one channel.
  std::vector<double> physical(std::size_t channel) const;
  double calibrate(std::size_t channel, std::int16_t digital_value) const;

  // Case-insensitive match on the trimmed label; -1 when absent.
  int channel_index(std::string_view label) const;
};

EdfRecording parse_edf(std::span<const std::byte> bytes);
EdfRecording parse_edf_file(const std::filesystem::path& path);

std::vector<std::byte> write_edf(const EdfRecording& rec);
void write_edf_file(const EdfRecording& rec, const std::filesystem::path& path);

// Quantize physical values through the channel calibration; values more than
// half a digital step outside [physical_min, physical_max] throw
// UnrepresentableValue.
std::vector<std::int16_t> quantize(const ChannelMeta& meta,
                                   std::span<const double> physical);

// Builders for fixtures and synthetic recordings; they fill the raw header
// fields with canonical (left-justified, space-padded) formatting.
ChannelMeta make_channel(std::string label, std::string dimension,
                         double physical_min, double physical_max,
                         int digital_min, int digital_max,
                         int samples_per_record);
EdfRecording make_recording(std::string patient_id, std::string recording_id,
                            std::string start_date, std::string start_time,
                            double record_duration,
                            std::vector<ChannelMeta> channels);

// Sets num_records and refreshes the raw header field to match.
void set_record_count(EdfRecording& rec, int num_records);

namespace detail {
std::string trim(std::string_view s);
std::string fixed_field(std::string_view value, std::size_t width);
std::string format_edf_number(double value, std::size_t width);
}  // namespace detail

}  // namespace sleepdyn
