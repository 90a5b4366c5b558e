#include "sleepdyn/edf.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace sleepdyn {

namespace detail {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::string fixed_field(std::string_view value, std::size_t width) {
  std::string out(value.substr(0, width));
  out.resize(width, ' ');
  return out;
}

// Shortest decimal representation that fits an 8-byte EDF numeric field.
std::string format_edf_number(double value, std::size_t width) {
  if (value == std::floor(value) && std::abs(value) < 1e15) {
    std::string s = std::to_string(static_cast<long long>(value));
    if (s.size() <= width) return fixed_field(s, width);
  }
  for (int prec = static_cast<int>(width) - 2; prec >= 0; --prec) {
    std::ostringstream os;
    os.precision(prec);
    os << std::fixed << value;
    std::string s = os.str();
    while (s.find('.') != std::string::npos && (s.back() == '0' || s.back() == '.')) {
      const bool dot = s.back() == '.';
      s.pop_back();
      if (dot) break;
    }
    if (s.size() <= width) return fixed_field(s, width);
  }
  throw UnrepresentableValue("EDF numeric field cannot hold " + std::to_string(value));
}

namespace {

std::string_view field(std::span<const std::byte> bytes, std::size_t offset,
                       std::size_t width) {
  return std::string_view(reinterpret_cast<const char*>(bytes.data()) + offset, width);
}

long parse_long(std::string_view raw, const char* what) {
  const std::string t = trim(raw);
  long value = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
    throw MalformedHeader(std::string("non-numeric EDF header field ") + what +
                          ": '" + t + "'");
  }
  return value;
}

double parse_double(std::string_view raw, const char* what) {
  const std::string t = trim(raw);
  if (t.empty()) throw MalformedHeader(std::string("empty EDF header field ") + what);
  char* end = nullptr;
  const double value = std::strtod(t.c_str(), &end);
  if (end != t.c_str() + t.size()) {
    throw MalformedHeader(std::string("non-numeric EDF header field ") + what +
                          ": '" + t + "'");
  }
  return value;
}

}  // namespace
}  // namespace detail

bool ChannelMeta::is_annotation() const { return label == "EDF Annotations"; }

double ChannelMeta::lsb() const {
  return (physical_max - physical_min) /
         (static_cast<double>(digital_max) - static_cast<double>(digital_min));
}

double EdfRecording::sampling_rate(std::size_t channel) const {
  return static_cast<double>(channels.at(channel).samples_per_record) / record_duration;
}

std::size_t EdfRecording::sample_count(std::size_t channel) const {
  return static_cast<std::size_t>(num_records) *
         static_cast<std::size_t>(channels.at(channel).samples_per_record);
}

double EdfRecording::calibrate(std::size_t channel, std::int16_t digital_value) const {
  const ChannelMeta& m = channels.at(channel);
  return m.physical_min +
         (static_cast<double>(digital_value) - static_cast<double>(m.digital_min)) *
             (m.physical_max - m.physical_min) /
             (static_cast<double>(m.digital_max) - static_cast<double>(m.digital_min));
}

std::vector<double> EdfRecording::physical(std::size_t channel) const {
  if (channel < physical_only.size() && !physical_only[channel].empty() &&
      (channel >= digital.size() || digital[channel].empty())) {
    return physical_only[channel];
  }
  const std::vector<std::int16_t>& d = digital.at(channel);
  std::vector<double> out(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) out[i] = calibrate(channel, d[i]);
  return out;
}

int EdfRecording::channel_index(std::string_view label) const {
  auto lower = [](std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return s;
  };
  const std::string want = lower(detail::trim(label));
  for (std::size_t i = 0; i < channels.size(); ++i) {
    if (lower(channels[i].label) == want) return static_cast<int>(i);
  }
  return -1;
}

EdfRecording parse_edf(std::span<const std::byte> bytes) {
  using detail::field;
  using detail::parse_double;
  using detail::parse_long;
  using detail::trim;

  if (bytes.size() < 256) {
    throw TruncatedData("EDF input shorter than the 256-byte header");
  }

  EdfRecording rec;
  rec.raw_version = std::string(field(bytes, 0, 8));
  rec.raw_patient = std::string(field(bytes, 8, 80));
  rec.raw_recording = std::string(field(bytes, 88, 80));
  rec.raw_date = std::string(field(bytes, 168, 8));
  rec.raw_time = std::string(field(bytes, 176, 8));
  rec.raw_header_bytes = std::string(field(bytes, 184, 8));
  rec.raw_reserved = std::string(field(bytes, 192, 44));
  rec.raw_num_records = std::string(field(bytes, 236, 8));
  rec.raw_duration = std::string(field(bytes, 244, 8));
  rec.raw_num_signals = std::string(field(bytes, 252, 4));

  if (trim(rec.raw_version) != "0") {
    throw MalformedHeader("unsupported EDF version field '" + trim(rec.raw_version) + "'");
  }
  rec.patient_id = trim(rec.raw_patient);
  rec.recording_id = trim(rec.raw_recording);
  rec.start_date = trim(rec.raw_date);
  rec.start_time = trim(rec.raw_time);

  const long num_signals = parse_long(rec.raw_num_signals, "number of signals");
  if (num_signals <= 0) throw MalformedHeader("EDF file declares no signals");
  const long header_bytes = parse_long(rec.raw_header_bytes, "header bytes");
  const std::size_t expected_header = 256 * (static_cast<std::size_t>(num_signals) + 1);
  if (header_bytes != static_cast<long>(expected_header)) {
    throw MalformedHeader("header byte count " + std::to_string(header_bytes) +
                          " does not match " + std::to_string(expected_header));
  }
  if (bytes.size() < expected_header) {
    throw TruncatedData("EDF input shorter than its declared header");
  }

  const long num_records = parse_long(rec.raw_num_records, "number of records");
  if (num_records < 0) throw MalformedHeader("negative number of data records");
  rec.num_records = static_cast<int>(num_records);
  rec.record_duration = parse_double(rec.raw_duration, "record duration");
  if (rec.record_duration < 0) throw MalformedHeader("negative record duration");

  const std::size_t ns = static_cast<std::size_t>(num_signals);
  rec.channels.resize(ns);
  for (std::size_t i = 0; i < ns; ++i) {
    ChannelMeta& m = rec.channels[i];
    m.raw_label = std::string(field(bytes, 256 + 16 * i, 16));
    m.raw_transducer = std::string(field(bytes, 256 + 16 * ns + 80 * i, 80));
    m.raw_dimension = std::string(field(bytes, 256 + 96 * ns + 8 * i, 8));
    m.raw_physical_min = std::string(field(bytes, 256 + 104 * ns + 8 * i, 8));
    m.raw_physical_max = std::string(field(bytes, 256 + 112 * ns + 8 * i, 8));
    m.raw_digital_min = std::string(field(bytes, 256 + 120 * ns + 8 * i, 8));
    m.raw_digital_max = std::string(field(bytes, 256 + 128 * ns + 8 * i, 8));
    m.raw_prefiltering = std::string(field(bytes, 256 + 136 * ns + 80 * i, 80));
    m.raw_samples_per_record = std::string(field(bytes, 256 + 216 * ns + 8 * i, 8));
    m.raw_reserved = std::string(field(bytes, 256 + 224 * ns + 32 * i, 32));

    m.label = trim(m.raw_label);
    m.physical_dimension = trim(m.raw_dimension);
    m.physical_min = parse_double(m.raw_physical_min, "physical minimum");
    m.physical_max = parse_double(m.raw_physical_max, "physical maximum");
    m.digital_min = static_cast<int>(parse_long(m.raw_digital_min, "digital minimum"));
    m.digital_max = static_cast<int>(parse_long(m.raw_digital_max, "digital maximum"));
    const long spr = parse_long(m.raw_samples_per_record, "samples per record");
    if (spr <= 0) throw MalformedHeader("non-positive samples per record");
    m.samples_per_record = static_cast<int>(spr);

    if (!m.is_annotation()) {
      if (!(m.physical_min < m.physical_max)) {
        throw BadCalibration("physical_min >= physical_max on channel '" + m.label + "'");
      }
      if (!(m.digital_min < m.digital_max)) {
        throw BadCalibration("digital_min >= digital_max on channel '" + m.label + "'");
      }
      if (m.digital_min < -32768 || m.digital_max > 32767) {
        throw BadCalibration("digital range outside 16-bit on channel '" + m.label + "'");
      }
    }
  }

  std::size_t record_samples = 0;
  for (const ChannelMeta& m : rec.channels) {
    record_samples += static_cast<std::size_t>(m.samples_per_record);
  }
  const std::size_t expected_total =
      expected_header + 2 * record_samples * static_cast<std::size_t>(rec.num_records);
  if (bytes.size() != expected_total) {
    throw TruncatedData("EDF byte length " + std::to_string(bytes.size()) +
                        " does not match declared " + std::to_string(expected_total));
  }

  rec.digital.assign(ns, {});
  for (std::size_t i = 0; i < ns; ++i) {
    rec.digital[i].resize(static_cast<std::size_t>(rec.num_records) *
                          rec.channels[i].samples_per_record);
  }
  const std::byte* p = bytes.data() + expected_header;
  for (int r = 0; r < rec.num_records; ++r) {
    for (std::size_t i = 0; i < ns; ++i) {
      const std::size_t n = rec.channels[i].samples_per_record;
      std::int16_t* dst = rec.digital[i].data() + static_cast<std::size_t>(r) * n;
      for (std::size_t s = 0; s < n; ++s) {
        const auto lo = static_cast<std::uint16_t>(std::to_integer<std::uint8_t>(p[0]));
        const auto hi = static_cast<std::uint16_t>(std::to_integer<std::uint8_t>(p[1]));
        dst[s] = static_cast<std::int16_t>(static_cast<std::uint16_t>(lo | (hi << 8)));
        p += 2;
      }
    }
  }
  return rec;
}

EdfRecording parse_edf_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open EDF file " + path.string());
  std::vector<char> buf((std::istreambuf_iterator<char>(in)),
                        std::istreambuf_iterator<char>());
  return parse_edf(std::as_bytes(std::span<const char>(buf)));
}

std::vector<std::int16_t> quantize(const ChannelMeta& meta,
                                   std::span<const double> physical) {
  const double scale = 1.0 / meta.lsb();
  std::vector<std::int16_t> out(physical.size());
  for (std::size_t i = 0; i < physical.size(); ++i) {
    const double v = physical[i];
    if (v < meta.physical_min - 0.5 * meta.lsb() ||
        v > meta.physical_max + 0.5 * meta.lsb()) {
      throw UnrepresentableValue("sample " + std::to_string(v) + " outside [" +
                                 std::to_string(meta.physical_min) + ", " +
                                 std::to_string(meta.physical_max) + "] on channel '" +
                                 meta.label + "'");
    }
    const long d = std::lround((v - meta.physical_min) * scale) + meta.digital_min;
    out[i] = static_cast<std::int16_t>(
        std::clamp<long>(d, meta.digital_min, meta.digital_max));
  }
  return out;
}

std::vector<std::byte> write_edf(const EdfRecording& rec) {
  const std::size_t ns = rec.channels.size();
  if (ns == 0) throw MalformedHeader("recording has no channels");

  // Resolve sample data: keep parsed digital, quantize physical otherwise.
  std::vector<const std::vector<std::int16_t>*> data(ns, nullptr);
  std::vector<std::vector<std::int16_t>> quantized(ns);
  for (std::size_t i = 0; i < ns; ++i) {
    if (i < rec.digital.size() && !rec.digital[i].empty()) {
      data[i] = &rec.digital[i];
    } else if (i < rec.physical_only.size() && !rec.physical_only[i].empty()) {
      quantized[i] = quantize(rec.channels[i], rec.physical_only[i]);
      data[i] = &quantized[i];
    } else if (rec.num_records == 0) {
      quantized[i] = {};
      data[i] = &quantized[i];
    } else {
      throw TruncatedData("channel '" + rec.channels[i].label + "' has no samples");
    }
    const std::size_t expected = static_cast<std::size_t>(rec.num_records) *
                                 rec.channels[i].samples_per_record;
    if (data[i]->size() != expected) {
      throw TruncatedData("channel '" + rec.channels[i].label + "' has " +
                          std::to_string(data[i]->size()) + " samples, expected " +
                          std::to_string(expected));
    }
  }

  const std::size_t header_size = 256 * (ns + 1);
  std::size_t record_samples = 0;
  for (const ChannelMeta& m : rec.channels) record_samples += m.samples_per_record;
  std::vector<std::byte> out(header_size +
                             2 * record_samples * static_cast<std::size_t>(rec.num_records));

  auto put = [&](std::size_t offset, const std::string& raw, std::size_t width,
                 const char* what) {
    if (raw.size() != width) {
      throw MalformedHeader(std::string("raw header field ") + what + " must be " +
                            std::to_string(width) + " bytes, got " +
                            std::to_string(raw.size()));
    }
    std::memcpy(out.data() + offset, raw.data(), width);
  };
  put(0, rec.raw_version, 8, "version");
  put(8, rec.raw_patient, 80, "patient");
  put(88, rec.raw_recording, 80, "recording");
  put(168, rec.raw_date, 8, "date");
  put(176, rec.raw_time, 8, "time");
  put(184, rec.raw_header_bytes, 8, "header bytes");
  put(192, rec.raw_reserved, 44, "reserved");
  put(236, rec.raw_num_records, 8, "record count");
  put(244, rec.raw_duration, 8, "record duration");
  put(252, rec.raw_num_signals, 4, "signal count");
  for (std::size_t i = 0; i < ns; ++i) {
    const ChannelMeta& m = rec.channels[i];
    put(256 + 16 * i, m.raw_label, 16, "label");
    put(256 + 16 * ns + 80 * i, m.raw_transducer, 80, "transducer");
    put(256 + 96 * ns + 8 * i, m.raw_dimension, 8, "dimension");
    put(256 + 104 * ns + 8 * i, m.raw_physical_min, 8, "physical min");
    put(256 + 112 * ns + 8 * i, m.raw_physical_max, 8, "physical max");
    put(256 + 120 * ns + 8 * i, m.raw_digital_min, 8, "digital min");
    put(256 + 128 * ns + 8 * i, m.raw_digital_max, 8, "digital max");
    put(256 + 136 * ns + 80 * i, m.raw_prefiltering, 80, "prefiltering");
    put(256 + 216 * ns + 8 * i, m.raw_samples_per_record, 8, "samples per record");
    put(256 + 224 * ns + 32 * i, m.raw_reserved, 32, "signal reserved");
  }

  std::byte* p = out.data() + header_size;
  for (int r = 0; r < rec.num_records; ++r) {
    for (std::size_t i = 0; i < ns; ++i) {
      const std::size_t n = rec.channels[i].samples_per_record;
      const std::int16_t* src = data[i]->data() + static_cast<std::size_t>(r) * n;
      for (std::size_t s = 0; s < n; ++s) {
        const auto u = static_cast<std::uint16_t>(src[s]);
        p[0] = static_cast<std::byte>(u & 0xff);
        p[1] = static_cast<std::byte>((u >> 8) & 0xff);
        p += 2;
      }
    }
  }
  return out;
}

void write_edf_file(const EdfRecording& rec, const std::filesystem::path& path) {
  const std::vector<std::byte> bytes = write_edf(rec);
  std::ofstream outf(path, std::ios::binary | std::ios::trunc);
  if (!outf) throw DataError("cannot write EDF file " + path.string());
  outf.write(reinterpret_cast<const char*>(bytes.data()),
             static_cast<std::streamsize>(bytes.size()));
}

ChannelMeta make_channel(std::string label, std::string dimension,
                         double physical_min, double physical_max,
                         int digital_min, int digital_max, int samples_per_record) {
  ChannelMeta m;
  m.label = label;
  m.physical_dimension = dimension;
  m.physical_min = physical_min;
  m.physical_max = physical_max;
  m.digital_min = digital_min;
  m.digital_max = digital_max;
  m.samples_per_record = samples_per_record;
  m.raw_label = detail::fixed_field(label, 16);
  m.raw_transducer = detail::fixed_field("", 80);
  m.raw_dimension = detail::fixed_field(dimension, 8);
  m.raw_physical_min = detail::format_edf_number(physical_min, 8);
  m.raw_physical_max = detail::format_edf_number(physical_max, 8);
  m.raw_digital_min = detail::format_edf_number(digital_min, 8);
  m.raw_digital_max = detail::format_edf_number(digital_max, 8);
  m.raw_prefiltering = detail::fixed_field("", 80);
  m.raw_samples_per_record = detail::format_edf_number(samples_per_record, 8);
  m.raw_reserved = detail::fixed_field("", 32);
  return m;
}

EdfRecording make_recording(std::string patient_id, std::string recording_id,
                            std::string start_date, std::string start_time,
                            double record_duration,
                            std::vector<ChannelMeta> channels) {
  EdfRecording rec;
  rec.patient_id = patient_id;
  rec.recording_id = recording_id;
  rec.start_date = start_date;
  rec.start_time = start_time;
  rec.record_duration = record_duration;
  rec.channels = std::move(channels);
  rec.digital.resize(rec.channels.size());
  rec.physical_only.resize(rec.channels.size());

  rec.raw_version = detail::fixed_field("0", 8);
  rec.raw_patient = detail::fixed_field(patient_id, 80);
  rec.raw_recording = detail::fixed_field(recording_id, 80);
  rec.raw_date = detail::fixed_field(start_date, 8);
  rec.raw_time = detail::fixed_field(start_time, 8);
  rec.raw_header_bytes =
      detail::format_edf_number(256.0 * (rec.channels.size() + 1), 8);
  rec.raw_reserved = detail::fixed_field("", 44);
  rec.raw_num_records = detail::format_edf_number(0, 8);
  rec.raw_duration = detail::format_edf_number(record_duration, 8);
  rec.raw_num_signals = detail::fixed_field(std::to_string(rec.channels.size()), 4);
  return rec;
}

void set_record_count(EdfRecording& rec, int num_records) {
  rec.num_records = num_records;
  rec.raw_num_records = detail::format_edf_number(num_records, 8);
}

}  // namespace sleepdyn
