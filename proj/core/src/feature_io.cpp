#include "sleepdyn/feature_io.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

namespace sleepdyn {

std::uint64_t fnv1a_hash(std::span<const std::byte> bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (const std::byte b : bytes) {
    h ^= std::to_integer<std::uint8_t>(b);
    h *= 1099511628211ull;
  }
  return h;
}

std::uint64_t fnv1a_hash(std::string_view text) {
  return fnv1a_hash(std::as_bytes(std::span<const char>(text.data(), text.size())));
}

std::uint64_t hash_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string() + " for hashing");
  std::uint64_t h = 1469598103934665603ull;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof(buf));
    const std::streamsize got = in.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      h ^= static_cast<std::uint8_t>(buf[i]);
      h *= 1099511628211ull;
    }
  }
  return h;
}

namespace {

class HashingWriter {
 public:
  explicit HashingWriter(const std::filesystem::path& path)
      : out_(path, std::ios::binary | std::ios::trunc), path_(path) {
    if (!out_) throw DataError("cannot write " + path.string());
  }

  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      hash_ ^= static_cast<std::uint8_t>(p[i]);
      hash_ *= 1099511628211ull;
    }
    out_.write(p, static_cast<std::streamsize>(n));
  }

  template <typename T>
  void pod(const T& v) {
    bytes(&v, sizeof(T));
  }

  void string16(const std::string& s) {
    if (s.size() > 0xffff) throw DataError("identifier longer than 65535 bytes");
    const auto len = static_cast<std::uint16_t>(s.size());
    pod(len);
    bytes(s.data(), s.size());
  }

  void finish() {
    const std::uint64_t h = hash_;
    out_.write(reinterpret_cast<const char*>(&h), sizeof(h));
    out_.flush();
    if (!out_) throw DataError("short write to " + path_.string());
  }

 private:
  std::ofstream out_;
  std::filesystem::path path_;
  std::uint64_t hash_ = 1469598103934665603ull;
};

class HashingReader {
 public:
  explicit HashingReader(const std::filesystem::path& path) : path_(path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    buf_.assign((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (buf_.size() < 8) throw CacheCorrupt("file too short: " + path.string());
    std::uint64_t stored = 0;
    std::memcpy(&stored, buf_.data() + buf_.size() - 8, 8);
    std::uint64_t h = 1469598103934665603ull;
    for (std::size_t i = 0; i + 8 < buf_.size(); ++i) {
      h ^= static_cast<std::uint8_t>(buf_[i]);
      h *= 1099511628211ull;
    }
    if (h != stored) {
      throw CacheCorrupt("checksum mismatch in " + path.string());
    }
    end_ = buf_.size() - 8;
  }

  void bytes(void* data, std::size_t n) {
    if (pos_ + n > end_) throw CacheCorrupt("truncated record in " + path_.string());
    std::memcpy(data, buf_.data() + pos_, n);
    pos_ += n;
  }

  template <typename T>
  T pod() {
    T v{};
    bytes(&v, sizeof(T));
    return v;
  }

  std::string string16() {
    const auto len = pod<std::uint16_t>();
    std::string s(len, '\0');
    bytes(s.data(), len);
    return s;
  }

  bool at_end() const { return pos_ == end_; }

 private:
  std::filesystem::path path_;
  std::vector<char> buf_;
  std::size_t pos_ = 0;
  std::size_t end_ = 0;
};

constexpr std::uint32_t kTableVersion = 1;

}  // namespace

void save_feature_table(const FeatureTable& table, const std::filesystem::path& path) {
  if (static_cast<Eigen::Index>(table.epochs.size()) != table.values.rows()) {
    throw SizeMismatch("feature table rows do not match the epoch metadata");
  }
  HashingWriter w(path);
  w.bytes("SDFT", 4);
  w.pod(kTableVersion);
  const std::string header = table.header.dump();
  w.pod<std::uint64_t>(header.size());
  w.bytes(header.data(), header.size());
  w.pod<std::uint64_t>(table.epochs.size());
  w.pod<std::uint64_t>(static_cast<std::uint64_t>(table.values.cols()));
  std::vector<double> row(static_cast<std::size_t>(table.values.cols()));
  for (std::size_t r = 0; r < table.epochs.size(); ++r) {
    const EpochRef& e = table.epochs[r];
    w.string16(e.subject_id);
    w.string16(e.recording_id);
    w.pod<std::uint64_t>(e.epoch_index);
    w.pod<std::uint8_t>(static_cast<std::uint8_t>(e.stage));
    for (Eigen::Index c = 0; c < table.values.cols(); ++c) {
      row[static_cast<std::size_t>(c)] = table.values(static_cast<Eigen::Index>(r), c);
    }
    w.bytes(row.data(), row.size() * sizeof(double));
  }
  w.finish();
}

FeatureTable load_feature_table(const std::filesystem::path& path) {
  HashingReader r(path);
  char magic[4];
  r.bytes(magic, 4);
  if (std::string_view(magic, 4) != "SDFT") {
    throw CacheCorrupt("bad feature table magic in " + path.string());
  }
  if (r.pod<std::uint32_t>() != kTableVersion) {
    throw CacheCorrupt("unsupported feature table version in " + path.string());
  }
  const auto header_len = r.pod<std::uint64_t>();
  std::string header(header_len, '\0');
  r.bytes(header.data(), header.size());

  FeatureTable table;
  table.header = nlohmann::json::parse(header, nullptr, false);
  if (table.header.is_discarded()) {
    throw CacheCorrupt("bad feature table header JSON in " + path.string());
  }
  const auto rows = r.pod<std::uint64_t>();
  const auto dim = r.pod<std::uint64_t>();
  table.epochs.resize(rows);
  table.values.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(dim));
  std::vector<double> row(dim);
  for (std::uint64_t i = 0; i < rows; ++i) {
    EpochRef& e = table.epochs[i];
    e.subject_id = r.string16();
    e.recording_id = r.string16();
    e.epoch_index = r.pod<std::uint64_t>();
    const auto stage = r.pod<std::uint8_t>();
    if (stage > static_cast<std::uint8_t>(SleepStage::Excluded)) {
      throw CacheCorrupt("bad stage byte in " + path.string());
    }
    e.stage = static_cast<SleepStage>(stage);
    r.bytes(row.data(), row.size() * sizeof(double));
    for (std::uint64_t c = 0; c < dim; ++c) {
      table.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) =
          row[c];
    }
  }
  return table;
}

void export_feature_csv(const FeatureTable& table, const std::filesystem::path& path,
                        std::span<const std::string> value_columns) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << "subject_id,recording_id,epoch_index,stage";
  for (Eigen::Index c = 0; c < table.values.cols(); ++c) {
    if (static_cast<std::size_t>(c) < value_columns.size()) {
      out << ',' << value_columns[static_cast<std::size_t>(c)];
    } else {
      out << ",v" << c;
    }
  }
  out << '\n';
  std::ostringstream line;
  line.precision(17);
  for (std::size_t r = 0; r < table.epochs.size(); ++r) {
    const EpochRef& e = table.epochs[r];
    line.str("");
    line << e.subject_id << ',' << e.recording_id << ',' << e.epoch_index << ','
         << to_string(e.stage);
    for (Eigen::Index c = 0; c < table.values.cols(); ++c) {
      line << ',' << table.values(static_cast<Eigen::Index>(r), c);
    }
    out << line.str() << '\n';
  }
}

EpochRef EpochWindowStore::ref(std::size_t epoch) const {
  const Epoch& e = epochs.at(epoch);
  const Recording& rec = recordings.at(e.recording);
  return EpochRef{rec.subject_id, rec.recording_id, e.epoch_index, e.stage};
}

std::vector<double> EpochWindowStore::window(std::size_t epoch,
                                             std::size_t channel) const {
  const Epoch& e = epochs.at(epoch);
  const Recording& rec = recordings.at(e.recording);
  const auto& cal = rec.calibration.at(channel);
  const double scale = (cal[1] - cal[0]) / (cal[3] - cal[2]);
  const std::vector<std::int16_t>& d = e.digital.at(channel);
  std::vector<double> out(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    out[i] = cal[0] + (static_cast<double>(d[i]) - cal[2]) * scale;
  }
  return out;
}

void save_epoch_store(const EpochWindowStore& store, const std::filesystem::path& path) {
  nlohmann::json header;
  header["channels"] = store.channel_names;
  header["sampling_rate"] = store.sampling_rate;
  header["window_samples"] = store.window_samples;
  nlohmann::json recs = nlohmann::json::array();
  for (const auto& rec : store.recordings) {
    recs.push_back({{"subject", rec.subject_id},
                    {"recording", rec.recording_id},
                    {"calibration", rec.calibration}});
  }
  header["recordings"] = recs;

  HashingWriter w(path);
  w.bytes("SDEP", 4);
  w.pod(kTableVersion);
  const std::string header_str = header.dump();
  w.pod<std::uint64_t>(header_str.size());
  w.bytes(header_str.data(), header_str.size());
  w.pod<std::uint64_t>(store.epochs.size());
  for (const auto& e : store.epochs) {
    w.pod<std::uint32_t>(e.recording);
    w.pod<std::uint64_t>(e.epoch_index);
    w.pod<std::uint8_t>(static_cast<std::uint8_t>(e.stage));
    for (const auto& ch : e.digital) {
      if (ch.size() != store.window_samples) {
        throw SizeMismatch("epoch window length differs from the store header");
      }
      w.bytes(ch.data(), ch.size() * sizeof(std::int16_t));
    }
  }
  w.finish();
}

EpochWindowStore load_epoch_store(const std::filesystem::path& path) {
  HashingReader r(path);
  char magic[4];
  r.bytes(magic, 4);
  if (std::string_view(magic, 4) != "SDEP") {
    throw CacheCorrupt("bad epoch store magic in " + path.string());
  }
  if (r.pod<std::uint32_t>() != kTableVersion) {
    throw CacheCorrupt("unsupported epoch store version in " + path.string());
  }
  const auto header_len = r.pod<std::uint64_t>();
  std::string header_str(header_len, '\0');
  r.bytes(header_str.data(), header_str.size());
  const nlohmann::json header = nlohmann::json::parse(header_str, nullptr, false);
  if (header.is_discarded()) {
    throw CacheCorrupt("bad epoch store header JSON in " + path.string());
  }

  EpochWindowStore store;
  store.channel_names = header.at("channels").get<std::vector<std::string>>();
  store.sampling_rate = header.at("sampling_rate").get<double>();
  store.window_samples = header.at("window_samples").get<std::size_t>();
  for (const auto& rec : header.at("recordings")) {
    EpochWindowStore::Recording entry;
    entry.subject_id = rec.at("subject").get<std::string>();
    entry.recording_id = rec.at("recording").get<std::string>();
    entry.calibration = rec.at("calibration").get<std::vector<std::array<double, 4>>>();
    store.recordings.push_back(std::move(entry));
  }

  const auto epochs = r.pod<std::uint64_t>();
  store.epochs.resize(epochs);
  for (std::uint64_t i = 0; i < epochs; ++i) {
    auto& e = store.epochs[i];
    e.recording = r.pod<std::uint32_t>();
    e.epoch_index = r.pod<std::uint64_t>();
    const auto stage = r.pod<std::uint8_t>();
    if (stage > static_cast<std::uint8_t>(SleepStage::Excluded) ||
        e.recording >= store.recordings.size()) {
      throw CacheCorrupt("bad epoch record in " + path.string());
    }
    e.stage = static_cast<SleepStage>(stage);
    e.digital.resize(store.channel_names.size());
    for (auto& ch : e.digital) {
      ch.resize(store.window_samples);
      r.bytes(ch.data(), ch.size() * sizeof(std::int16_t));
    }
  }
  return store;
}

}  // namespace sleepdyn
