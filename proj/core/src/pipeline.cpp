#include "sleepdyn/pipeline.hpp"

#include <sys/resource.h>
#include <unistd.h>

#include <algorithm>
#include <cctype>
#include <chrono>
#include <fstream>
#include <limits>
#include <optional>
#include <set>
#include <sstream>

#include "fft.hpp"

#include "sleepdyn/diffusion.hpp"
#include "sleepdyn/epochs.hpp"
#include "sleepdyn/evaluation.hpp"
#include "sleepdyn/feature_io.hpp"
#include "sleepdyn/hypnogram.hpp"
#include "sleepdyn/parallel.hpp"
#include "sleepdyn/scattering.hpp"
#include "sleepdyn/stats.hpp"
#include "sleepdyn/svm.hpp"

namespace sleepdyn {

namespace {

using nlohmann::json;

// ---------------------------------------------------------------- config --

template <typename T>
void maybe_get(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

PipelineConfig PipelineConfig::from_json(const json& j) {
  PipelineConfig c;
  if (j.contains("dataset_root")) c.dataset_root = j.at("dataset_root").get<std::string>();
  if (j.contains("cache_dir")) c.cache_dir = j.at("cache_dir").get<std::string>();
  if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();
  maybe_get(j, "channels", c.channels);
  maybe_get(j, "truncation_minutes", c.truncation_minutes);
  maybe_get(j, "truncation_overrides", c.truncation_overrides);
  maybe_get(j, "fusion", c.fusion);
  maybe_get(j, "export_dims", c.export_dims);
  maybe_get(j, "threads", c.threads);
  if (j.contains("scattering")) {
    const json& s = j.at("scattering");
    maybe_get(s, "q", c.scattering.q);
    maybe_get(s, "h", c.scattering.h);
    maybe_get(s, "include_lowfreq_paths", c.scattering.include_lowfreq_paths);
  }
  if (j.contains("diffusion")) {
    const json& d = j.at("diffusion");
    maybe_get(d, "t", c.diffusion.t);
    maybe_get(d, "d_hat", c.diffusion.d_hat);
    maybe_get(d, "d_tilde", c.diffusion.d_tilde);
    maybe_get(d, "percentile", c.diffusion.percentile);
    maybe_get(d, "dense_threshold", c.diffusion.dense_threshold);
    maybe_get(d, "knn_threshold", c.diffusion.knn_threshold);
    maybe_get(d, "knn", c.diffusion.knn);
    maybe_get(d, "multiview_input", c.diffusion.multiview_input);
    maybe_get(d, "dim_policy", c.diffusion.dim_policy);
  }
  if (j.contains("svm")) {
    const json& s = j.at("svm");
    maybe_get(s, "c", c.svm.c);
    maybe_get(s, "sigma", c.svm.sigma);
    maybe_get(s, "tol", c.svm.tol);
  }
  if (j.contains("evaluation")) {
    const json& e = j.at("evaluation");
    maybe_get(e, "class_balanced", c.evaluation.class_balanced);
    maybe_get(e, "seed", c.evaluation.seed);
    maybe_get(e, "ablation", c.evaluation.ablation);
    maybe_get(e, "strict_inductive", c.evaluation.strict_inductive);
  }
  return c;
}

PipelineConfig PipelineConfig::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigInvalid("cannot open config file " + path.string());
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ConfigInvalid("config file is not valid JSON: " + path.string());
  return from_json(j);
}

json PipelineConfig::to_json() const {
  json j;
  j["dataset_root"] = dataset_root.string();
  j["cache_dir"] = cache_dir.string();
  j["output_dir"] = output_dir.string();
  j["channels"] = channels;
  j["truncation_minutes"] = truncation_minutes;
  j["truncation_overrides"] = truncation_overrides;
  j["fusion"] = fusion;
  j["export_dims"] = export_dims;
  j["threads"] = threads;
  j["scattering"] = {{"q", scattering.q},
                     {"h", scattering.h},
                     {"include_lowfreq_paths", scattering.include_lowfreq_paths}};
  j["diffusion"] = {{"t", diffusion.t},
                    {"d_hat", diffusion.d_hat},
                    {"d_tilde", diffusion.d_tilde},
                    {"percentile", diffusion.percentile},
                    {"dense_threshold", diffusion.dense_threshold},
                    {"knn_threshold", diffusion.knn_threshold},
                    {"knn", diffusion.knn},
                    {"multiview_input", diffusion.multiview_input},
                    {"dim_policy", diffusion.dim_policy}};
  j["svm"] = {{"c", svm.c}, {"sigma", svm.sigma}, {"tol", svm.tol}};
  j["evaluation"] = {{"class_balanced", evaluation.class_balanced},
                     {"seed", evaluation.seed},
                     {"ablation", evaluation.ablation},
                     {"strict_inductive", evaluation.strict_inductive}};
  return j;
}

void PipelineConfig::apply_override(const std::string& key_value) {
  const std::size_t eq = key_value.find('=');
  if (eq == std::string::npos) {
    throw ConfigInvalid("override must be KEY=VALUE, got '" + key_value + "'");
  }
  const std::string key = key_value.substr(0, eq);
  const std::string value = key_value.substr(eq + 1);

  json j = to_json();
  json* node = &j;
  std::istringstream parts(key);
  std::string part;
  std::vector<std::string> path;
  while (std::getline(parts, part, '.')) path.push_back(part);
  if (path.empty()) throw ConfigInvalid("empty override key");
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    if (!node->contains(path[i])) throw ConfigInvalid("unknown config key '" + key + "'");
    node = &(*node)[path[i]];
  }
  const std::string leaf = path.back();
  if (!node->contains(leaf)) throw ConfigInvalid("unknown config key '" + key + "'");

  json parsed = json::parse(value, nullptr, false);
  if (parsed.is_discarded()) parsed = value;  // plain strings need no quotes
  (*node)[leaf] = parsed;
  *this = from_json(j);
}

void PipelineConfig::validate() const {
  if (channels.empty() || channels.size() > 2) {
    throw ConfigInvalid("exactly 1 or 2 channels must be configured");
  }
  if ((fusion == "multiview" || fusion == "concat") && channels.size() != 2) {
    throw ConfigInvalid(fusion + " fusion requires 2 channels");
  }
  if (fusion != "single" && fusion != "concat" && fusion != "multiview") {
    throw ConfigInvalid("fusion must be single, concat or multiview");
  }
  if (truncation_minutes < 0) throw ConfigInvalid("truncation_minutes must be >= 0");
  if (scattering.q < 1 || scattering.h < 1) {
    throw ConfigInvalid("scattering needs q >= 1 and h >= 1");
  }
  if (!(diffusion.t > 0.0)) throw ConfigInvalid("diffusion.t must be positive");
  if (diffusion.d_hat < 1 || diffusion.d_tilde < 1) {
    throw ConfigInvalid("diffusion dimensions must be >= 1");
  }
  if (!(diffusion.percentile > 0.0 && diffusion.percentile <= 1.0)) {
    throw ConfigInvalid("diffusion.percentile must lie in (0, 1]");
  }
  if (diffusion.multiview_input != "dm_coords" &&
      diffusion.multiview_input != "raw_features") {
    throw ConfigInvalid("diffusion.multiview_input must be dm_coords or raw_features");
  }
  if (diffusion.dim_policy != "fixed" && diffusion.dim_policy != "spectral_gap") {
    throw ConfigInvalid("diffusion.dim_policy must be fixed or spectral_gap");
  }
  if (!(svm.c > 0.0)) throw ConfigInvalid("svm.c must be positive");
  if (!(svm.tol > 0.0)) throw ConfigInvalid("svm.tol must be positive");
  if (dataset_root.empty()) throw ConfigInvalid("dataset_root is required");
  if (cache_dir.empty()) throw ConfigInvalid("cache_dir is required");
  for (int d : export_dims) {
    if (d < 2) throw ConfigInvalid("export dims are eigenvector indices starting at 2");
  }
}

Stage stage_from_name(const std::string& name) {
  if (name == "ingest") return Stage::Ingest;
  if (name == "features") return Stage::Features;
  if (name == "embed") return Stage::Embed;
  if (name == "fuse") return Stage::Fuse;
  if (name == "train-eval") return Stage::TrainEval;
  if (name == "export") return Stage::Export;
  if (name == "report") return Stage::Report;
  throw ConfigInvalid("unknown stage '" + name + "'");
}

std::string stage_name(Stage stage) {
  switch (stage) {
    case Stage::Ingest: return "ingest";
    case Stage::Features: return "features";
    case Stage::Embed: return "embed";
    case Stage::Fuse: return "fuse";
    case Stage::TrainEval: return "train-eval";
    case Stage::Export: return "export";
    case Stage::Report: return "report";
  }
  throw ConfigInvalid("unknown stage");
}

namespace {

// ------------------------------------------------------------- plumbing --

class CacheLock {
 public:
  explicit CacheLock(const std::filesystem::path& dir) : path_(dir / ".sleepdyn.lock") {
    std::filesystem::create_directories(dir);
    for (int attempt = 0; attempt < 2; ++attempt) {
      std::ofstream probe(path_, std::ios::out | std::ios::app);
      std::ifstream existing(path_);
      long pid = 0;
      if (existing >> pid && pid > 0 && pid != getpid() &&
          std::filesystem::exists("/proc/" + std::to_string(pid))) {
        throw DataError("cache directory " + dir.string() +
                        " is locked by running process " + std::to_string(pid));
      }
      std::ofstream out(path_, std::ios::trunc);
      out << getpid() << '\n';
      if (out) return;
    }
    throw DataError("cannot create lock file in " + dir.string());
  }
  ~CacheLock() {
    std::error_code ec;
    std::filesystem::remove(path_, ec);
  }

 private:
  std::filesystem::path path_;
};

long peak_rss_kb() {
  rusage usage{};
  getrusage(RUSAGE_SELF, &usage);
  return usage.ru_maxrss;
}

std::string sanitize(const std::string& name) {
  std::string out;
  for (const char c : name) {
    out.push_back(std::isalnum(static_cast<unsigned char>(c)) ? static_cast<char>(
                      std::tolower(static_cast<unsigned char>(c)))
                                                              : '_');
  }
  return out;
}

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

struct DatasetEntry {
  std::filesystem::path psg;
  std::filesystem::path hypnogram;
  std::string subject_id;
  std::string recording_id;
};

std::vector<DatasetEntry> dataset_entries(const PipelineConfig& config) {
  const std::filesystem::path root = config.dataset_root;
  if (!std::filesystem::exists(root)) {
    throw DataError("dataset root " + root.string() + " does not exist");
  }
  std::vector<DatasetEntry> entries;
  const std::filesystem::path manifest = root / "manifest.json";
  if (std::filesystem::exists(manifest)) {
    std::ifstream in(manifest);
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw DataError("manifest.json is not valid JSON");
    for (const auto& rec : j.at("recordings")) {
      DatasetEntry e;
      e.psg = root / rec.at("psg").get<std::string>();
      e.hypnogram = root / rec.at("hypnogram").get<std::string>();
      e.subject_id = rec.at("subject").get<std::string>();
      e.recording_id = rec.at("recording").get<std::string>();
      entries.push_back(std::move(e));
    }
  } else {
    // Sleep-EDF layout: <stem>-PSG.edf plus <prefix>-Hypnogram.{edf,txt};
    // the subject is the first five characters of the stem, and the
    // hypnogram prefix may differ from the PSG stem in its last character
    // (scorer letter), so match on the leading seven characters.
    for (const auto& entry : std::filesystem::directory_iterator(root)) {
      const std::string name = entry.path().filename().string();
      const std::size_t tag = name.find("-PSG.edf");
      if (tag == std::string::npos) continue;
      DatasetEntry e;
      e.psg = entry.path();
      const std::string stem = name.substr(0, tag);
      e.recording_id = stem;
      e.subject_id = stem.substr(0, std::min<std::size_t>(5, stem.size()));
      const std::string key = stem.substr(0, std::min<std::size_t>(7, stem.size()));
      for (const auto& hyp : std::filesystem::directory_iterator(root)) {
        const std::string hname = hyp.path().filename().string();
        if (hname.find("-Hypnogram") == std::string::npos) continue;
        if (hname.rfind(key, 0) == 0) {
          e.hypnogram = hyp.path();
          break;
        }
      }
      if (e.hypnogram.empty()) {
        throw DataError("no hypnogram found for " + e.psg.string());
      }
      entries.push_back(std::move(e));
    }
    std::sort(entries.begin(), entries.end(),
              [](const DatasetEntry& a, const DatasetEntry& b) {
                return a.recording_id < b.recording_id;
              });
    if (entries.empty()) {
      throw DataError("dataset root has neither manifest.json nor *-PSG.edf files");
    }
  }
  return entries;
}

std::uint64_t dataset_fingerprint(const PipelineConfig& config) {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](std::uint64_t v) {
    h ^= v;
    h *= 1099511628211ull;
  };
  for (const DatasetEntry& e : dataset_entries(config)) {
    mix(fnv1a_hash(e.recording_id));
    mix(fnv1a_hash(e.subject_id));
    mix(hash_file(e.psg));
    mix(hash_file(e.hypnogram));
  }
  return h;
}

// Config subset whose change must invalidate the given stage.
json stage_config_subset(Stage stage, const PipelineConfig& c) {
  switch (stage) {
    case Stage::Ingest:
      return {{"channels", c.channels},
              {"truncation_minutes", c.truncation_minutes},
              {"truncation_overrides", c.truncation_overrides}};
    case Stage::Features:
      return {{"q", c.scattering.q},
              {"h", c.scattering.h},
              {"include_lowfreq_paths", c.scattering.include_lowfreq_paths}};
    case Stage::Embed:
      return {{"t", c.diffusion.t},
              {"d_hat", c.diffusion.d_hat},
              {"percentile", c.diffusion.percentile},
              {"dense_threshold", c.diffusion.dense_threshold},
              {"knn_threshold", c.diffusion.knn_threshold},
              {"knn", c.diffusion.knn},
              {"dim_policy", c.diffusion.dim_policy}};
    case Stage::Fuse:
      return {{"fusion", c.fusion},
              {"t", c.diffusion.t},
              {"d_tilde", c.diffusion.d_tilde},
              {"percentile", c.diffusion.percentile},
              {"dense_threshold", c.diffusion.dense_threshold},
              {"knn_threshold", c.diffusion.knn_threshold},
              {"knn", c.diffusion.knn},
              {"multiview_input", c.diffusion.multiview_input},
              {"ablation", c.evaluation.ablation && c.channels.size() == 2}};
    case Stage::TrainEval:
      return {{"svm_c", c.svm.c},
              {"svm_sigma", c.svm.sigma},
              {"svm_tol", c.svm.tol},
              {"class_balanced", c.evaluation.class_balanced},
              {"seed", c.evaluation.seed},
              {"ablation", c.evaluation.ablation && c.channels.size() == 2},
              {"strict_inductive", c.evaluation.strict_inductive},
              {"fusion", c.fusion}};
    case Stage::Export:
      return {{"export_dims", c.export_dims}, {"fusion", c.fusion}};
    case Stage::Report:
      return json::object();
  }
  return json::object();
}

std::filesystem::path stamp_path(const PipelineConfig& c, Stage stage) {
  return c.cache_dir / (stage_name(stage) + ".stamp.json");
}

std::optional<Stage> upstream_of(Stage stage) {
  switch (stage) {
    case Stage::Ingest: return std::nullopt;
    case Stage::Features: return Stage::Ingest;
    case Stage::Embed: return Stage::Features;
    case Stage::Fuse: return Stage::Embed;
    case Stage::TrainEval: return Stage::Fuse;
    // Export needs only the fused embedding; train-eval output is optional
    // (it adds the hypnogram CSV) and is mixed into the state hash below.
    case Stage::Export: return Stage::Fuse;
    case Stage::Report: return Stage::TrainEval;
  }
  return std::nullopt;
}

json load_stamp(const PipelineConfig& c, Stage stage) {
  const std::filesystem::path path = stamp_path(c, stage);
  if (!std::filesystem::exists(path)) return json();
  std::ifstream in(path);
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) return json();
  return j;
}

// The stage's effective state: its config subset chained to the upstream
// state, plus the dataset fingerprint at the root.
std::string desired_state_hash(const PipelineConfig& c, Stage stage) {
  std::string upstream;
  if (const auto up = upstream_of(stage)) {
    const json stamp = load_stamp(c, *up);
    if (stamp.is_null()) {
      throw MissingUpstream("stage '" + stage_name(stage) + "' needs '" +
                            stage_name(*up) + "' to run first");
    }
    if (stamp.value("state_hash", "") != desired_state_hash(c, *up)) {
      throw MissingUpstream("stage '" + stage_name(*up) +
                            "' cache is stale; rerun it first");
    }
    upstream = stamp.value("state_hash", "");
  } else {
    upstream = hash_hex(dataset_fingerprint(c));
  }
  std::string extra;
  if (stage == Stage::Export) {
    const json eval_stamp = load_stamp(c, Stage::TrainEval);
    extra = eval_stamp.is_null() ? "|no-eval"
                                 : "|" + eval_stamp.value("state_hash", "");
  }
  const std::string subset = stage_config_subset(stage, c).dump();
  return hash_hex(fnv1a_hash(subset + "|" + upstream + extra));
}

bool cache_hit(const PipelineConfig& c, Stage stage, const std::string& desired) {
  const json stamp = load_stamp(c, stage);
  if (stamp.is_null() || stamp.value("state_hash", "") != desired) return false;
  if (!stamp.contains("artifacts")) return false;
  const std::string cache_prefix = c.cache_dir.string();
  for (const auto& [file, expected] : stamp.at("artifacts").items()) {
    const std::filesystem::path path(file);
    if (!std::filesystem::exists(path)) return false;
    if (hash_hex(hash_file(path)) != expected.get<std::string>()) {
      // Artifacts inside the cache are never silently reused; outputs under
      // output_dir are simply regenerated.
      if (file.rfind(cache_prefix, 0) == 0) {
        throw CacheCorrupt("cache artifact " + file +
                           " does not match its stamp; delete the cache directory");
      }
      return false;
    }
  }
  return true;
}

void write_stamp(const PipelineConfig& c, Stage stage, const std::string& state,
                 const std::vector<std::filesystem::path>& artifacts,
                 double wall_seconds) {
  json stamp;
  stamp["stage"] = stage_name(stage);
  stamp["state_hash"] = state;
  stamp["config"] = stage_config_subset(stage, c);
  json files = json::object();
  for (const auto& path : artifacts) {
    files[path.string()] = hash_hex(hash_file(path));
  }
  stamp["artifacts"] = files;
  stamp["wall_seconds"] = wall_seconds;
  stamp["peak_rss_kb"] = peak_rss_kb();
  std::ofstream out(stamp_path(c, stage), std::ios::trunc);
  out << stamp.dump(2) << '\n';
}

// ---------------------------------------------------------------- stages --

std::filesystem::path epochs_path(const PipelineConfig& c) {
  return c.cache_dir / "epochs.bin";
}
std::filesystem::path features_path(const PipelineConfig& c, std::size_t ch) {
  return c.cache_dir / ("features_ch" + std::to_string(ch) + ".bin");
}
std::filesystem::path embed_path(const PipelineConfig& c, std::size_t ch) {
  return c.cache_dir / ("embed_ch" + std::to_string(ch) + ".bin");
}
std::filesystem::path fused_path(const PipelineConfig& c, const std::string& mode) {
  return c.cache_dir / ("fused_" + sanitize(mode) + ".bin");
}
std::filesystem::path eval_path(const PipelineConfig& c) {
  return c.cache_dir / "eval.json";
}

std::vector<std::filesystem::path> run_ingest(const PipelineConfig& config) {
  const std::vector<DatasetEntry> entries = dataset_entries(config);
  EpochWindowStore store;
  store.channel_names = config.channels;

  std::vector<EpochWindowStore::Recording> recordings(entries.size());
  std::vector<std::vector<EpochWindowStore::Epoch>> per_recording(entries.size());
  std::vector<double> rates(entries.size(), 0.0);
  std::vector<std::size_t> window_sizes(entries.size(), 0);

  parallel_for(entries.size(), config.threads, [&](std::size_t i) {
    const DatasetEntry& entry = entries[i];
    const EdfRecording rec = parse_edf_file(entry.psg);

    std::vector<StageInterval> intervals;
    if (entry.hypnogram.extension() == ".txt") {
      std::ifstream in(entry.hypnogram);
      if (!in) throw DataError("cannot open hypnogram " + entry.hypnogram.string());
      std::stringstream buf;
      buf << in.rdbuf();
      intervals = parse_hypnogram_text(buf.str());
    } else {
      intervals = parse_hypnogram_edf(parse_edf_file(entry.hypnogram));
    }
    std::vector<SleepStage> slots = stage_slots(intervals);
    // Hypnograms may annotate slightly past the signal; clip to the signal.
    const auto max_slots = static_cast<std::size_t>(rec.duration_seconds() / 30.0);
    if (slots.size() > max_slots) slots.resize(max_slots);

    int margin = config.truncation_minutes;
    if (const auto it = config.truncation_overrides.find(entry.recording_id);
        it != config.truncation_overrides.end()) {
      margin = it->second;
    }
    const EpochRange retained = truncate_wake(slots, margin);
    const DigitalEpochs windows =
        extract_epoch_windows(rec, slots, retained, config.channels);
    if (windows.sampling_rate != 100.0) {
      throw UnsupportedSamplingRate("recording " + entry.recording_id + " runs at " +
                                    std::to_string(windows.sampling_rate) +
                                    " Hz; only 100 Hz is supported");
    }

    EpochWindowStore::Recording meta;
    meta.subject_id = entry.subject_id;
    meta.recording_id = entry.recording_id;
    for (const int ch : windows.channel_indices) {
      const ChannelMeta& m = rec.channels[static_cast<std::size_t>(ch)];
      meta.calibration.push_back({m.physical_min, m.physical_max,
                                  static_cast<double>(m.digital_min),
                                  static_cast<double>(m.digital_max)});
    }
    recordings[i] = std::move(meta);
    rates[i] = windows.sampling_rate;
    window_sizes[i] = windows.window_samples;

    std::vector<EpochWindowStore::Epoch> eps;
    eps.reserve(windows.slot_indices.size());
    for (std::size_t e = 0; e < windows.slot_indices.size(); ++e) {
      EpochWindowStore::Epoch ep;
      ep.recording = static_cast<std::uint32_t>(i);
      ep.epoch_index = windows.slot_indices[e];
      ep.stage = slots[windows.slot_indices[e]];
      ep.digital = windows.windows[e];
      eps.push_back(std::move(ep));
    }
    per_recording[i] = std::move(eps);
  });

  store.recordings = std::move(recordings);
  store.sampling_rate = rates.at(0);
  store.window_samples = window_sizes.at(0);
  for (std::size_t i = 0; i < per_recording.size(); ++i) {
    if (rates[i] != store.sampling_rate || window_sizes[i] != store.window_samples) {
      throw UnsupportedSamplingRate("recordings disagree on sampling rate");
    }
    for (auto& e : per_recording[i]) store.epochs.push_back(std::move(e));
  }
  if (store.epochs.empty()) throw DataError("ingest produced no scored epochs");

  std::filesystem::create_directories(config.cache_dir);
  save_epoch_store(store, epochs_path(config));
  return {epochs_path(config)};
}

std::vector<std::filesystem::path> run_features(const PipelineConfig& config) {
  const EpochWindowStore store = load_epoch_store(epochs_path(config));
  const std::size_t n_fft = detail::next_power_of_two(store.window_samples);
  std::vector<std::filesystem::path> artifacts;

  for (std::size_t ch = 0; ch < store.channel_names.size(); ++ch) {
    const FilterBank bank = FilterBank::build(config.scattering.q, config.scattering.h,
                                              n_fft,
                                              config.scattering.include_lowfreq_paths);
    const FeatureLayout layout = feature_layout(bank, store.window_samples);

    FeatureTable table;
    table.epochs.resize(store.epochs.size());
    table.values.resize(static_cast<Eigen::Index>(store.epochs.size()),
                        static_cast<Eigen::Index>(layout.dim()));
    parallel_for(store.epochs.size(), config.threads, [&](std::size_t e) {
      const std::vector<double> window = store.window(e, ch);
      ScatteringCoefficients coeffs = scatter(window, bank);
      renormalize_and_log(coeffs);
      const std::vector<double> values = subsample_concat(coeffs, layout);
      for (std::size_t v = 0; v < values.size(); ++v) {
        table.values(static_cast<Eigen::Index>(e), static_cast<Eigen::Index>(v)) =
            values[v];
      }
      table.epochs[e] = store.ref(e);
    });

    json paths = json::array();
    for (const PathKey& p : layout.paths) {
      paths.push_back({{"order", p.order}, {"j1", p.j1}, {"j2", p.j2}});
    }
    table.header = {{"kind", "scattering"},
                    {"channel", store.channel_names[ch]},
                    {"q", config.scattering.q},
                    {"h", config.scattering.h},
                    {"stride", layout.stride},
                    {"window", layout.window},
                    {"t_sub", layout.t_sub},
                    {"epsilon", kScatterEpsilon},
                    {"path_map", paths}};
    save_feature_table(table, features_path(config, ch));
    artifacts.push_back(features_path(config, ch));
  }
  return artifacts;
}

AffinityOptions affinity_options(const PipelineConfig& config) {
  AffinityOptions opt;
  opt.percentile = config.diffusion.percentile;
  opt.knn_threshold = config.diffusion.knn_threshold;
  opt.knn = config.diffusion.knn;
  return opt;
}

DiffusionOptions diffusion_options(const PipelineConfig& config, int dim) {
  DiffusionOptions opt;
  opt.t = config.diffusion.t;
  opt.dim = dim;
  opt.dense_threshold = config.diffusion.dense_threshold;
  return opt;
}

std::vector<std::filesystem::path> run_embed(const PipelineConfig& config) {
  std::vector<std::filesystem::path> artifacts;
  for (std::size_t ch = 0; ch < config.channels.size(); ++ch) {
    const FeatureTable features = load_feature_table(features_path(config, ch));
    const Eigen::Index j = features.values.rows();
    if (config.diffusion.d_hat > j - 1) {
      throw ConfigInvalid("diffusion.d_hat exceeds J-1 = " + std::to_string(j - 1));
    }
    const AffinityGraph graph = affinity_matrix(features.values, affinity_options(config));
    DiffusionEmbedding emb =
        diffusion_map(graph, diffusion_options(config, config.diffusion.d_hat));

    int dim = config.diffusion.d_hat;
    if (config.diffusion.dim_policy == "spectral_gap") {
      dim = suggest_embedding_dim(emb.eigenvalues, config.diffusion.d_hat);
      emb.coordinates = emb.coordinates.leftCols(dim).eval();
    }

    FeatureTable out;
    out.epochs = features.epochs;
    out.values = emb.coordinates;
    out.header = {{"kind", "diffusion_embedding"},
                  {"channel", config.channels[ch]},
                  {"t", config.diffusion.t},
                  {"dim", dim},
                  {"halves", 1},
                  {"epsilon_scale", graph.epsilon_scale},
                  {"eigenvalues", std::vector<double>(
                                      emb.eigenvalues.data(),
                                      emb.eigenvalues.data() + emb.eigenvalues.size())}};
    save_feature_table(out, embed_path(config, ch));
    artifacts.push_back(embed_path(config, ch));
  }
  return artifacts;
}

// Modes the train-eval stage will need.
std::vector<std::string> fusion_modes(const PipelineConfig& config) {
  std::vector<std::string> modes = {config.fusion};
  if (config.channels.size() == 2 && config.evaluation.ablation &&
      !config.evaluation.strict_inductive) {
    for (const char* m : {"multiview", "concat"}) {
      if (std::find(modes.begin(), modes.end(), m) == modes.end()) {
        modes.emplace_back(m);
      }
    }
  }
  return modes;
}

std::vector<std::filesystem::path> run_fuse(const PipelineConfig& config) {
  std::vector<std::filesystem::path> artifacts;
  std::vector<FeatureTable> embeds;
  for (std::size_t ch = 0; ch < config.channels.size(); ++ch) {
    embeds.push_back(load_feature_table(embed_path(config, ch)));
  }

  for (const std::string& mode : fusion_modes(config)) {
    FeatureTable out;
    out.epochs = embeds[0].epochs;
    if (mode == "single") {
      out.values = embeds[0].values;
      out.header = {{"kind", "fused"},
                    {"mode", "single"},
                    {"channel", config.channels[0]},
                    {"dim_half", embeds[0].values.cols()},
                    {"halves", 1}};
    } else if (mode == "concat") {
      DiffusionEmbedding ex, ey;
      ex.coordinates = embeds[0].values;
      ey.coordinates = embeds[1].values;
      out.values = concat_embeddings(ex, ey);
      out.header = {{"kind", "fused"},
                    {"mode", "concat"},
                    {"dim_half", embeds[0].values.cols()},
                    {"halves", 2}};
    } else {  // multiview
      const bool on_coords = config.diffusion.multiview_input == "dm_coords";
      Eigen::MatrixXd in_x, in_y;
      if (on_coords) {
        in_x = embeds[0].values;
        in_y = embeds[1].values;
      } else {
        in_x = load_feature_table(features_path(config, 0)).values;
        in_y = load_feature_table(features_path(config, 1)).values;
      }
      const Eigen::Index j = in_x.rows();
      if (config.diffusion.d_tilde > j - 1) {
        throw ConfigInvalid("diffusion.d_tilde exceeds J-1 = " + std::to_string(j - 1));
      }
      const AffinityGraph gx = affinity_matrix(in_x, affinity_options(config));
      const AffinityGraph gy = affinity_matrix(in_y, affinity_options(config));
      const CommonEmbedding common =
          multiview_dm(gx, gy, diffusion_options(config, config.diffusion.d_tilde));
      out.values = common.common;
      out.header = {{"kind", "fused"},
                    {"mode", "multiview"},
                    {"multiview_input", config.diffusion.multiview_input},
                    {"dim_half", config.diffusion.d_tilde},
                    {"halves", 2},
                    {"eigenvalues",
                     std::vector<double>(common.eigenvalues.data(),
                                         common.eigenvalues.data() +
                                             common.eigenvalues.size())}};
    }
    save_feature_table(out, fused_path(config, mode));
    artifacts.push_back(fused_path(config, mode));
  }
  return artifacts;
}

json confusion_to_json(const ConfusionMatrix& m) {
  json rows = json::array();
  for (int r = 0; r < kNumStages; ++r) {
    json row = json::array();
    for (int c = 0; c < kNumStages; ++c) row.push_back(m.at(r, c));
    rows.push_back(row);
  }
  return rows;
}

ConfusionMatrix confusion_from_json(const json& rows) {
  ConfusionMatrix m;
  for (int r = 0; r < kNumStages; ++r) {
    for (int c = 0; c < kNumStages; ++c) {
      m.add(static_cast<SleepStage>(r), static_cast<SleepStage>(c),
            rows.at(r).at(c).get<std::uint64_t>());
    }
  }
  return m;
}

// Feature matrix of one evaluation mode, from the stage caches.
FeatureTable mode_features(const PipelineConfig& config, const std::string& mode) {
  if (mode.rfind("single_ch", 0) == 0) {
    const std::size_t ch = static_cast<std::size_t>(mode.back() - '0');
    return load_feature_table(embed_path(config, ch));
  }
  return load_feature_table(fused_path(config, mode));
}

// Strict-inductive extension: the embedding is recomputed per fold from the
// training subjects' raw features only and test epochs borrow the embedding
// of their nearest training neighbor in raw feature space.
LosocvResult strict_inductive_losocv(const PipelineConfig& config,
                                     const std::vector<FeatureTable>& raw,
                                     const std::vector<EpochRef>& epochs);

json run_train_eval_json(const PipelineConfig& config) {
  json out;
  out["protocol"] = config.evaluation.strict_inductive ? "strict_inductive"
                                                       : "transductive";
  json modes = json::object();

  std::vector<std::string> mode_names = fusion_modes(config);
  if (config.channels.size() == 2 && config.evaluation.ablation &&
      !config.evaluation.strict_inductive) {
    mode_names.push_back("single_ch0");
    mode_names.push_back("single_ch1");
  }
  std::sort(mode_names.begin(), mode_names.end());
  mode_names.erase(std::unique(mode_names.begin(), mode_names.end()), mode_names.end());

  for (const std::string& mode : mode_names) {
    LosocvResult result;
    std::vector<EpochRef> epochs;
    if (config.evaluation.strict_inductive) {
      std::vector<FeatureTable> raw;
      for (std::size_t ch = 0; ch < config.channels.size(); ++ch) {
        raw.push_back(load_feature_table(features_path(config, ch)));
      }
      epochs = raw[0].epochs;
      result = strict_inductive_losocv(config, raw, epochs);
    } else {
      const FeatureTable table = mode_features(config, mode);
      epochs = table.epochs;
      LosocvOptions opt;
      opt.c = config.svm.c;
      opt.sigma = config.svm.sigma;
      opt.svm_tol = config.svm.tol;
      opt.class_balanced = config.evaluation.class_balanced;
      opt.seed = config.evaluation.seed;
      opt.threads = config.threads;
      result = losocv(table.values, epochs, opt);
    }

    json jmode;
    json folds = json::array();
    json predictions = json::array();
    for (const FoldResult& fold : result.folds) {
      folds.push_back({{"subject", fold.held_out_subject},
                       {"confusion", confusion_to_json(fold.confusion)},
                       {"accuracy", fold.accuracy},
                       {"macro_f1", fold.macro_f1},
                       {"kappa", fold.kappa}});
      for (std::size_t i = 0; i < fold.test_indices.size(); ++i) {
        const EpochRef& e = epochs[fold.test_indices[i]];
        predictions.push_back({{"subject", e.subject_id},
                               {"recording", e.recording_id},
                               {"epoch_index", e.epoch_index},
                               {"true", std::string(to_string(e.stage))},
                               {"predicted",
                                std::string(to_string(fold.predictions[i]))}});
      }
    }
    jmode["folds"] = folds;
    jmode["pooled_confusion"] = confusion_to_json(result.pooled);
    jmode["predictions"] = predictions;
    modes[mode] = jmode;
  }
  out["modes"] = modes;
  return out;
}

std::vector<std::filesystem::path> run_train_eval(const PipelineConfig& config) {
  const json out = run_train_eval_json(config);
  std::ofstream f(eval_path(config), std::ios::trunc);
  f << out.dump(2) << '\n';
  f.close();
  return {eval_path(config)};
}

LosocvResult strict_inductive_losocv(const PipelineConfig& config,
                                     const std::vector<FeatureTable>& raw,
                                     const std::vector<EpochRef>& epochs) {
  std::set<std::string> subject_set;
  for (const EpochRef& e : epochs) subject_set.insert(e.subject_id);
  if (subject_set.size() < 2) {
    throw InsufficientSubjects("leave-one-subject-out needs at least two subjects");
  }
  const std::vector<std::string> subjects(subject_set.begin(), subject_set.end());

  LosocvResult result;
  result.folds.resize(subjects.size());
  parallel_for(subjects.size(), config.threads, [&](std::size_t f) {
    FoldResult fold;
    fold.held_out_subject = subjects[f];
    for (std::size_t i = 0; i < epochs.size(); ++i) {
      (epochs[i].subject_id == subjects[f] ? fold.test_indices : fold.train_indices)
          .push_back(i);
    }
    const auto n_train = static_cast<Eigen::Index>(fold.train_indices.size());
    const auto n_test = static_cast<Eigen::Index>(fold.test_indices.size());

    // Per-channel embeddings over training epochs only.
    std::vector<Eigen::MatrixXd> train_coords;
    for (const FeatureTable& table : raw) {
      Eigen::MatrixXd train_x(n_train, table.values.cols());
      for (Eigen::Index i = 0; i < n_train; ++i) {
        train_x.row(i) = table.values.row(
            static_cast<Eigen::Index>(fold.train_indices[static_cast<std::size_t>(i)]));
      }
      const int dim = std::min<int>(config.diffusion.d_hat,
                                    static_cast<int>(n_train) - 1);
      const AffinityGraph g = affinity_matrix(train_x, affinity_options(config));
      train_coords.push_back(
          diffusion_map(g, diffusion_options(config, dim)).coordinates);
    }

    Eigen::MatrixXd train_feat;
    if (config.fusion == "single" || raw.size() == 1) {
      train_feat = train_coords[0];
    } else if (config.fusion == "concat") {
      train_feat.resize(n_train, train_coords[0].cols() + train_coords[1].cols());
      train_feat << train_coords[0], train_coords[1];
    } else {
      const int dim = std::min<int>(config.diffusion.d_tilde,
                                    static_cast<int>(n_train) - 1);
      const AffinityGraph gx = affinity_matrix(train_coords[0], affinity_options(config));
      const AffinityGraph gy = affinity_matrix(train_coords[1], affinity_options(config));
      train_feat = multiview_dm(gx, gy, diffusion_options(config, dim)).common;
    }

    // Nearest training neighbor in (concatenated) raw feature space.
    Eigen::MatrixXd test_feat(n_test, train_feat.cols());
    for (Eigen::Index ti = 0; ti < n_test; ++ti) {
      const auto test_row =
          static_cast<Eigen::Index>(fold.test_indices[static_cast<std::size_t>(ti)]);
      Eigen::Index best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (Eigen::Index tr = 0; tr < n_train; ++tr) {
        const auto train_row = static_cast<Eigen::Index>(
            fold.train_indices[static_cast<std::size_t>(tr)]);
        double d = 0.0;
        for (const FeatureTable& table : raw) {
          d += (table.values.row(test_row) - table.values.row(train_row)).squaredNorm();
        }
        if (d < best_d) {
          best_d = d;
          best = tr;
        }
      }
      test_feat.row(ti) = train_feat.row(best);
    }

    std::vector<SleepStage> train_y(fold.train_indices.size());
    for (std::size_t i = 0; i < fold.train_indices.size(); ++i) {
      train_y[i] = epochs[fold.train_indices[i]].stage;
    }
    std::vector<SleepStage> test_y(fold.test_indices.size());
    for (std::size_t i = 0; i < fold.test_indices.size(); ++i) {
      test_y[i] = epochs[fold.test_indices[i]].stage;
    }

    SvmTrainOptions svm_opt;
    svm_opt.c = config.svm.c;
    svm_opt.tol = config.svm.tol;
    svm_opt.sigma = config.svm.sigma > 0.0
                        ? config.svm.sigma
                        : median_heuristic_sigma(train_feat, 2000,
                                                 config.evaluation.seed + 7919 * f);
    const OvaModel model = train_ova(train_feat, train_y, svm_opt, 1);
    fold.predictions = predict(model, test_feat);
    fold.confusion = ConfusionMatrix::from_pairs(test_y, fold.predictions);
    const OverallMetrics m = overall_metrics(fold.confusion);
    fold.accuracy = m.accuracy;
    fold.macro_f1 = m.macro_f1;
    fold.kappa = m.kappa;
    result.folds[f] = std::move(fold);
  });
  for (const FoldResult& fold : result.folds) result.pooled += fold.confusion;
  return result;
}

// ------------------------------------------------------- export / report --

std::vector<std::filesystem::path> run_export(const PipelineConfig& config) {
  std::filesystem::create_directories(config.output_dir);
  std::vector<std::filesystem::path> artifacts;

  const FeatureTable table = load_feature_table(fused_path(config, config.fusion));
  const int halves = table.header.value("halves", 1);
  const auto dim_half = table.header.value("dim_half", table.values.cols() / halves);
  for (const int d : config.export_dims) {
    if (d < 2 || d > dim_half + 1) {
      throw ConfigInvalid("export dim " + std::to_string(d) +
                          " outside the valid range [2, " +
                          std::to_string(dim_half + 1) + "]");
    }
  }

  const std::filesystem::path embedding_csv = config.output_dir / "embedding.csv";
  {
    std::ofstream out(embedding_csv, std::ios::trunc);
    out << "subject_id,recording_id,epoch_index,stage";
    for (int half = 0; half < halves; ++half) {
      for (const int d : config.export_dims) {
        out << ",coord" << d << (halves == 2 ? (half == 0 ? "_a" : "_b") : "");
      }
    }
    out << '\n';
    out.precision(17);
    for (std::size_t r = 0; r < table.epochs.size(); ++r) {
      const EpochRef& e = table.epochs[r];
      out << e.subject_id << ',' << e.recording_id << ',' << e.epoch_index << ','
          << to_string(e.stage);
      for (int half = 0; half < halves; ++half) {
        for (const int d : config.export_dims) {
          const Eigen::Index col = static_cast<Eigen::Index>(half) * dim_half + (d - 2);
          out << ',' << table.values(static_cast<Eigen::Index>(r), col);
        }
      }
      out << '\n';
    }
  }
  artifacts.push_back(embedding_csv);

  if (std::filesystem::exists(eval_path(config))) {
    std::ifstream in(eval_path(config));
    const json eval = json::parse(in);
    const json& predictions = eval.at("modes").at(config.fusion).at("predictions");
    const std::filesystem::path hyp_csv = config.output_dir / "hypnogram.csv";
    std::ofstream out(hyp_csv, std::ios::trunc);
    out << "subject_id,recording_id,epoch_index,true_stage,predicted_stage\n";
    for (const auto& p : predictions) {
      out << p.at("subject").get<std::string>() << ','
          << p.at("recording").get<std::string>() << ','
          << p.at("epoch_index").get<std::uint64_t>() << ','
          << p.at("true").get<std::string>() << ','
          << p.at("predicted").get<std::string>() << '\n';
    }
    artifacts.push_back(hyp_csv);
  }
  return artifacts;
}

json per_class_json(const ConfusionMatrix& m) {
  const PerClassMetrics pc = per_class_metrics(m);
  json out = json::object();
  for (int s = 0; s < kNumStages; ++s) {
    out[std::string(to_string(static_cast<SleepStage>(s)))] = {
        {"precision", pc.precision[s]},
        {"recall", pc.recall[s]},
        {"f1", pc.f1[s]},
        {"precision_undefined", pc.precision_undefined[s]},
        {"recall_undefined", pc.recall_undefined[s]}};
  }
  return out;
}

// Per-recording metric series out of the stored predictions.
std::map<std::string, OverallMetrics> recording_metrics(const json& mode) {
  std::map<std::string, ConfusionMatrix> confusions;
  for (const auto& p : mode.at("predictions")) {
    const auto truth = stage_from_string(p.at("true").get<std::string>());
    const auto pred = stage_from_string(p.at("predicted").get<std::string>());
    if (!truth || !pred) throw CacheCorrupt("bad stage name in eval.json");
    confusions[p.at("recording").get<std::string>()].add(*truth, *pred);
  }
  std::map<std::string, OverallMetrics> out;
  for (const auto& [rec, confusion] : confusions) {
    out[rec] = overall_metrics(confusion);
  }
  return out;
}

std::vector<std::filesystem::path> run_report(const PipelineConfig& config) {
  std::ifstream in(eval_path(config));
  if (!in) throw MissingUpstream("train-eval output not found; run train-eval first");
  const json eval = json::parse(in);

  json report;
  report["config"] = stage_config_subset(Stage::TrainEval, config);
  report["config"]["channels"] = config.channels;
  report["config"]["truncation_minutes"] = config.truncation_minutes;
  report["protocol"] = eval.at("protocol");

  json modes = json::object();
  for (const auto& [mode, payload] : eval.at("modes").items()) {
    const ConfusionMatrix pooled = confusion_from_json(payload.at("pooled_confusion"));
    const OverallMetrics overall = overall_metrics(pooled);
    json jmode;
    jmode["pooled_confusion"] = payload.at("pooled_confusion");
    jmode["accuracy"] = overall.accuracy;
    jmode["macro_f1"] = overall.macro_f1;
    jmode["kappa"] = overall.kappa;
    jmode["expected_accuracy"] = overall.expected_accuracy;
    jmode["per_class"] = per_class_json(pooled);
    jmode["folds"] = payload.at("folds");
    json per_rec = json::object();
    for (const auto& [rec, m] : recording_metrics(payload)) {
      per_rec[rec] = {{"accuracy", m.accuracy},
                      {"macro_f1", m.macro_f1},
                      {"kappa", m.kappa}};
    }
    jmode["per_recording"] = per_rec;
    modes[mode] = jmode;
  }
  report["modes"] = modes;

  // Fusion ablation: paired per-recording comparisons of multiview against
  // the concatenation baseline and each single channel.
  const bool have_ablation = eval.at("modes").contains("multiview") &&
                             eval.at("modes").contains("concat") &&
                             eval.at("modes").contains("single_ch0") &&
                             eval.at("modes").contains("single_ch1");
  if (have_ablation) {
    struct Series {
      std::vector<double> acc, mf1, kappa;
    };
    std::map<std::string, Series> series;
    std::vector<std::string> recs;
    for (const auto& [rec, m] : recording_metrics(eval.at("modes").at("multiview"))) {
      (void)m;
      recs.push_back(rec);
    }
    for (const auto& [mode, payload] : eval.at("modes").items()) {
      const auto metrics = recording_metrics(payload);
      Series s;
      for (const std::string& rec : recs) {
        const OverallMetrics& m = metrics.at(rec);
        s.acc.push_back(m.accuracy);
        s.mf1.push_back(m.macro_f1);
        s.kappa.push_back(m.kappa);
      }
      series[mode] = std::move(s);
    }

    json comparisons = json::array();
    std::vector<double> wilcoxon_ps, f_ps;
    const std::vector<std::string> baselines = {"single_ch0", "single_ch1", "concat"};
    const std::vector<std::string> metric_names = {"accuracy", "macro_f1", "kappa"};
    for (const std::string& baseline : baselines) {
      for (const std::string& metric : metric_names) {
        auto pick = [&](const Series& s) -> const std::vector<double>& {
          if (metric == "accuracy") return s.acc;
          if (metric == "macro_f1") return s.mf1;
          return s.kappa;
        };
        const std::vector<double>& a = pick(series.at("multiview"));
        const std::vector<double>& b = pick(series.at(baseline));
        json cmp = {{"baseline", baseline}, {"metric", metric}};
        try {
          const StatTestResult w = wilcoxon_signed_rank(a, b, Tail::Greater);
          cmp["wilcoxon_p"] = w.p_value;
          cmp["wilcoxon_statistic"] = w.statistic;
          cmp["wilcoxon_exact"] = w.exact;
          wilcoxon_ps.push_back(w.p_value);
        } catch (const TooFewPairs&) {
          cmp["wilcoxon_p"] = nullptr;
        }
        try {
          const StatTestResult ft = f_test_variance(a, b, Tail::Less);
          cmp["f_p"] = ft.p_value;
          cmp["f_statistic"] = ft.statistic;
          f_ps.push_back(ft.p_value);
        } catch (const ZeroVariance&) {
          cmp["f_p"] = nullptr;
        }
        comparisons.push_back(cmp);
      }
    }
    // Bonferroni within each test family.
    if (!wilcoxon_ps.empty()) {
      const std::vector<bool> flags = bonferroni(wilcoxon_ps, 0.05);
      std::size_t k = 0;
      for (auto& cmp : comparisons) {
        if (!cmp.at("wilcoxon_p").is_null()) {
          cmp["wilcoxon_significant"] = cmp.at("wilcoxon_p").get<double>() < 0.05;
          cmp["wilcoxon_significant_bonferroni"] = static_cast<bool>(flags[k]);
          cmp["bonferroni_adjusted_alpha"] = 0.05 / static_cast<double>(wilcoxon_ps.size());
          ++k;
        }
      }
    }
    if (!f_ps.empty()) {
      const std::vector<bool> flags = bonferroni(f_ps, 0.05);
      std::size_t k = 0;
      for (auto& cmp : comparisons) {
        if (cmp.contains("f_p") && !cmp.at("f_p").is_null()) {
          cmp["f_significant"] = cmp.at("f_p").get<double>() < 0.05;
          cmp["f_significant_bonferroni"] = static_cast<bool>(flags[k]);
          ++k;
        }
      }
    }
    report["ablation"] = {{"comparisons", comparisons}};
  }

  std::filesystem::create_directories(config.output_dir);
  const std::filesystem::path report_path = config.output_dir / "report.json";
  {
    std::ofstream out(report_path, std::ios::trunc);
    out << report.dump(2) << '\n';
  }

  // Confusion tables in the row = expert stage, column = prediction layout.
  const std::filesystem::path tables_path = config.output_dir / "tables.csv";
  {
    std::ofstream out(tables_path, std::ios::trunc);
    out.precision(10);
    for (const auto& [mode, payload] : eval.at("modes").items()) {
      const ConfusionMatrix pooled = confusion_from_json(payload.at("pooled_confusion"));
      const PerClassMetrics pc = per_class_metrics(pooled);
      out << "mode," << mode << '\n';
      out << "stage,Awake,REM,N1,N2,N3,PR,RE,F1\n";
      for (int r = 0; r < kNumStages; ++r) {
        out << to_string(static_cast<SleepStage>(r));
        for (int c = 0; c < kNumStages; ++c) out << ',' << pooled.at(r, c);
        out << ',' << pc.precision[r] << ',' << pc.recall[r] << ',' << pc.f1[r] << '\n';
      }
      const OverallMetrics overall = overall_metrics(pooled);
      out << "overall,accuracy," << overall.accuracy << ",macro_f1," << overall.macro_f1
          << ",kappa," << overall.kappa << ",,\n\n";
    }
  }

  // Volatile performance numbers live next to the report, never inside it,
  // so identical runs produce byte-identical report.json files.
  const std::filesystem::path perf_path = config.output_dir / "report.perf.json";
  {
    json perf = json::object();
    for (const Stage s : {Stage::Ingest, Stage::Features, Stage::Embed, Stage::Fuse,
                          Stage::TrainEval}) {
      const json stamp = load_stamp(config, s);
      if (!stamp.is_null()) {
        perf[stage_name(s)] = {{"wall_seconds", stamp.value("wall_seconds", 0.0)},
                               {"peak_rss_kb", stamp.value("peak_rss_kb", 0)}};
      }
    }
    std::ofstream out(perf_path, std::ios::trunc);
    out << perf.dump(2) << '\n';
  }

  return {report_path, tables_path};
}

StageReport run_stage_locked(Stage stage, const PipelineConfig& config) {
  config.validate();
  const std::string desired = desired_state_hash(config, stage);

  StageReport report;
  report.stage = stage;
  if (cache_hit(config, stage, desired)) {
    report.cache_hit = true;
    report.peak_rss_kb = peak_rss_kb();
    return report;
  }

  const auto start = std::chrono::steady_clock::now();
  std::vector<std::filesystem::path> artifacts;
  switch (stage) {
    case Stage::Ingest: artifacts = run_ingest(config); break;
    case Stage::Features: artifacts = run_features(config); break;
    case Stage::Embed: artifacts = run_embed(config); break;
    case Stage::Fuse: artifacts = run_fuse(config); break;
    case Stage::TrainEval: artifacts = run_train_eval(config); break;
    case Stage::Export: artifacts = run_export(config); break;
    case Stage::Report: artifacts = run_report(config); break;
  }
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  report.peak_rss_kb = peak_rss_kb();
  write_stamp(config, stage, desired, artifacts, report.wall_seconds);
  return report;
}

}  // namespace

StageReport run_stage(Stage stage, const PipelineConfig& config) {
  CacheLock lock(config.cache_dir);
  return run_stage_locked(stage, config);
}

std::vector<StageReport> run_all(const PipelineConfig& config) {
  CacheLock lock(config.cache_dir);
  std::vector<StageReport> reports;
  for (const Stage stage : {Stage::Ingest, Stage::Features, Stage::Embed, Stage::Fuse,
                            Stage::TrainEval, Stage::Export, Stage::Report}) {
    reports.push_back(run_stage_locked(stage, config));
  }
  return reports;
}

}  // namespace sleepdyn
