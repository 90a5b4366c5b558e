#include "sleepdyn/synthetic.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include <nlohmann/json.hpp>

#include "sleepdyn/edf.hpp"

namespace sleepdyn {

namespace {

constexpr double kFs = 100.0;
constexpr int kSlotSeconds = 30;

struct StageTone {
  double carrier[2];  // Hz per channel
  double envelope;    // shared AM rate, Hz
};

StageTone tone_of(SleepStage s) {
  switch (s) {
    case SleepStage::Awake: return {{27.0, 31.0}, 2.3};
    case SleepStage::Rem: return {{17.0, 14.0}, 1.1};
    case SleepStage::N1: return {{10.0, 8.5}, 0.7};
    case SleepStage::N2: return {{5.5, 4.6}, 0.33};
    case SleepStage::N3: return {{1.6, 2.2}, 0.12};
    case SleepStage::Excluded: return {{45.0, 45.0}, 3.0};
  }
  return {{45.0, 45.0}, 3.0};
}

}  // namespace

std::vector<SleepStage> SyntheticDatasetSpec::default_template() {
  std::vector<SleepStage> t;
  auto block = [&t](SleepStage s, int n) { t.insert(t.end(), n, s); };
  block(SleepStage::Awake, 10);
  block(SleepStage::N1, 7);
  block(SleepStage::N2, 12);
  block(SleepStage::N3, 11);
  block(SleepStage::N2, 6);
  block(SleepStage::Rem, 10);
  block(SleepStage::N1, 4);
  block(SleepStage::N2, 6);
  block(SleepStage::Awake, 6);
  return t;  // 72 slots = 36 minutes
}

std::vector<SyntheticRecordingInfo> write_synthetic_dataset(
    const std::filesystem::path& root, const SyntheticDatasetSpec& spec) {
  std::filesystem::create_directories(root);
  std::vector<SleepStage> slots =
      spec.stage_template.empty() ? SyntheticDatasetSpec::default_template()
                                  : spec.stage_template;

  std::vector<SyntheticRecordingInfo> infos;
  nlohmann::json manifest;
  manifest["recordings"] = nlohmann::json::array();

  for (int s = 0; s < spec.subjects; ++s) {
    for (int r = 0; r < spec.recordings_per_subject; ++r) {
      SyntheticRecordingInfo info;
      char subject_buf[16];
      std::snprintf(subject_buf, sizeof(subject_buf), "S%02d", s + 1);
      info.subject_id = subject_buf;
      info.recording_id = info.subject_id + "R" + std::to_string(r + 1);
      info.slots = slots;

      std::mt19937_64 rng(spec.seed ^ (0x9e3779b97f4a7c15ull *
                                       (static_cast<std::uint64_t>(s) * 131 + r + 1)));
      std::normal_distribution<double> gauss(0.0, 1.0);
      std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
      std::uniform_real_distribution<double> jitter(-0.2, 0.2);

      if (spec.include_movement_slots && info.slots.size() > 40) {
        info.slots[20] = SleepStage::Excluded;
        info.slots[35] = SleepStage::Excluded;
      }

      const std::size_t n_slots = info.slots.size();
      const std::size_t samples = n_slots * kSlotSeconds * static_cast<std::size_t>(kFs);
      std::vector<std::vector<double>> signal(2, std::vector<double>(samples, 0.0));

      const double carrier_jitter = jitter(rng);
      const double phi0 = phase(rng);
      const double phi1 = phase(rng);
      const double phi_env = phase(rng);
      for (std::size_t i = 0; i < samples; ++i) {
        const double t = static_cast<double>(i) / kFs;
        const std::size_t slot = std::min(n_slots - 1, i / (kSlotSeconds * 100));
        const StageTone tone = tone_of(info.slots[slot]);
        const double env =
            1.0 + 0.5 * std::sin(2.0 * std::numbers::pi * tone.envelope * t + phi_env);
        for (int ch = 0; ch < 2; ++ch) {
          const double f = tone.carrier[ch] + carrier_jitter;
          const double phi = ch == 0 ? phi0 : phi1;
          signal[static_cast<std::size_t>(ch)][i] =
              spec.carrier_amplitude * env *
                  std::sin(2.0 * std::numbers::pi * f * t + phi) +
              spec.noise_amplitude * gauss(rng);
        }
      }

      std::vector<ChannelMeta> channels;
      channels.push_back(make_channel("EEG Fpz-Cz", "uV", -250.0, 250.0, -2048, 2047,
                                      kSlotSeconds * 100));
      channels.push_back(make_channel("EEG Pz-Oz", "uV", -250.0, 250.0, -2048, 2047,
                                      kSlotSeconds * 100));
      EdfRecording rec = make_recording(info.subject_id, info.recording_id, "01.01.01",
                                        "22.00.00", kSlotSeconds, channels);
      set_record_count(rec, static_cast<int>(n_slots));
      for (int ch = 0; ch < 2; ++ch) {
        rec.digital[static_cast<std::size_t>(ch)] =
            quantize(rec.channels[static_cast<std::size_t>(ch)],
                     signal[static_cast<std::size_t>(ch)]);
      }

      info.psg = root / (info.recording_id + "-PSG.edf");
      info.hypnogram = root / (info.recording_id + "-Hypnogram.txt");
      write_edf_file(rec, info.psg);

      std::ofstream hyp(info.hypnogram, std::ios::trunc);
      std::size_t run_start = 0;
      for (std::size_t i = 1; i <= n_slots; ++i) {
        if (i == n_slots || info.slots[i] != info.slots[run_start]) {
          const SleepStage stage = info.slots[run_start];
          const char* label = "Sleep stage ?";
          switch (stage) {
            case SleepStage::Awake: label = "Sleep stage W"; break;
            case SleepStage::Rem: label = "Sleep stage R"; break;
            case SleepStage::N1: label = "Sleep stage 1"; break;
            case SleepStage::N2: label = "Sleep stage 2"; break;
            case SleepStage::N3: label = "Sleep stage 3"; break;
            case SleepStage::Excluded: label = "Movement time"; break;
          }
          hyp << run_start * kSlotSeconds << '\t' << (i - run_start) * kSlotSeconds
              << '\t' << label << '\n';
          run_start = i;
        }
      }
      hyp.close();

      manifest["recordings"].push_back({{"psg", info.psg.filename().string()},
                                        {"hypnogram", info.hypnogram.filename().string()},
                                        {"subject", info.subject_id},
                                        {"recording", info.recording_id}});
      infos.push_back(std::move(info));
    }
  }

  std::ofstream mf(root / "manifest.json", std::ios::trunc);
  mf << manifest.dump(2) << '\n';
  return infos;
}

}  // namespace sleepdyn
