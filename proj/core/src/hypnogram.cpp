#include "sleepdyn/hypnogram.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <sstream>
#include <string>

namespace sleepdyn {

namespace {

std::string lowercase(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return out;
}

bool is_slot_multiple(double seconds) {
  const double q = seconds / 30.0;
  return std::abs(q - std::round(q)) < 1e-6;
}

double parse_seconds(std::string_view token, const char* what) {
  const std::string t(token);
  char* end = nullptr;
  const double v = std::strtod(t.c_str(), &end);
  if (t.empty() || end != t.c_str() + t.size()) {
    throw DataError(std::string("hypnogram: bad ") + what + " '" + t + "'");
  }
  return v;
}

}  // namespace

std::optional<SleepStage> stage_from_annotation(std::string_view label) {
  const std::string l = lowercase(detail::trim(label));
  if (l == "sleep stage w") return SleepStage::Awake;
  if (l == "sleep stage r") return SleepStage::Rem;
  if (l == "sleep stage 1") return SleepStage::N1;
  if (l == "sleep stage 2") return SleepStage::N2;
  if (l == "sleep stage 3") return SleepStage::N3;
  if (l == "sleep stage 4") return SleepStage::N3;  // N4 is relabeled to N3
  if (l == "movement time") return SleepStage::Excluded;
  if (l == "sleep stage ?") return SleepStage::Excluded;
  return std::nullopt;
}

std::vector<StageInterval> parse_hypnogram_text(std::string_view text) {
  std::vector<StageInterval> out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string stripped = detail::trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const std::size_t tab1 = stripped.find('\t');
    const std::size_t tab2 = tab1 == std::string::npos ? std::string::npos
                                                       : stripped.find('\t', tab1 + 1);
    if (tab2 == std::string::npos) {
      throw DataError("hypnogram: line " + std::to_string(lineno) +
                      " is not onset<TAB>duration<TAB>label");
    }
    StageInterval iv;
    iv.onset_seconds = parse_seconds(stripped.substr(0, tab1), "onset");
    iv.duration_seconds =
        parse_seconds(stripped.substr(tab1 + 1, tab2 - tab1 - 1), "duration");
    const std::string label = detail::trim(stripped.substr(tab2 + 1));
    const auto stage = stage_from_annotation(label);
    if (!stage) {
      throw DataError("hypnogram: line " + std::to_string(lineno) +
                      " has unrecognized stage label '" + label + "'");
    }
    iv.stage = *stage;
    out.push_back(iv);
  }
  return out;
}

std::vector<StageInterval> parse_tal_stream(std::string_view tal_bytes) {
  std::vector<StageInterval> out;
  std::size_t pos = 0;
  while (pos < tal_bytes.size()) {
    const std::size_t end = tal_bytes.find('\0', pos);
    if (end == std::string_view::npos) break;
    const std::string_view tal = tal_bytes.substr(pos, end - pos);
    pos = end + 1;
    if (tal.empty()) continue;
    if (tal[0] != '+' && tal[0] != '-') {
      throw DataError("EDF+ annotation does not start with a signed onset");
    }
    const std::size_t mark = tal.find_first_of("\x14\x15");
    if (mark == std::string_view::npos) continue;
    const double onset = parse_seconds(tal.substr(0, mark), "TAL onset");
    double duration = 0.0;
    std::size_t text_start = mark;
    if (tal[mark] == '\x15') {
      const std::size_t dur_end = tal.find('\x14', mark + 1);
      if (dur_end == std::string_view::npos) continue;
      duration = parse_seconds(tal.substr(mark + 1, dur_end - mark - 1), "TAL duration");
      text_start = dur_end;
    }
    // One or more \x14-separated annotation texts follow.
    std::size_t p = text_start;
    while (p < tal.size() && tal[p] == '\x14') {
      const std::size_t q = tal.find('\x14', p + 1);
      if (q == std::string_view::npos) break;
      const std::string_view text = tal.substr(p + 1, q - p - 1);
      if (!text.empty()) {
        if (const auto stage = stage_from_annotation(text)) {
          out.push_back(StageInterval{onset, duration, *stage});
        }
      }
      p = q;
    }
  }
  return out;
}

std::vector<StageInterval> parse_hypnogram_edf(const EdfRecording& rec) {
  std::string payload;
  bool found = false;
  for (std::size_t i = 0; i < rec.channels.size(); ++i) {
    if (!rec.channels[i].is_annotation()) continue;
    found = true;
    const std::vector<std::int16_t>& d = rec.digital[i];
    payload.reserve(payload.size() + d.size() * 2);
    for (std::int16_t s : d) {
      const auto u = static_cast<std::uint16_t>(s);
      payload.push_back(static_cast<char>(u & 0xff));
      payload.push_back(static_cast<char>((u >> 8) & 0xff));
    }
  }
  if (!found) throw MissingChannel("no 'EDF Annotations' channel in hypnogram file");
  return parse_tal_stream(payload);
}

std::vector<SleepStage> stage_slots(std::span<const StageInterval> intervals) {
  double cursor = -1.0;
  double end_max = 0.0;
  for (const StageInterval& iv : intervals) {
    if (!is_slot_multiple(iv.onset_seconds) || !is_slot_multiple(iv.duration_seconds) ||
        iv.duration_seconds < 0.0) {
      throw NonMultipleDuration("annotation at onset " +
                                std::to_string(iv.onset_seconds) + " with duration " +
                                std::to_string(iv.duration_seconds) +
                                " is not aligned to 30 s slots");
    }
    if (iv.onset_seconds < cursor) {
      throw OverlappingAnnotations("annotation at onset " +
                                   std::to_string(iv.onset_seconds) +
                                   " overlaps the previous one");
    }
    cursor = iv.onset_seconds + iv.duration_seconds;
    end_max = std::max(end_max, cursor);
  }
  const auto n_slots = static_cast<std::size_t>(std::llround(end_max / 30.0));
  std::vector<SleepStage> slots(n_slots, SleepStage::Excluded);
  for (const StageInterval& iv : intervals) {
    const auto first = static_cast<std::size_t>(std::llround(iv.onset_seconds / 30.0));
    const auto count = static_cast<std::size_t>(std::llround(iv.duration_seconds / 30.0));
    for (std::size_t s = first; s < first + count; ++s) slots[s] = iv.stage;
  }
  return slots;
}

EpochRange truncate_wake(std::span<const SleepStage> slots, int margin_minutes) {
  if (margin_minutes < 0) throw ConfigInvalid("negative wake margin");
  std::ptrdiff_t first = -1, last = -1;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const SleepStage s = slots[i];
    if (is_scorable(s) && s != SleepStage::Awake) {
      if (first < 0) first = static_cast<std::ptrdiff_t>(i);
      last = static_cast<std::ptrdiff_t>(i);
    }
  }
  if (first < 0) throw NoSleepFound("recording contains no sleep epochs");
  const std::ptrdiff_t margin = static_cast<std::ptrdiff_t>(margin_minutes) * 2;
  EpochRange r;
  r.first = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, first - margin));
  r.last = static_cast<std::size_t>(
      std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(slots.size()) - 1,
                               last + margin));
  return r;
}

}  // namespace sleepdyn
