#include "iitnet/core.hpp"

#include <algorithm>
#include <unordered_map>

namespace iitnet {

const char* stage_name(Stage s) {
  switch (s) {
    case Stage::Wake: return "W";
    case Stage::N1: return "N1";
    case Stage::N2: return "N2";
    case Stage::N3: return "N3";
    case Stage::Rem: return "REM";
  }
  return "?";
}

Stage stage_from_index(int index) {
  if (index < 0 || index >= kNumStages)
    throw std::out_of_range("stage index out of range: " + std::to_string(index));
  return static_cast<Stage>(index);
}

std::optional<Stage> stage_from_name(const std::string& name) {
  for (int i = 0; i < kNumStages; ++i) {
    if (name == stage_name(static_cast<Stage>(i))) return static_cast<Stage>(i);
  }
  return std::nullopt;
}

UnknownLabelError::UnknownLabelError(const std::string& token, const std::string& source)
    : std::runtime_error("unknown stage label token \"" + token + "\"" +
                         (source.empty() ? "" : " in " + source)),
      token_(token) {}

namespace {

struct VocabEntry {
  std::optional<Stage> stage;
  std::optional<ExcludedReason> excluded;
};

// Union vocabulary across the supported datasets. SleepEDF hypnograms use
// R&K tokens ("Sleep stage 4"), MASS uses AASM tokens ("Sleep stage N3"),
// SHHS profusion profiles use numeric codes, and the synthetic generator
// emits the bare canonical names.
const std::unordered_map<std::string, VocabEntry>& vocabulary() {
  static const std::unordered_map<std::string, VocabEntry> kVocab = {
      // SleepEDF / R&K
      {"Sleep stage W", {Stage::Wake, {}}},
      {"Sleep stage 1", {Stage::N1, {}}},
      {"Sleep stage 2", {Stage::N2, {}}},
      {"Sleep stage 3", {Stage::N3, {}}},
      {"Sleep stage 4", {Stage::N3, {}}},  // N4 merged into N3
      {"Sleep stage R", {Stage::Rem, {}}},
      {"Sleep stage ?", {{}, ExcludedReason::Unknown}},
      {"Movement time", {{}, ExcludedReason::Movement}},
      // MASS / AASM
      {"Sleep stage N1", {Stage::N1, {}}},
      {"Sleep stage N2", {Stage::N2, {}}},
      {"Sleep stage N3", {Stage::N3, {}}},
      {"Sleep stage N4", {Stage::N3, {}}},
      {"Sleep stage REM", {Stage::Rem, {}}},
      {"Sleep stage MT", {{}, ExcludedReason::Movement}},
      // SHHS profusion stage codes (R&K numeric)
      {"0", {Stage::Wake, {}}},
      {"1", {Stage::N1, {}}},
      {"2", {Stage::N2, {}}},
      {"3", {Stage::N3, {}}},
      {"4", {Stage::N3, {}}},
      {"5", {Stage::Rem, {}}},
      {"6", {{}, ExcludedReason::Movement}},
      {"9", {{}, ExcludedReason::Unknown}},
      // Canonical names (synthetic generator, generic sidecars)
      {"W", {Stage::Wake, {}}},
      {"N1", {Stage::N1, {}}},
      {"N2", {Stage::N2, {}}},
      {"N3", {Stage::N3, {}}},
      {"N4", {Stage::N3, {}}},
      {"REM", {Stage::Rem, {}}},
      {"MOVEMENT", {{}, ExcludedReason::Movement}},
      {"UNKNOWN", {{}, ExcludedReason::Unknown}},
  };
  return kVocab;
}

}  // namespace

HarmonizedLabel harmonize_label(const std::string& raw_label, const std::string& source_file) {
  auto it = vocabulary().find(raw_label);
  if (it == vocabulary().end()) throw UnknownLabelError(raw_label, source_file);
  return HarmonizedLabel{it->second.stage, it->second.excluded};
}

void ConfusionMatrix::add(Stage predicted, Stage truth, long long count) {
  counts_[static_cast<int>(predicted)][static_cast<int>(truth)] += count;
}

long long ConfusionMatrix::at(int predicted, int truth) const {
  return counts_.at(predicted).at(truth);
}

long long ConfusionMatrix::row_sum(int predicted) const {
  long long s = 0;
  for (int j = 0; j < kNumStages; ++j) s += counts_[predicted][j];
  return s;
}

long long ConfusionMatrix::col_sum(int truth) const {
  long long s = 0;
  for (int i = 0; i < kNumStages; ++i) s += counts_[i][truth];
  return s;
}

long long ConfusionMatrix::diagonal_sum() const {
  long long s = 0;
  for (int i = 0; i < kNumStages; ++i) s += counts_[i][i];
  return s;
}

long long ConfusionMatrix::total() const {
  long long s = 0;
  for (int i = 0; i < kNumStages; ++i) s += row_sum(i);
  return s;
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  for (int i = 0; i < kNumStages; ++i)
    for (int j = 0; j < kNumStages; ++j) counts_[i][j] += other.counts_[i][j];
  return *this;
}

}  // namespace iitnet
