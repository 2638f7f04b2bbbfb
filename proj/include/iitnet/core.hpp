#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace iitnet {

// The five AASM stages in the fixed order used everywhere in this project:
// confusion matrices, reports and label encodings all index by this order.
enum class Stage : int { Wake = 0, N1 = 1, N2 = 2, N3 = 3, Rem = 4 };

inline constexpr int kNumStages = 5;

const char* stage_name(Stage s);
Stage stage_from_index(int index);                  // throws std::out_of_range
std::optional<Stage> stage_from_name(const std::string& name);

enum class ExcludedReason { Movement, Unknown };

// Raised when an annotation token is not part of any supported vocabulary.
class UnknownLabelError : public std::runtime_error {
 public:
  UnknownLabelError(const std::string& token, const std::string& source);
  const std::string& token() const { return token_; }

 private:
  std::string token_;
};

// Result of harmonizing a dataset-native stage token: either one of the five
// AASM stages or an excluded marker (movement / unscored epochs).
struct HarmonizedLabel {
  std::optional<Stage> stage;
  std::optional<ExcludedReason> excluded;

  bool is_excluded() const { return excluded.has_value(); }
};

// Maps a dataset-native annotation token onto the 5-class vocabulary.
// N4 folds into N3; movement/unknown tokens become Excluded. Unrecognized
// tokens raise UnknownLabelError naming the token and the offending file.
HarmonizedLabel harmonize_label(const std::string& raw_label,
                                const std::string& source_file = "");

// One 30-second segment of single-channel signal with its stage label.
// `position` is the chronological epoch index within the night; `samples`
// holds raw physical-unit values, no normalization applied.
struct LabeledEpoch {
  std::vector<double> samples;
  Stage label = Stage::Wake;
  std::string subject_id;
  int position = 0;
};

// L chronologically ordered epochs; the label of the last one is the target.
// Epochs are referenced, not owned: the container they came from must outlive
// the sample. Night-initial targets may repeat the first epoch (left padding),
// so consecutive entries can alias the same epoch.
struct SequenceSample {
  std::vector<const LabeledEpoch*> epochs;
  Stage target_label = Stage::Wake;

  int sequence_length() const { return static_cast<int>(epochs.size()); }
  const LabeledEpoch& target() const { return *epochs.back(); }
};

// 5x5 prediction counts. Rows are predicted stages, columns are true stages.
class ConfusionMatrix {
 public:
  void add(Stage predicted, Stage truth, long long count = 1);
  long long at(int predicted, int truth) const;
  long long row_sum(int predicted) const;
  long long col_sum(int truth) const;
  long long diagonal_sum() const;
  long long total() const;

  ConfusionMatrix& operator+=(const ConfusionMatrix& other);
  bool operator==(const ConfusionMatrix& other) const = default;

 private:
  std::array<std::array<long long, kNumStages>, kNumStages> counts_{};
};

}  // namespace iitnet
