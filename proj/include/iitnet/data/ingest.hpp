#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "iitnet/core.hpp"

namespace iitnet::data {

enum class DatasetKind { SleepEdf, Mass, Shhs, Generic };

const char* dataset_kind_name(DatasetKind kind);
DatasetKind dataset_kind_from_name(const std::string& name);  // throws on unknown

// Raised for structural problems found while turning files into epochs
// (annotation overruns, bad page durations, missing sidecars).
class IngestError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DatasetConfig {
  DatasetKind kind = DatasetKind::SleepEdf;
  std::string channel = "EEG Fpz-Cz";
  double sample_rate = 100.0;  // model-facing rate; other native rates are resampled
  int wake_trim_epochs = 60;
  int sequence_length = 1;  // L
  bool skip_short_prefix = false;  // drop night-initial targets instead of padding

  // Long ambulatory recordings carry hours of surrounding wake; in-lab
  // datasets do not, so trimming only applies to the SleepEDF layout.
  bool trims_wake() const { return kind == DatasetKind::SleepEdf; }
  void validate() const;  // throws std::invalid_argument
};

struct EpochAnnotation {
  long long start_index = 0;  // sample index at the recording's final rate
  std::string raw_label;      // dataset-native token
};

// One recording's configured channel plus its raw per-epoch annotations,
// already resampled to the configured rate when the file rate differs.
struct RawRecording {
  std::vector<double> signal;
  double sample_rate = 0.0;
  std::string channel_name;
  std::string subject_id;
  std::string source_path;
  std::string annotation_path;
  std::vector<EpochAnnotation> epoch_annotations;
};

// Parses one PSG file and its dataset-specific annotation sidecar.
RawRecording read_recording(const std::string& path, const DatasetConfig& config);

// Harmonizes labels, drops excluded epochs, bounds-checks the survivors and
// applies wake trimming for configs that request it.
std::vector<LabeledEpoch> extract_epochs(const RawRecording& rec,
                                         const DatasetConfig& config);

// One SequenceSample per target epoch; night-initial targets repeat the first
// epoch unless skip_short_prefix drops them. Samples point into `epochs`.
std::vector<SequenceSample> make_sequences(const std::vector<LabeledEpoch>& epochs,
                                           int sequence_length,
                                           bool skip_short_prefix = false);

// A fully ingested night.
struct NightRecord {
  std::string subject_id;
  std::string source_path;
  double sample_rate = 0.0;
  std::vector<LabeledEpoch> epochs;
};

NightRecord ingest_recording(const std::string& path, const DatasetConfig& config);

// All PSG paths of the given layout under `dir` (recursive), sorted.
std::vector<std::string> discover_recordings(const std::string& dir, DatasetKind kind);

}  // namespace iitnet::data
