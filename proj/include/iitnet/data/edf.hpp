#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace iitnet::data {

class EdfError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class MissingChannelError : public EdfError {
 public:
  MissingChannelError(const std::string& channel, const std::string& path)
      : EdfError("channel \"" + channel + "\" not present in " + path),
        channel(channel) {}
  std::string channel;
};

struct EdfSignalHeader {
  std::string label;
  std::string transducer;
  std::string dimension;
  double phys_min = 0.0;
  double phys_max = 0.0;
  int dig_min = 0;
  int dig_max = 0;
  std::string prefilter;
  int samples_per_record = 0;
};

// Parsed EDF/EDF+ file with all sample data loaded. Samples stay in their
// 16-bit digital form; physical() applies the per-signal affine scaling.
struct EdfFile {
  std::string path;
  std::string version;
  std::string patient_id;
  std::string recording_id;
  std::string start_date;
  std::string start_time;
  std::string reserved;  // "EDF+C"/"EDF+D" for EDF+ files
  int n_records = 0;
  double record_seconds = 0.0;
  std::vector<EdfSignalHeader> signals;
  std::vector<std::vector<int16_t>> digital;  // [signal][record-major samples]

  int find_signal(const std::string& label) const;  // -1 when absent
  double sample_rate(int signal) const;
  std::vector<double> physical(int signal) const;
  // Raw byte stream of an annotation signal (little-endian per 16-bit slot).
  std::vector<char> byte_stream(int signal) const;
};

EdfFile read_edf(const std::string& path);

// One timestamped annotation from an EDF+ annotation signal.
struct TalAnnotation {
  double onset = 0.0;     // seconds from recording start
  double duration = 0.0;  // 0 when the TAL carries none
  std::string text;
};

// All annotations (excluding the bare per-record timekeeping TALs) from every
// "EDF Annotations" signal in the file, in file order.
std::vector<TalAnnotation> read_tal_annotations(const EdfFile& edf);

}  // namespace iitnet::data
