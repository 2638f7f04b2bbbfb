#include "iitnet/data/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "iitnet/data/edf.hpp"
#include "iitnet/data/resample.hpp"

namespace fs = std::filesystem;

namespace iitnet::data {

const char* dataset_kind_name(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::SleepEdf: return "sleepedf";
    case DatasetKind::Mass: return "mass";
    case DatasetKind::Shhs: return "shhs";
    case DatasetKind::Generic: return "generic";
  }
  return "?";
}

DatasetKind dataset_kind_from_name(const std::string& name) {
  for (DatasetKind k : {DatasetKind::SleepEdf, DatasetKind::Mass, DatasetKind::Shhs,
                        DatasetKind::Generic}) {
    if (name == dataset_kind_name(k)) return k;
  }
  throw std::invalid_argument("unknown dataset kind \"" + name +
                              "\" (expected sleepedf, mass, shhs or generic)");
}

void DatasetConfig::validate() const {
  if (sequence_length < 1 || sequence_length > 10)
    throw std::invalid_argument("sequence length must be in [1,10], got " +
                                std::to_string(sequence_length));
  if (wake_trim_epochs < 0)
    throw std::invalid_argument("wake_trim_epochs must be non-negative");
  if (!(sample_rate > 0.0))
    throw std::invalid_argument("sample_rate must be positive");
  if (channel.empty()) throw std::invalid_argument("channel must be named");
}

namespace {

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

// SleepEDF file stems look like SC4ssNEn (ss = subject, N = night); both
// nights of a subject share the first five characters.
std::string sleepedf_subject(const std::string& stem) {
  const std::string base = stem.size() >= 4 && ends_with(stem, "-PSG")
                               ? stem.substr(0, stem.size() - 4)
                               : stem;
  return base.size() >= 5 ? base.substr(0, 5) : base;
}

fs::path sleepedf_hypnogram_path(const fs::path& psg) {
  const std::string stem = psg.stem().string();
  const std::string base =
      ends_with(stem, "-PSG") ? stem.substr(0, stem.size() - 4) : stem;
  const fs::path exact = psg.parent_path() / (base + "-Hypnogram.edf");
  if (fs::exists(exact)) return exact;
  // Hypnogram stems differ from the PSG stem in the final characters
  // (scorer initial); match on the shared 7-character prefix.
  const std::string prefix = base.substr(0, std::min<size_t>(7, base.size()));
  for (const auto& entry : fs::directory_iterator(psg.parent_path())) {
    const std::string name = entry.path().filename().string();
    if (name.rfind(prefix, 0) == 0 && ends_with(name, "-Hypnogram.edf"))
      return entry.path();
  }
  throw IngestError("no hypnogram sidecar found for " + psg.string());
}

fs::path mass_annotation_path(const fs::path& psg) {
  const std::string stem = psg.stem().string();
  std::string base = stem;
  if (ends_with(base, " PSG")) base = base.substr(0, base.size() - 4);
  else if (ends_with(base, "-PSG")) base = base.substr(0, base.size() - 4);
  for (const std::string& candidate :
       {base + " Annotations.edf", base + "-Annotations.edf"}) {
    const fs::path p = psg.parent_path() / candidate;
    if (fs::exists(p)) return p;
  }
  throw IngestError("no annotation sidecar found for " + psg.string());
}

fs::path shhs_annotation_path(const fs::path& psg) {
  const std::string stem = psg.stem().string();
  for (const std::string& candidate : {stem + "-profusion.xml", stem + ".xml"}) {
    const fs::path p = psg.parent_path() / candidate;
    if (fs::exists(p)) return p;
  }
  throw IngestError("no staging XML found for " + psg.string());
}

fs::path generic_label_path(const fs::path& psg) {
  const fs::path p = psg.parent_path() / (psg.stem().string() + ".labels.txt");
  if (fs::exists(p)) return p;
  throw IngestError("no labels sidecar found for " + psg.string());
}

long long to_index(double seconds, double rate) {
  return std::llround(seconds * rate);
}

// SleepEDF hypnograms annotate whole stage blocks; expand each block into
// 30-s epochs. Block durations must tile exactly.
std::vector<EpochAnnotation> expand_stage_blocks(const std::vector<TalAnnotation>& tals,
                                                 double rate,
                                                 const std::string& source) {
  std::vector<EpochAnnotation> out;
  for (const auto& t : tals) {
    const double n_epochs = t.duration / 30.0;
    if (std::abs(n_epochs - std::round(n_epochs)) > 1e-9)
      throw IngestError("annotation duration " + std::to_string(t.duration) +
                        " s is not a multiple of 30 s in " + source);
    const auto n = static_cast<long long>(std::llround(n_epochs));
    for (long long k = 0; k < n; ++k)
      out.push_back({to_index(t.onset + 30.0 * static_cast<double>(k), rate), t.text});
  }
  return out;
}

// MASS annotation files carry one TAL per scored page.
std::vector<EpochAnnotation> mass_pages(const std::vector<TalAnnotation>& tals,
                                        double rate, const std::string& source) {
  std::vector<EpochAnnotation> out;
  for (const auto& t : tals) {
    if (std::abs(t.duration - 30.0) > 1e-9)
      throw IngestError("scored page of " + std::to_string(t.duration) +
                        " s (this pipeline requires 30-s epochs) in " + source);
    out.push_back({to_index(t.onset, rate), t.text});
  }
  return out;
}

std::vector<EpochAnnotation> shhs_stages(const std::string& xml_path, double rate) {
  std::ifstream is(xml_path);
  if (!is) throw IngestError("cannot open staging XML " + xml_path);
  std::stringstream ss;
  ss << is.rdbuf();
  const std::string xml = ss.str();
  std::vector<EpochAnnotation> out;
  const std::string open = "<SleepStage>", close = "</SleepStage>";
  size_t pos = 0;
  long long epoch = 0;
  while ((pos = xml.find(open, pos)) != std::string::npos) {
    pos += open.size();
    const size_t end = xml.find(close, pos);
    if (end == std::string::npos)
      throw IngestError("unterminated SleepStage element in " + xml_path);
    std::string token = xml.substr(pos, end - pos);
    token.erase(std::remove_if(token.begin(), token.end(),
                               [](unsigned char c) { return std::isspace(c) != 0; }),
                token.end());
    out.push_back({to_index(30.0 * static_cast<double>(epoch), rate), token});
    ++epoch;
    pos = end + close.size();
  }
  return out;
}

std::vector<EpochAnnotation> generic_labels(const std::string& txt_path, double rate) {
  std::ifstream is(txt_path);
  if (!is) throw IngestError("cannot open labels file " + txt_path);
  std::vector<EpochAnnotation> out;
  std::string line;
  long long epoch = 0;
  while (std::getline(is, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (line.empty()) continue;
    out.push_back({to_index(30.0 * static_cast<double>(epoch), rate), line});
    ++epoch;
  }
  return out;
}

std::string subject_for(const fs::path& psg, DatasetKind kind) {
  const std::string stem = psg.stem().string();
  switch (kind) {
    case DatasetKind::SleepEdf:
      return sleepedf_subject(stem);
    case DatasetKind::Mass:
    case DatasetKind::Shhs:
      return stem;  // one recording per subject
    case DatasetKind::Generic: {
      const size_t us = stem.find('_');
      return us == std::string::npos ? stem : stem.substr(0, us);
    }
  }
  return stem;
}

}  // namespace

RawRecording read_recording(const std::string& path, const DatasetConfig& config) {
  config.validate();
  const EdfFile edf = read_edf(path);
  const int sig = edf.find_signal(config.channel);
  if (sig < 0) throw MissingChannelError(config.channel, path);

  RawRecording rec;
  rec.source_path = path;
  rec.channel_name = config.channel;
  rec.subject_id = subject_for(fs::path(path), config.kind);
  rec.signal = edf.physical(sig);
  const double native_rate = edf.sample_rate(sig);
  if (std::abs(native_rate - config.sample_rate) > 1e-9) {
    rec.signal = resample(rec.signal, native_rate, config.sample_rate);
  }
  rec.sample_rate = config.sample_rate;

  switch (config.kind) {
    case DatasetKind::SleepEdf: {
      const fs::path ann = sleepedf_hypnogram_path(path);
      rec.annotation_path = ann.string();
      rec.epoch_annotations = expand_stage_blocks(
          read_tal_annotations(read_edf(ann.string())), rec.sample_rate, ann.string());
      break;
    }
    case DatasetKind::Mass: {
      const fs::path ann = mass_annotation_path(path);
      rec.annotation_path = ann.string();
      rec.epoch_annotations = mass_pages(read_tal_annotations(read_edf(ann.string())),
                                         rec.sample_rate, ann.string());
      break;
    }
    case DatasetKind::Shhs: {
      const fs::path ann = shhs_annotation_path(path);
      rec.annotation_path = ann.string();
      rec.epoch_annotations = shhs_stages(ann.string(), rec.sample_rate);
      break;
    }
    case DatasetKind::Generic: {
      const fs::path ann = generic_label_path(path);
      rec.annotation_path = ann.string();
      rec.epoch_annotations = generic_labels(ann.string(), rec.sample_rate);
      break;
    }
  }
  return rec;
}

std::vector<LabeledEpoch> extract_epochs(const RawRecording& rec,
                                         const DatasetConfig& config) {
  config.validate();
  const auto epoch_len = static_cast<long long>(std::llround(30.0 * rec.sample_rate));
  const std::string& source =
      rec.annotation_path.empty() ? rec.source_path : rec.annotation_path;

  std::vector<LabeledEpoch> kept;
  for (const auto& ann : rec.epoch_annotations) {
    const HarmonizedLabel label = harmonize_label(ann.raw_label, source);
    if (label.is_excluded()) continue;
    const long long slot = ann.start_index / epoch_len;
    if (ann.start_index < 0 ||
        ann.start_index + epoch_len > static_cast<long long>(rec.signal.size())) {
      throw IngestError("epoch " + std::to_string(slot) +
                        " extends past the end of the signal in " + rec.source_path);
    }
    LabeledEpoch e;
    e.samples.assign(rec.signal.begin() + ann.start_index,
                     rec.signal.begin() + ann.start_index + epoch_len);
    e.label = *label.stage;
    e.subject_id = rec.subject_id;
    e.position = static_cast<int>(slot);
    kept.push_back(std::move(e));
  }

  if (!config.trims_wake() || kept.empty()) return kept;

  // Keep at most wake_trim_epochs epochs before the first and after the last
  // non-wake epoch. Nights with no sleep have no anchor and pass unchanged.
  long long first = -1, last = -1;
  for (size_t i = 0; i < kept.size(); ++i) {
    if (kept[i].label != Stage::Wake) {
      if (first < 0) first = static_cast<long long>(i);
      last = static_cast<long long>(i);
    }
  }
  if (first < 0) return kept;
  const long long lo = std::max(0LL, first - config.wake_trim_epochs);
  const long long hi = std::min(static_cast<long long>(kept.size()) - 1,
                                last + config.wake_trim_epochs);
  return {kept.begin() + lo, kept.begin() + hi + 1};
}

std::vector<SequenceSample> make_sequences(const std::vector<LabeledEpoch>& epochs,
                                           int sequence_length,
                                           bool skip_short_prefix) {
  if (sequence_length < 1)
    throw std::invalid_argument("sequence length must be at least 1");
  std::vector<SequenceSample> out;
  const auto n = static_cast<int>(epochs.size());
  for (int t = skip_short_prefix ? sequence_length - 1 : 0; t < n; ++t) {
    SequenceSample s;
    s.epochs.reserve(static_cast<size_t>(sequence_length));
    for (int i = t - sequence_length + 1; i <= t; ++i)
      s.epochs.push_back(&epochs[static_cast<size_t>(std::max(i, 0))]);
    s.target_label = epochs[static_cast<size_t>(t)].label;
    out.push_back(std::move(s));
  }
  return out;
}

NightRecord ingest_recording(const std::string& path, const DatasetConfig& config) {
  const RawRecording rec = read_recording(path, config);
  NightRecord night;
  night.subject_id = rec.subject_id;
  night.source_path = rec.source_path;
  night.sample_rate = rec.sample_rate;
  night.epochs = extract_epochs(rec, config);
  return night;
}

std::vector<std::string> discover_recordings(const std::string& dir, DatasetKind kind) {
  std::vector<std::string> out;
  if (!fs::is_directory(dir)) throw IngestError("not a directory: " + dir);
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const fs::path& p = entry.path();
    if (p.extension() != ".edf") continue;
    const std::string stem = p.stem().string();
    switch (kind) {
      case DatasetKind::SleepEdf:
        if (ends_with(stem, "-PSG")) out.push_back(p.string());
        break;
      case DatasetKind::Mass:
        if (ends_with(stem, " PSG")) out.push_back(p.string());
        break;
      case DatasetKind::Shhs:
        if (fs::exists(p.parent_path() / (stem + "-profusion.xml")) ||
            fs::exists(p.parent_path() / (stem + ".xml")))
          out.push_back(p.string());
        break;
      case DatasetKind::Generic:
        if (fs::exists(p.parent_path() / (stem + ".labels.txt"))) out.push_back(p.string());
        break;
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace iitnet::data
