#include "iitnet/data/edf.hpp"

#include <cstring>
#include <fstream>

namespace iitnet::data {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(' ');
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(' ');
  return s.substr(b, e - b + 1);
}

double parse_num(const std::string& field, const std::string& what,
                 const std::string& path) {
  const std::string t = trim(field);
  try {
    size_t used = 0;
    const double v = std::stod(t, &used);
    if (used != t.size()) throw std::invalid_argument(t);
    return v;
  } catch (const std::exception&) {
    throw EdfError("malformed " + what + " field \"" + t + "\" in " + path);
  }
}

std::string read_field(std::istream& is, size_t n) {
  std::string s(n, '\0');
  is.read(s.data(), static_cast<std::streamsize>(n));
  return s;
}

}  // namespace

int EdfFile::find_signal(const std::string& label) const {
  for (size_t i = 0; i < signals.size(); ++i)
    if (signals[i].label == label) return static_cast<int>(i);
  return -1;
}

double EdfFile::sample_rate(int signal) const {
  return signals[static_cast<size_t>(signal)].samples_per_record / record_seconds;
}

std::vector<double> EdfFile::physical(int signal) const {
  const auto& h = signals[static_cast<size_t>(signal)];
  const auto& d = digital[static_cast<size_t>(signal)];
  const double scale =
      (h.phys_max - h.phys_min) / static_cast<double>(h.dig_max - h.dig_min);
  std::vector<double> out(d.size());
  for (size_t i = 0; i < d.size(); ++i)
    out[i] = h.phys_min + (static_cast<double>(d[i]) - h.dig_min) * scale;
  return out;
}

std::vector<char> EdfFile::byte_stream(int signal) const {
  const auto& d = digital[static_cast<size_t>(signal)];
  std::vector<char> out(d.size() * 2);
  for (size_t i = 0; i < d.size(); ++i) {
    const auto u = static_cast<uint16_t>(d[i]);
    out[2 * i] = static_cast<char>(u & 0xff);
    out[2 * i + 1] = static_cast<char>(u >> 8);
  }
  return out;
}

EdfFile read_edf(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw EdfError("cannot open " + path);
  is.seekg(0, std::ios::end);
  const auto file_size = static_cast<uint64_t>(is.tellg());
  is.seekg(0);
  if (file_size < 256) throw EdfError("truncated header (file smaller than 256 bytes): " + path);

  EdfFile edf;
  edf.path = path;
  edf.version = trim(read_field(is, 8));
  edf.patient_id = trim(read_field(is, 80));
  edf.recording_id = trim(read_field(is, 80));
  edf.start_date = trim(read_field(is, 8));
  edf.start_time = trim(read_field(is, 8));
  const auto header_bytes =
      static_cast<uint64_t>(parse_num(read_field(is, 8), "header size", path));
  edf.reserved = trim(read_field(is, 44));
  const auto n_records_field =
      static_cast<long long>(parse_num(read_field(is, 8), "record count", path));
  edf.record_seconds = parse_num(read_field(is, 8), "record duration", path);
  const int ns = static_cast<int>(parse_num(read_field(is, 4), "signal count", path));
  if (ns <= 0) throw EdfError("no signals declared in " + path);
  if (header_bytes != 256u * (static_cast<uint64_t>(ns) + 1))
    throw EdfError("header size field disagrees with signal count in " + path);
  if (file_size < header_bytes) throw EdfError("truncated signal headers: " + path);

  edf.signals.resize(static_cast<size_t>(ns));
  for (auto& s : edf.signals) s.label = trim(read_field(is, 16));
  for (auto& s : edf.signals) s.transducer = trim(read_field(is, 80));
  for (auto& s : edf.signals) s.dimension = trim(read_field(is, 8));
  for (auto& s : edf.signals) s.phys_min = parse_num(read_field(is, 8), "physical min", path);
  for (auto& s : edf.signals) s.phys_max = parse_num(read_field(is, 8), "physical max", path);
  for (auto& s : edf.signals)
    s.dig_min = static_cast<int>(parse_num(read_field(is, 8), "digital min", path));
  for (auto& s : edf.signals)
    s.dig_max = static_cast<int>(parse_num(read_field(is, 8), "digital max", path));
  for (auto& s : edf.signals) s.prefilter = trim(read_field(is, 80));
  for (auto& s : edf.signals)
    s.samples_per_record =
        static_cast<int>(parse_num(read_field(is, 8), "samples per record", path));
  for (auto& s : edf.signals) (void)read_field(is, 32);
  if (!is) throw EdfError("truncated signal headers: " + path);

  for (const auto& s : edf.signals) {
    if (s.samples_per_record <= 0)
      throw EdfError("non-positive samples-per-record for \"" + s.label + "\" in " + path);
    if (s.dig_max <= s.dig_min)
      throw EdfError("invalid digital range for \"" + s.label + "\" in " + path);
  }

  uint64_t record_bytes = 0;
  for (const auto& s : edf.signals)
    record_bytes += static_cast<uint64_t>(s.samples_per_record) * 2;
  const uint64_t data_bytes = file_size - header_bytes;

  if (n_records_field < 0) {
    // EDF+ allows an unknown record count; infer it from the file size.
    if (record_bytes == 0 || data_bytes % record_bytes != 0)
      throw EdfError("cannot infer record count (truncated data?): " + path);
    edf.n_records = static_cast<int>(data_bytes / record_bytes);
  } else {
    edf.n_records = static_cast<int>(n_records_field);
    const uint64_t expected = record_bytes * static_cast<uint64_t>(edf.n_records);
    if (data_bytes < expected) throw EdfError("truncated data records: " + path);
    if (data_bytes > expected)
      throw EdfError("file longer than declared records (header/sample-count mismatch): " +
                     path);
  }

  edf.digital.resize(edf.signals.size());
  for (size_t k = 0; k < edf.signals.size(); ++k)
    edf.digital[k].resize(static_cast<size_t>(edf.signals[k].samples_per_record) *
                          edf.n_records);

  std::vector<char> record(record_bytes);
  for (int r = 0; r < edf.n_records; ++r) {
    is.read(record.data(), static_cast<std::streamsize>(record_bytes));
    if (!is) throw EdfError("truncated data records: " + path);
    size_t off = 0;
    for (size_t k = 0; k < edf.signals.size(); ++k) {
      const int spr = edf.signals[k].samples_per_record;
      int16_t* dst = edf.digital[k].data() + static_cast<size_t>(r) * spr;
      for (int i = 0; i < spr; ++i) {
        const auto lo = static_cast<uint8_t>(record[off]);
        const auto hi = static_cast<uint8_t>(record[off + 1]);
        dst[i] = static_cast<int16_t>(static_cast<uint16_t>(lo) |
                                      (static_cast<uint16_t>(hi) << 8));
        off += 2;
      }
    }
  }
  return edf;
}

std::vector<TalAnnotation> read_tal_annotations(const EdfFile& edf) {
  std::vector<TalAnnotation> out;
  for (size_t k = 0; k < edf.signals.size(); ++k) {
    if (edf.signals[k].label != "EDF Annotations") continue;
    const std::vector<char> bytes = edf.byte_stream(static_cast<int>(k));

    // TALs: "+onset[\x15duration]\x14text\x14[text\x14...]\x00", zero padded.
    size_t i = 0;
    while (i < bytes.size()) {
      if (bytes[i] == '\0') {
        ++i;
        continue;
      }
      size_t end = i;
      while (end < bytes.size() && bytes[end] != '\0') ++end;
      const std::string tal(bytes.data() + i, end - i);
      i = end;

      const size_t first_sep = tal.find('\x14');
      if (first_sep == std::string::npos) continue;
      std::string time_part = tal.substr(0, first_sep);
      double duration = 0.0;
      const size_t dur_sep = time_part.find('\x15');
      if (dur_sep != std::string::npos) {
        duration = std::stod(time_part.substr(dur_sep + 1));
        time_part = time_part.substr(0, dur_sep);
      }
      const double onset = std::stod(time_part);

      size_t pos = first_sep + 1;
      while (pos <= tal.size()) {
        const size_t next = tal.find('\x14', pos);
        if (next == std::string::npos) break;
        const std::string text = tal.substr(pos, next - pos);
        if (!text.empty()) out.push_back({onset, duration, text});
        pos = next + 1;
      }
    }
  }
  return out;
}

}  // namespace iitnet::data
