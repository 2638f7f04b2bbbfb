#include "iitnet/data/cache.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <vector>

namespace iitnet::data {

namespace {

constexpr char kMagic[8] = {'I', 'I', 'T', 'C', 'A', 'C', 'H', 'E'};
constexpr uint8_t kVersion = 1;

void put_u32(std::ofstream& os, uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 4);
}

void put_i32(std::ofstream& os, int32_t v) { put_u32(os, static_cast<uint32_t>(v)); }

void put_f64(std::ofstream& os, double v) {
  static_assert(sizeof(double) == 8);
  os.write(reinterpret_cast<const char*>(&v), 8);
}

void put_string(std::ofstream& os, const std::string& s) {
  put_u32(os, static_cast<uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

uint32_t get_u32(std::ifstream& is, const std::string& path) {
  char b[4];
  if (!is.read(b, 4)) throw CacheError("truncated cache file: " + path);
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i)
    v |= static_cast<uint32_t>(static_cast<uint8_t>(b[i])) << (8 * i);
  return v;
}

double get_f64(std::ifstream& is, const std::string& path) {
  double v;
  if (!is.read(reinterpret_cast<char*>(&v), 8))
    throw CacheError("truncated cache file: " + path);
  return v;
}

std::string get_string(std::ifstream& is, const std::string& path) {
  const uint32_t n = get_u32(is, path);
  if (n > (1u << 20)) throw CacheError("implausible string length in " + path);
  std::string s(n, '\0');
  if (n && !is.read(s.data(), n)) throw CacheError("truncated cache file: " + path);
  return s;
}

}  // namespace

uint64_t fnv1a64(const void* data, size_t n, uint64_t hash) {
  const auto* p = static_cast<const uint8_t*>(data);
  for (size_t i = 0; i < n; ++i) {
    hash ^= p[i];
    hash *= 1099511628211ULL;
  }
  return hash;
}

uint64_t fnv1a64_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CacheError("cannot open " + path);
  uint64_t hash = kFnvOffset;
  char buf[1 << 16];
  while (is.read(buf, sizeof(buf)) || is.gcount() > 0) {
    hash = fnv1a64(buf, static_cast<size_t>(is.gcount()), hash);
    if (is.eof()) break;
  }
  return hash;
}

void write_night_cache(const std::string& path, const NightRecord& night) {
  const size_t epoch_samples = night.epochs.empty() ? 0 : night.epochs[0].samples.size();
  for (const auto& e : night.epochs) {
    if (e.samples.size() != epoch_samples)
      throw CacheError("ragged epoch lengths while writing " + path);
  }
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw CacheError("cannot create " + path);
  os.write(kMagic, 8);
  os.put(static_cast<char>(kVersion));
  put_string(os, night.subject_id);
  put_string(os, night.source_path);
  put_f64(os, night.sample_rate);
  put_u32(os, static_cast<uint32_t>(night.epochs.size()));
  put_u32(os, static_cast<uint32_t>(epoch_samples));
  for (const auto& e : night.epochs) {
    os.put(static_cast<char>(static_cast<int>(e.label)));
    put_i32(os, e.position);
    os.write(reinterpret_cast<const char*>(e.samples.data()),
             static_cast<std::streamsize>(8 * epoch_samples));
  }
  if (!os) throw CacheError("write failed for " + path);
}

NightRecord read_night_cache(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CacheError("cannot open " + path);
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0)
    throw CacheError("not a night cache file: " + path);
  const int version = is.get();
  if (version != kVersion)
    throw CacheError("unsupported cache version " + std::to_string(version) + " in " +
                     path);
  NightRecord night;
  night.subject_id = get_string(is, path);
  night.source_path = get_string(is, path);
  night.sample_rate = get_f64(is, path);
  const uint32_t count = get_u32(is, path);
  const uint32_t epoch_samples = get_u32(is, path);
  night.epochs.resize(count);
  for (uint32_t i = 0; i < count; ++i) {
    auto& e = night.epochs[i];
    const int label = is.get();
    if (label < 0 || label >= kNumStages)
      throw CacheError("corrupt stage label in " + path);
    e.label = stage_from_index(label);
    e.position = static_cast<int>(get_u32(is, path));
    e.subject_id = night.subject_id;
    e.samples.resize(epoch_samples);
    if (!is.read(reinterpret_cast<char*>(e.samples.data()),
                 static_cast<std::streamsize>(8 * epoch_samples)))
      throw CacheError("truncated cache file: " + path);
  }
  is.peek();
  if (!is.eof()) throw CacheError("trailing bytes in cache file: " + path);
  return night;
}

std::string cache_file_name(const std::string& source_path,
                            const DatasetConfig& config) {
  uint64_t h = fnv1a64_file(source_path);
  const std::string tag = std::string(dataset_kind_name(config.kind)) + "|" +
                          config.channel + "|" + std::to_string(config.sample_rate) +
                          "|" + std::to_string(config.wake_trim_epochs);
  h = fnv1a64(tag.data(), tag.size(), h);
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
  return std::filesystem::path(source_path).stem().string() + "-" + hex + ".night";
}

}  // namespace iitnet::data
