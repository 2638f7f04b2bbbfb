#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include "iitnet/data/ingest.hpp"

namespace iitnet::data {

class CacheError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// FNV-1a 64-bit over a byte range / a whole file (streamed).
inline constexpr uint64_t kFnvOffset = 14695981039346656037ULL;
uint64_t fnv1a64(const void* data, size_t n, uint64_t hash = kFnvOffset);
uint64_t fnv1a64_file(const std::string& path);

// One night per file. Layout (little-endian), version 1:
//   magic "IITCACHE" | version u8 | subject u32+bytes | source u32+bytes |
//   sample_rate f64 | epoch_count u32 | epoch_samples u32 |
//   per epoch: label u8, position i32, samples f64[epoch_samples]
// All epochs in a night must share one length; the layout is independent of
// the sequence length used later.
void write_night_cache(const std::string& path, const NightRecord& night);
NightRecord read_night_cache(const std::string& path);

// Deterministic cache file name: the source file's content hash folded with
// the ingestion-relevant config fields, so a config change never reuses a
// stale night.
std::string cache_file_name(const std::string& source_path,
                            const DatasetConfig& config);

}  // namespace iitnet::data
