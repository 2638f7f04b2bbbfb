#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "iitnet/core.hpp"
#include "iitnet/data/ingest.hpp"

namespace iitnet::synth {

// Oscillation assigned to one stage: a sinusoid at freq_hz whose phase is
// redrawn per epoch, plus low-passed noise scaled by the spec's noise level.
struct StageSignal {
  double freq_hz = 1.0;
  double amplitude = 1.0;
};

struct SyntheticSpec {
  int n_subjects = 8;
  int epochs_per_subject = 200;
  double sample_rate = 10.0;
  std::array<StageSignal, kNumStages> class_signal_map;
  // Row-stochastic stage transition kernel, rows/cols in Stage order.
  std::array<std::array<double, kNumStages>, kNumStages> transition_kernel;
  double noise_level = 0.1;

  void validate() const;  // throws std::invalid_argument

  nlohmann::json to_json() const;
  static SyntheticSpec from_json(const nlohmann::json& j);
};

// Presets used by the end-to-end checks.
// Distinct oscillation per stage, low noise: epochs are separable alone.
SyntheticSpec separable_spec();
// N2 and REM share one oscillation; the kernel admits N2 only after N1 and
// REM only after N3, so only inter-epoch context can split the pair.
SyntheticSpec ambiguous_markov_spec();
// Same ambiguous signals but i.i.d. stage draws: context carries nothing.
SyntheticSpec iid_ambiguous_spec();

// One recording per subject; deterministic in (spec, seed) and per-subject
// independent (subject k's data does not depend on n_subjects).
std::vector<data::RawRecording> generate(const SyntheticSpec& spec, uint64_t seed);

// Same data already cut into labeled epochs.
std::vector<data::NightRecord> generate_nights(const SyntheticSpec& spec, uint64_t seed);

// Writes one night cache file per subject into `dir`; returns the paths.
std::vector<std::string> write_synthetic_cache(const SyntheticSpec& spec, uint64_t seed,
                                               const std::string& dir);

}  // namespace iitnet::synth
