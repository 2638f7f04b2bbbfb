#include "iitnet/synth/generator.hpp"

#include <cmath>
#include <filesystem>
#include <random>
#include <stdexcept>

#include "iitnet/data/cache.hpp"

namespace iitnet::synth {

void SyntheticSpec::validate() const {
  if (n_subjects < 1) throw std::invalid_argument("n_subjects must be positive");
  if (epochs_per_subject < 1)
    throw std::invalid_argument("epochs_per_subject must be positive");
  if (!(sample_rate > 0.0)) throw std::invalid_argument("sample_rate must be positive");
  if (noise_level < 0.0) throw std::invalid_argument("noise_level must be non-negative");
  for (int i = 0; i < kNumStages; ++i) {
    double row = 0.0;
    for (int j = 0; j < kNumStages; ++j) {
      if (transition_kernel[i][j] < 0.0)
        throw std::invalid_argument("transition kernel has a negative entry");
      row += transition_kernel[i][j];
    }
    if (std::abs(row - 1.0) > 1e-9)
      throw std::invalid_argument("transition kernel row " + std::to_string(i) +
                                  " sums to " + std::to_string(row) + ", expected 1");
    if (!(class_signal_map[i].freq_hz > 0.0))
      throw std::invalid_argument("stage oscillation frequencies must be positive");
  }
}

nlohmann::json SyntheticSpec::to_json() const {
  nlohmann::json signals = nlohmann::json::array();
  nlohmann::json kernel = nlohmann::json::array();
  for (int i = 0; i < kNumStages; ++i) {
    signals.push_back({{"freq_hz", class_signal_map[i].freq_hz},
                       {"amplitude", class_signal_map[i].amplitude}});
    kernel.push_back(transition_kernel[i]);
  }
  return {{"n_subjects", n_subjects},
          {"epochs_per_subject", epochs_per_subject},
          {"sample_rate", sample_rate},
          {"class_signal_map", signals},
          {"transition_kernel", kernel},
          {"noise_level", noise_level}};
}

SyntheticSpec SyntheticSpec::from_json(const nlohmann::json& j) {
  SyntheticSpec s;
  s.n_subjects = j.at("n_subjects").get<int>();
  s.epochs_per_subject = j.at("epochs_per_subject").get<int>();
  s.sample_rate = j.at("sample_rate").get<double>();
  s.noise_level = j.at("noise_level").get<double>();
  for (int i = 0; i < kNumStages; ++i) {
    const nlohmann::json& sig = j.at("class_signal_map").at(i);
    s.class_signal_map[i] = {sig.at("freq_hz").get<double>(),
                             sig.at("amplitude").get<double>()};
    s.transition_kernel[i] =
        j.at("transition_kernel").at(i).get<std::array<double, kNumStages>>();
  }
  s.validate();
  return s;
}

SyntheticSpec separable_spec() {
  SyntheticSpec s;
  // Distinct, well-separated in-band frequencies at the default 10 Hz rate.
  s.class_signal_map = {{{4.0, 1.0}, {2.6, 1.0}, {1.8, 1.0}, {0.7, 1.0}, {3.3, 1.0}}};
  s.noise_level = 0.05;
  s.transition_kernel = {{{0.80, 0.20, 0.00, 0.00, 0.00},
                          {0.05, 0.60, 0.30, 0.00, 0.05},
                          {0.00, 0.05, 0.70, 0.20, 0.05},
                          {0.00, 0.00, 0.25, 0.70, 0.05},
                          {0.15, 0.05, 0.10, 0.00, 0.70}}};
  return s;
}

SyntheticSpec ambiguous_markov_spec() {
  SyntheticSpec s = separable_spec();
  // N2 and REM are indistinguishable in isolation...
  s.class_signal_map[static_cast<int>(Stage::Rem)] =
      s.class_signal_map[static_cast<int>(Stage::N2)];
  // ...but N2 is only ever entered from N1 and REM only from N3, so a short
  // look-back resolves the pair.
  s.transition_kernel = {{{0.60, 0.40, 0.00, 0.00, 0.00},
                          {0.05, 0.35, 0.60, 0.00, 0.00},
                          {0.00, 0.00, 0.60, 0.40, 0.00},
                          {0.05, 0.00, 0.00, 0.55, 0.40},
                          {0.35, 0.05, 0.00, 0.00, 0.60}}};
  return s;
}

SyntheticSpec iid_ambiguous_spec() {
  SyntheticSpec s = ambiguous_markov_spec();
  // Every row identical, so the past is uninformative. The ambiguous pair is
  // deliberately imbalanced (N2 three times as common as REM): any competent
  // model resolves the indistinguishable signal the same way regardless of
  // how much context it sees, keeping accuracy independent of L.
  for (int i = 0; i < kNumStages; ++i)
    s.transition_kernel[static_cast<size_t>(i)] = {0.20, 0.20, 0.30, 0.20, 0.10};
  return s;
}

namespace {

Stage draw_stage(const std::array<double, kNumStages>& row, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double u = unit(rng);
  double cum = 0.0;
  for (int j = 0; j < kNumStages; ++j) {
    cum += row[static_cast<size_t>(j)];
    if (u < cum) return static_cast<Stage>(j);
  }
  return static_cast<Stage>(kNumStages - 1);
}

}  // namespace

std::vector<data::RawRecording> generate(const SyntheticSpec& spec, uint64_t seed) {
  spec.validate();
  std::vector<data::RawRecording> out;
  const auto epoch_len = static_cast<long long>(std::llround(30.0 * spec.sample_rate));

  for (int subject = 0; subject < spec.n_subjects; ++subject) {
    std::seed_seq sseq{seed, static_cast<uint64_t>(subject)};
    std::mt19937_64 rng(sseq);
    std::uniform_real_distribution<double> phase_dist(0.0, 2.0 * M_PI);
    std::normal_distribution<double> gauss(0.0, 1.0);

    data::RawRecording rec;
    rec.sample_rate = spec.sample_rate;
    rec.channel_name = "SYNTH";
    rec.subject_id = "synthetic" + std::to_string(subject);
    rec.source_path = "<synthetic seed=" + std::to_string(seed) + " subject=" +
                      std::to_string(subject) + ">";
    rec.signal.reserve(static_cast<size_t>(epoch_len) * spec.epochs_per_subject);

    // Stage sequence: start from a uniform draw, then walk the kernel.
    Stage stage = draw_stage({0.2, 0.2, 0.2, 0.2, 0.2}, rng);
    double lp = 0.0;  // one-pole low-pass state carries across epochs
    for (int e = 0; e < spec.epochs_per_subject; ++e) {
      if (e > 0) stage = draw_stage(spec.transition_kernel[static_cast<size_t>(
                                        static_cast<int>(stage))],
                                    rng);
      const StageSignal& sig = spec.class_signal_map[static_cast<size_t>(
          static_cast<int>(stage))];
      const double phase = phase_dist(rng);
      for (long long t = 0; t < epoch_len; ++t) {
        lp = 0.7 * lp + 0.3 * gauss(rng);
        const double osc = sig.amplitude *
            std::sin(2.0 * M_PI * sig.freq_hz * static_cast<double>(t) /
                         spec.sample_rate + phase);
        rec.signal.push_back(osc + spec.noise_level * lp);
      }
      rec.epoch_annotations.push_back(
          {static_cast<long long>(e) * epoch_len, stage_name(stage)});
    }
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<data::NightRecord> generate_nights(const SyntheticSpec& spec, uint64_t seed) {
  data::DatasetConfig config;
  config.kind = data::DatasetKind::Generic;
  config.channel = "SYNTH";
  config.sample_rate = spec.sample_rate;

  std::vector<data::NightRecord> nights;
  for (const auto& rec : generate(spec, seed)) {
    data::NightRecord night;
    night.subject_id = rec.subject_id;
    night.source_path = rec.source_path;
    night.sample_rate = rec.sample_rate;
    night.epochs = data::extract_epochs(rec, config);
    nights.push_back(std::move(night));
  }
  return nights;
}

std::vector<std::string> write_synthetic_cache(const SyntheticSpec& spec, uint64_t seed,
                                               const std::string& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::string> paths;
  for (const auto& night : generate_nights(spec, seed)) {
    const auto path =
        (std::filesystem::path(dir) / (night.subject_id + ".night")).string();
    data::write_night_cache(path, night);
    paths.push_back(path);
  }
  return paths;
}

}  // namespace iitnet::synth
