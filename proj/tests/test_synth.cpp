#include <cmath>
#include <complex>
#include <filesystem>
#include <vector>

#include "doctest.h"
#include "iitnet/data/cache.hpp"
#include "iitnet/synth/generator.hpp"

using namespace iitnet;
namespace fs = std::filesystem;

namespace {

// Power of `x` at frequency `hz` via direct Fourier projection; an oracle
// for "each stage carries its own oscillation" that shares nothing with the
// generator's synthesis loop.
double band_power(const std::vector<double>& x, size_t lo, size_t n, double hz,
                  double rate) {
  std::complex<double> acc(0.0, 0.0);
  for (size_t t = 0; t < n; ++t) {
    const double ang = 2.0 * M_PI * hz * static_cast<double>(t) / rate;
    acc += x[lo + t] * std::complex<double>(std::cos(ang), -std::sin(ang));
  }
  return std::norm(acc);
}

}  // namespace

TEST_CASE("generation is deterministic per seed and independent per subject") {
  auto spec = synth::separable_spec();
  spec.n_subjects = 3;
  spec.epochs_per_subject = 8;

  const auto a = synth::generate(spec, 42);
  const auto b = synth::generate(spec, 42);
  REQUIRE(a.size() == 3);
  for (size_t s = 0; s < a.size(); ++s) {
    REQUIRE(a[s].signal.size() == b[s].signal.size());
    for (size_t i = 0; i < a[s].signal.size(); ++i)
      CHECK(a[s].signal[i] == b[s].signal[i]);
    REQUIRE(a[s].epoch_annotations.size() == b[s].epoch_annotations.size());
    for (size_t i = 0; i < a[s].epoch_annotations.size(); ++i)
      CHECK(a[s].epoch_annotations[i].raw_label == b[s].epoch_annotations[i].raw_label);
  }

  const auto c = synth::generate(spec, 43);
  CHECK(a[0].signal != c[0].signal);

  // Subject 1 is unchanged when the cohort shrinks around it.
  auto smaller = spec;
  smaller.n_subjects = 2;
  const auto d = synth::generate(smaller, 42);
  CHECK(a[1].signal == d[1].signal);
}

TEST_CASE("invalid kernels and specs are rejected") {
  auto spec = synth::separable_spec();
  spec.transition_kernel[2][2] += 0.5;
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);

  spec = synth::separable_spec();
  spec.transition_kernel[0][0] -= 0.3;
  spec.transition_kernel[0][1] = -0.1;
  spec.transition_kernel[0][2] = 0.6;
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);

  spec = synth::separable_spec();
  spec.n_subjects = 0;
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);

  CHECK_NOTHROW(synth::separable_spec().validate());
  CHECK_NOTHROW(synth::ambiguous_markov_spec().validate());
  CHECK_NOTHROW(synth::iid_ambiguous_spec().validate());
}

TEST_CASE("strong self-transitions give geometric run lengths") {
  auto spec = synth::separable_spec();
  spec.n_subjects = 1;
  spec.epochs_per_subject = 10000;
  spec.sample_rate = 1.0;  // tiny epochs, we only need the labels
  const double p_self = 0.8;
  for (int i = 0; i < kNumStages; ++i) {
    for (int j = 0; j < kNumStages; ++j)
      spec.transition_kernel[i][j] = i == j ? p_self : (1.0 - p_self) / 4.0;
  }

  const auto recs = synth::generate(spec, 7);
  REQUIRE(recs.size() == 1);
  const auto& anns = recs[0].epoch_annotations;
  long long runs = 0;
  for (size_t i = 0; i < anns.size(); ++i) {
    if (i == 0 || anns[i].raw_label != anns[i - 1].raw_label) ++runs;
  }
  const double mean_run = static_cast<double>(anns.size()) / static_cast<double>(runs);
  const double want = 1.0 / (1.0 - p_self);
  CHECK(std::abs(mean_run - want) / want < 0.10);
}

TEST_CASE("separable stages dominate their own oscillation band") {
  auto spec = synth::separable_spec();
  spec.n_subjects = 1;
  spec.epochs_per_subject = 100;
  const auto recs = synth::generate(spec, 11);
  const auto epoch_len = static_cast<size_t>(std::llround(30.0 * spec.sample_rate));

  int correct = 0;
  for (size_t e = 0; e < recs[0].epoch_annotations.size(); ++e) {
    int best = -1;
    double best_power = -1.0;
    for (int s = 0; s < kNumStages; ++s) {
      const double p = band_power(recs[0].signal, e * epoch_len, epoch_len,
                                  spec.class_signal_map[s].freq_hz, spec.sample_rate);
      if (p > best_power) {
        best_power = p;
        best = s;
      }
    }
    if (stage_name(static_cast<Stage>(best)) == recs[0].epoch_annotations[e].raw_label)
      ++correct;
  }
  CHECK(correct >= 99);
}

TEST_CASE("ambiguous preset makes the pair identical yet context-resolvable") {
  const auto spec = synth::ambiguous_markov_spec();
  const auto n2 = static_cast<size_t>(Stage::N2), rem = static_cast<size_t>(Stage::Rem);
  CHECK(spec.class_signal_map[n2].freq_hz == spec.class_signal_map[rem].freq_hz);
  CHECK(spec.class_signal_map[n2].amplitude == spec.class_signal_map[rem].amplitude);
  // The pair is entered from disjoint predecessors.
  for (int i = 0; i < kNumStages; ++i) {
    const bool feeds_n2 = spec.transition_kernel[i][n2] > 0.0 && i != static_cast<int>(n2);
    const bool feeds_rem =
        spec.transition_kernel[i][rem] > 0.0 && i != static_cast<int>(rem);
    CHECK(!(feeds_n2 && feeds_rem));
  }
  // And the i.i.d. variant really is row-constant.
  const auto iid = synth::iid_ambiguous_spec();
  for (int i = 1; i < kNumStages; ++i)
    CHECK(iid.transition_kernel[i] == iid.transition_kernel[0]);
}

TEST_CASE("synthetic cache files round trip through the night cache reader") {
  auto spec = synth::separable_spec();
  spec.n_subjects = 2;
  spec.epochs_per_subject = 6;
  const auto dir = fs::temp_directory_path() / "iitnet_synth_cache";
  fs::remove_all(dir);

  const auto paths = synth::write_synthetic_cache(spec, 3, dir.string());
  REQUIRE(paths.size() == 2);
  const auto nights = synth::generate_nights(spec, 3);
  for (size_t s = 0; s < paths.size(); ++s) {
    const auto night = data::read_night_cache(paths[s]);
    CHECK(night.subject_id == nights[s].subject_id);
    REQUIRE(night.epochs.size() == nights[s].epochs.size());
    for (size_t e = 0; e < night.epochs.size(); ++e) {
      CHECK(night.epochs[e].label == nights[s].epochs[e].label);
      CHECK(night.epochs[e].samples == nights[s].epochs[e].samples);
    }
  }
}

TEST_CASE("every generated epoch is labeled and none are excluded") {
  auto spec = synth::ambiguous_markov_spec();
  spec.n_subjects = 2;
  spec.epochs_per_subject = 40;
  for (const auto& night : synth::generate_nights(spec, 5)) {
    CHECK(night.epochs.size() == 40);
    for (size_t e = 0; e < night.epochs.size(); ++e)
      CHECK(night.epochs[e].position == static_cast<int>(e));
  }
}
