#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"

#include "iitnet/cli/commands.hpp"
#include "iitnet/data/cache.hpp"
#include "iitnet/data/ingest.hpp"
#include "iitnet/synth/generator.hpp"
#include "iitnet/train/checkpoint.hpp"
#include "iitnet/train/trainer.hpp"
#include "support/edf_fixtures.hpp"

using namespace iitnet;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / ("iitnet_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

int run_cli(std::vector<std::string> args, std::string* out_text = nullptr,
            std::string* err_text = nullptr) {
  std::ostringstream out, err;
  const int code = cli::run(std::move(args), out, err);
  if (out_text) *out_text = out.str();
  if (err_text) *err_text = err.str();
  return code;
}

std::string read_file(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  REQUIRE(is.good());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

json read_json(const fs::path& path) { return json::parse(read_file(path)); }

// Reduced model so the training-flavored commands stay fast.
std::string write_tiny_model_config(const fs::path& dir) {
  const json cfg = {{"encoder",
                     {{"stem_channels", 4},
                      {"blocks", {1, 1, 1, 1}},
                      {"widths", {{2, 2, 4}, {2, 2, 4}, {3, 3, 6}, {3, 3, 6}}},
                      {"dropout", 0.2}}},
                    {"hidden_dim", 6}};
  const fs::path path = dir / "tiny_model.json";
  std::ofstream(path) << cfg.dump(2);
  return path.string();
}

// One synthetic cache plus one trained single-fold checkpoint, built once and
// shared by the read-only cases below.
struct SharedRun {
  fs::path root;
  std::string cache_dir;
  std::string model_config;
  fs::path train_dir;
  std::string checkpoint;
};

const SharedRun& shared_run() {
  static const SharedRun s = [] {
    SharedRun r;
    r.root = fresh_dir("shared");
    r.cache_dir = (r.root / "cache").string();
    r.model_config = write_tiny_model_config(r.root);
    r.train_dir = r.root / "train";
    REQUIRE(run_cli({"synth", "--preset", "separable", "--subjects", "6", "--epochs", "30",
                     "--seed", "5", "--cache-dir", r.cache_dir,
                     "--out", (r.root / "synth").string()}) == cli::kExitOk);
    REQUIRE(run_cli({"train", "--protocol", "generic", "--model", "iitnet", "-L", "1",
                     "--seed", "5", "--val-fraction", "0.34", "--passes", "3", "--patience",
                     "2", "--batch", "16", "--model-config", r.model_config, "--cache-dir",
                     r.cache_dir, "--out", r.train_dir.string()}) == cli::kExitOk);
    r.checkpoint = (r.train_dir / "fold_0" / "model.ckpt").string();
    REQUIRE(fs::exists(r.checkpoint));
    return r;
  }();
  return s;
}

}  // namespace

TEST_CASE("usage surface: missing subcommand, help, bad values") {
  std::string err;
  CHECK(run_cli({}, nullptr, &err) == cli::kExitUsage);

  std::string help;
  CHECK(run_cli({"--help"}, &help) == cli::kExitOk);
  CHECK(help.find("ingest") != std::string::npos);
  CHECK(help.find("hypnogram") != std::string::npos);

  CHECK(run_cli({"stage-everything"}, nullptr, &err) == cli::kExitUsage);
  const fs::path dir = fresh_dir("usage");
  CHECK(run_cli({"train", "-L", "0", "--out", (dir / "r").string()}, nullptr, &err) ==
        cli::kExitUsage);
  CHECK(run_cli({"synth", "--preset", "mystery", "--out", (dir / "r").string()}, nullptr,
                &err) == cli::kExitUsage);
  CHECK(err.find("mystery") != std::string::npos);
}

TEST_CASE("synth writes caches, honors the env cache root and reports true counts") {
  const fs::path dir = fresh_dir("synth");
  const std::string cache_env = (dir / "env_cache").string();
  setenv("IITNET_CACHE_DIR", cache_env.c_str(), 1);
  std::string out;
  const int code = run_cli({"synth", "--preset", "separable", "--subjects", "3", "--epochs",
                            "20", "--seed", "9", "--out", (dir / "run").string()},
                           &out);
  unsetenv("IITNET_CACHE_DIR");
  REQUIRE(code == cli::kExitOk);

  // Cache landed under the env root, one night per subject.
  for (int k = 0; k < 3; ++k)
    CHECK(fs::exists(fs::path(cache_env) / ("synthetic" + std::to_string(k) + ".night")));

  // Report totals equal a direct generation of the same spec and seed.
  synth::SyntheticSpec spec = synth::separable_spec();
  spec.n_subjects = 3;
  spec.epochs_per_subject = 20;
  std::array<long long, kNumStages> expected{};
  for (const auto& night : synth::generate_nights(spec, 9))
    for (const auto& e : night.epochs) ++expected[static_cast<int>(e.label)];
  const json report = read_json(dir / "run" / "synth_report.json");
  for (int i = 0; i < kNumStages; ++i)
    CHECK(report.at("totals").at(stage_name(static_cast<Stage>(i))).get<long long>() ==
          expected[i]);

  const json manifest = read_json(dir / "run" / "manifest.json");
  CHECK(manifest.at("command") == "synth");
  CHECK(manifest.at("seed") == 9);
  CHECK(manifest.at("config").at("spec").at("n_subjects") == 3);

  // Same spec and seed into a second root: byte-identical night files.
  const std::string cache2 = (dir / "cache2").string();
  REQUIRE(run_cli({"synth", "--preset", "separable", "--subjects", "3", "--epochs", "20",
                   "--seed", "9", "--cache-dir", cache2,
                   "--out", (dir / "run2").string()}) == cli::kExitOk);
  CHECK(read_file(fs::path(cache_env) / "synthetic1.night") ==
        read_file(fs::path(cache2) / "synthetic1.night"));
}

TEST_CASE("train produces a checkpoint, reports and a re-executable manifest") {
  const SharedRun& s = shared_run();
  CHECK(fs::exists(s.train_dir / "fold_0" / "history.jsonl"));
  CHECK(fs::exists(s.train_dir / "fold_0" / "report.json"));
  CHECK(fs::exists(s.train_dir / "report.txt"));

  const json report = read_json(s.train_dir / "report.json");
  REQUIRE(report.at("folds").size() == 1);
  CHECK(report.at("folds")[0].at("fold_index") == 0);
  // Single-fold base case: the aggregate is that fold's report.
  CHECK(report.at("aggregate").at("accuracy") ==
        report.at("folds")[0].at("metrics").at("accuracy"));

  const json manifest = read_json(s.train_dir / "manifest.json");
  CHECK(manifest.at("command") == "train");
  CHECK(manifest.at("config").at("model") == "iitnet");
  CHECK(manifest.at("config").at("model_config").at("hidden_dim") == 6);
  CHECK(manifest.at("config").at("train").at("batch_size") == 16);
  REQUIRE(manifest.at("inputs").size() == 6);
  // Input hashes are real content hashes of the cache files.
  const std::string path = manifest.at("inputs")[0].at("path");
  char expected[17];
  std::snprintf(expected, sizeof(expected), "%016llx",
                static_cast<unsigned long long>(data::fnv1a64_file(path)));
  CHECK(manifest.at("inputs")[0].at("fnv1a64") == std::string(expected));

  // The checkpoint reloads into a model with the requested reduced shape.
  auto loaded = train::load_checkpoint(s.checkpoint);
  CHECK(loaded.model->seq_len() == 1);
  CHECK(loaded.model->epoch_len() == 300);

  SUBCASE("fold index outside the plan is a usage error") {
    std::string err;
    CHECK(run_cli({"train", "--protocol", "generic", "--fold", "7", "--val-fraction", "0.34",
                   "--passes", "1", "--model-config", s.model_config, "--cache-dir",
                   s.cache_dir, "--out", (s.root / "bad_fold").string()},
                  nullptr, &err) == cli::kExitUsage);
    CHECK(err.find("fold index 7") != std::string::npos);
  }

  SUBCASE("missing cache root is a data error") {
    std::string err;
    CHECK(run_cli({"train", "--cache-dir", (s.root / "nowhere").string(), "--out",
                   (s.root / "no_cache").string()},
                  nullptr, &err) == cli::kExitData);
    CHECK(err.find("does not exist") != std::string::npos);
  }
}

TEST_CASE("experiment sweeps L, emits curve data and reruns identically") {
  const SharedRun& s = shared_run();
  const fs::path dir = fresh_dir("experiment");
  std::string out;
  REQUIRE(run_cli({"experiment", "--protocol", "generic", "--model", "iitnet", "-L", "1..3",
                   "--folds", "0", "--seed", "5", "--val-fraction", "0.34", "--passes", "2",
                   "--patience", "2", "--batch", "16", "--model-config", s.model_config,
                   "--cache-dir", s.cache_dir, "--out", (dir / "sweep").string()},
                  &out) == cli::kExitOk);

  const json curve = read_json(dir / "sweep" / "curve.json");
  REQUIRE(curve.size() == 3);
  for (int i = 0; i < 3; ++i) {
    CHECK(curve[i].at("L") == i + 1);
    CHECK(fs::exists(dir / "sweep" / ("L_" + std::to_string(i + 1)) / "report.json"));
    // The curve rows mirror the per-L aggregate reports.
    const json report = read_json(dir / "sweep" / ("L_" + std::to_string(i + 1)) / "report.json");
    CHECK(curve[i].at("accuracy") == report.at("aggregate").at("accuracy"));
  }
  const std::string csv = read_file(dir / "sweep" / "curve.csv");
  CHECK(csv.rfind("L,accuracy,mf1,kappa,", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);  // header + 3 rows
  CHECK(out.find("L=2") != std::string::npos);

  SUBCASE("same seed reruns to identical curve data") {
    REQUIRE(run_cli({"experiment", "--protocol", "generic", "--model", "iitnet", "-L", "1..3",
                     "--folds", "0", "--seed", "5", "--val-fraction", "0.34", "--passes", "2",
                     "--patience", "2", "--batch", "16", "--model-config", s.model_config,
                     "--cache-dir", s.cache_dir, "--out", (dir / "again").string()}) ==
            cli::kExitOk);
    CHECK(read_file(dir / "again" / "curve.json") == read_file(dir / "sweep" / "curve.json"));
  }

  SUBCASE("L bounds are enforced") {
    std::string err;
    CHECK(run_cli({"experiment", "-L", "0", "--cache-dir", s.cache_dir, "--out",
                   (dir / "l0").string()},
                  nullptr, &err) == cli::kExitUsage);
    CHECK(err.find("sequence length") != std::string::npos);
    CHECK(run_cli({"experiment", "-L", "3..1", "--cache-dir", s.cache_dir, "--out",
                   (dir / "range").string()},
                  nullptr, &err) == cli::kExitUsage);
  }

  SUBCASE("unknown model is a usage error") {
    std::string err;
    CHECK(run_cli({"experiment", "--model", "resnet50", "-L", "1", "--cache-dir", s.cache_dir,
                   "--out", (dir / "model").string()},
                  nullptr, &err) == cli::kExitUsage);
    CHECK(err.find("resnet50") != std::string::npos);
  }
}

TEST_CASE("evaluate scores cached nights and rejects mismatched rates") {
  const SharedRun& s = shared_run();
  const fs::path dir = fresh_dir("evaluate");
  std::string out;
  REQUIRE(run_cli({"evaluate", "--checkpoint", s.checkpoint, "--cache-dir", s.cache_dir,
                   "--subjects", "synthetic0,synthetic1", "--batch", "16", "--out",
                   (dir / "run").string()},
                  &out) == cli::kExitOk);
  const json report = read_json(dir / "run" / "report.json");
  CHECK(report.at("n_epochs") == 60);
  CHECK(report.at("sequence_length") == 1);
  CHECK(out.find("rows = predicted") != std::string::npos);

  SUBCASE("unknown subjects are a data error") {
    std::string err;
    CHECK(run_cli({"evaluate", "--checkpoint", s.checkpoint, "--cache-dir", s.cache_dir,
                   "--subjects", "nobody", "--out", (dir / "none").string()},
                  nullptr, &err) == cli::kExitData);
  }

  SUBCASE("a cache at another rate is rejected with the rate-tie explanation") {
    const std::string cache5 = (dir / "cache5").string();
    REQUIRE(run_cli({"synth", "--subjects", "2", "--epochs", "10", "--rate", "5", "--seed",
                     "1", "--cache-dir", cache5, "--out", (dir / "synth5").string()}) ==
            cli::kExitOk);
    std::string err;
    CHECK(run_cli({"evaluate", "--checkpoint", s.checkpoint, "--cache-dir", cache5, "--out",
                   (dir / "mismatch").string()},
                  nullptr, &err) == cli::kExitData);
    CHECK(err.find("tied to the sampling rate") != std::string::npos);
  }
}

TEST_CASE("hypnogram emits the stage series, the plot and a consistent agreement") {
  const SharedRun& s = shared_run();
  const fs::path dir = fresh_dir("hypnogram");
  const std::string night_path = s.cache_dir + "/synthetic2.night";
  std::string out;
  REQUIRE(run_cli({"hypnogram", "--checkpoint", s.checkpoint, "--recording", night_path,
                   "--batch", "16", "--out", (dir / "labeled").string()},
                  &out) == cli::kExitOk);
  CHECK(out.find("agreement with expert labels") != std::string::npos);

  const data::NightRecord night = data::read_night_cache(night_path);
  const std::string series = read_file(dir / "labeled" / "stages.txt");
  CHECK(std::count(series.begin(), series.end(), '\n') ==
        static_cast<long>(night.epochs.size()) + 1);
  CHECK(series.rfind("# epoch predicted expert", 0) == 0);

  const std::string svg = read_file(dir / "labeled" / "hypnogram.svg");
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("id=\"expert\"") != std::string::npos);
  CHECK(svg.find("id=\"predicted\"") != std::string::npos);

  // The printed agreement is the same number evaluation computes on the same
  // night with the same checkpoint.
  auto loaded = train::load_checkpoint(s.checkpoint);
  const auto samples = data::make_sequences(night.epochs, loaded.model->seq_len(), false);
  const train::EvalStats stats = train::evaluate(*loaded.model, samples, 16);
  const json summary = read_json(dir / "labeled" / "hypnogram.json");
  CHECK(summary.at("agreement").get<double>() == stats.accuracy);
  CHECK(summary.at("n_epochs") == night.epochs.size());

  SUBCASE("unlabeled recordings get a single-track plot") {
    const fs::path edf_path = dir / "raw.edf";
    testsupport::FixtureSignal sig;
    sig.label = "EEG Fpz-Cz";
    sig.sample_rate = 10;
    sig.samples.resize(900);
    for (size_t i = 0; i < sig.samples.size(); ++i)
      sig.samples[i] = std::sin(0.37 * static_cast<double>(i));
    testsupport::write_edf_signals(edf_path.string(), {sig});

    REQUIRE(run_cli({"hypnogram", "--checkpoint", s.checkpoint, "--recording",
                     edf_path.string(), "--unlabeled", "--rate", "10", "--out",
                     (dir / "unlabeled").string()},
                    &out) == cli::kExitOk);
    const std::string raw_series = read_file(dir / "unlabeled" / "stages.txt");
    CHECK(raw_series.rfind("# epoch predicted\n", 0) == 0);
    const std::string raw_svg = read_file(dir / "unlabeled" / "hypnogram.svg");
    CHECK(raw_svg.find("id=\"expert\"") == std::string::npos);
    CHECK(raw_svg.find("id=\"predicted\"") != std::string::npos);
    CHECK(read_json(dir / "unlabeled" / "hypnogram.json").at("labeled") == false);
  }

  SUBCASE("rate mismatch against the checkpoint is an explicit data error") {
    const std::string cache5 = (dir / "cache5").string();
    REQUIRE(run_cli({"synth", "--subjects", "1", "--epochs", "10", "--rate", "5", "--seed",
                     "2", "--cache-dir", cache5, "--out", (dir / "synth5").string()}) ==
            cli::kExitOk);
    std::string err;
    CHECK(run_cli({"hypnogram", "--checkpoint", s.checkpoint, "--recording",
                   cache5 + "/synthetic0.night", "--out", (dir / "mismatch").string()},
                  nullptr, &err) == cli::kExitData);
    CHECK(err.find("tied to the sampling rate") != std::string::npos);
  }
}

TEST_CASE("ingest builds caches, reports per-class counts and handles bad files") {
  const fs::path dir = fresh_dir("ingest");
  const fs::path dataset = dir / "dataset";
  fs::create_directories(dataset);

  // Two valid one-subject recordings in the ambulatory layout: 10 Hz channel,
  // three 30 s scored blocks each.
  for (int subject = 0; subject < 2; ++subject) {
    const std::string base = "SC40" + std::to_string(subject) + "1E0";
    testsupport::FixtureSignal sig;
    sig.label = "EEG Fpz-Cz";
    sig.sample_rate = 10;
    sig.samples.resize(900);
    for (size_t i = 0; i < sig.samples.size(); ++i)
      sig.samples[i] = std::sin(0.21 * static_cast<double>(i) + subject);
    testsupport::write_edf_signals((dataset / (base + "-PSG.edf")).string(), {sig});
    testsupport::write_annotation_edf(
        (dataset / (base.substr(0, 7) + "C-Hypnogram.edf")).string(),
        {{0.0, 30.0, "Sleep stage W"},
         {30.0, 30.0, "Sleep stage 1"},
         {60.0, 30.0, "Sleep stage 2"}});
  }
  // One file that declares the layout but is not an EDF.
  std::ofstream(dataset / "SC4099E0-PSG.edf") << "not an edf";

  const std::string cache_dir = (dir / "cache").string();
  std::string out, err;

  SUBCASE("without --skip-bad the corrupt file aborts the run") {
    CHECK(run_cli({"ingest", "--dataset", dataset.string(), "--protocol", "sleepedf",
                   "--rate", "10", "--trim", "1", "--cache-dir", cache_dir, "--out",
                   (dir / "strict").string()},
                  nullptr, &err) == cli::kExitData);
    CHECK(err.find("SC4099E0-PSG.edf") != std::string::npos);
  }

  SUBCASE("with --skip-bad the run continues and reports the skip") {
    REQUIRE(run_cli({"ingest", "--dataset", dataset.string(), "--protocol", "sleepedf",
                     "--rate", "10", "--trim", "1", "--skip-bad", "--cache-dir", cache_dir,
                     "--out", (dir / "lenient").string()},
                    &out) == cli::kExitOk);
    const json report = read_json(dir / "lenient" / "ingest_report.json");
    REQUIRE(report.at("skipped").size() == 1);
    CHECK(report.at("skipped")[0].at("path").get<std::string>().find("SC4099E0") !=
          std::string::npos);
    REQUIRE(report.at("nights").size() == 2);

    // Totals equal a direct ingest of the same files: 2 nights x (W, N1, N2).
    CHECK(report.at("totals").at("W") == 2);
    CHECK(report.at("totals").at("N1") == 2);
    CHECK(report.at("totals").at("N2") == 2);
    CHECK(report.at("totals").at("total") == 6);
    CHECK(out.find("skipped 1 file(s)") != std::string::npos);

    // The caches round trip through the night reader.
    for (const auto& night_json : report.at("nights")) {
      const data::NightRecord night =
          data::read_night_cache(night_json.at("cache").get<std::string>());
      CHECK(night.epochs.size() == 3);
      CHECK(night.subject_id == night_json.at("subject").get<std::string>());
    }
  }

  SUBCASE("empty directory is a data error") {
    const fs::path empty = dir / "empty";
    fs::create_directories(empty);
    CHECK(run_cli({"ingest", "--dataset", empty.string(), "--out", (dir / "e").string()},
                  nullptr, &err) == cli::kExitData);
    CHECK(err.find("no recordings found") != std::string::npos);
  }

  SUBCASE("unknown protocol is a usage error") {
    CHECK(run_cli({"ingest", "--dataset", dataset.string(), "--protocol", "polysomnograph",
                   "--out", (dir / "p").string()},
                  nullptr, &err) == cli::kExitUsage);
  }
}
