#include "iitnet/cli/commands.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "iitnet/data/cache.hpp"
#include "iitnet/data/edf.hpp"
#include "iitnet/data/ingest.hpp"
#include "iitnet/data/resample.hpp"
#include "iitnet/eval/report.hpp"
#include "iitnet/eval/runner.hpp"
#include "iitnet/model/baselines.hpp"
#include "iitnet/model/factory.hpp"
#include "iitnet/model/iitnet.hpp"
#include "iitnet/synth/generator.hpp"
#include "iitnet/train/checkpoint.hpp"
#include "iitnet/train/trainer.hpp"

namespace iitnet::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Flag/value problems the operator must fix; distinct from broken data.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Unreadable, malformed or structurally unusable inputs.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string fmt(const char* format, ...) {
  char buf[256];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buf, sizeof(buf), format, args);
  va_end(args);
  return buf;
}

std::string hex64(uint64_t v) { return fmt("%016llx", static_cast<unsigned long long>(v)); }

// Cache root resolution: flag beats IITNET_CACHE_DIR beats ./cache.
std::string resolve_cache_dir(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("IITNET_CACHE_DIR"); env && *env) return env;
  return "cache";
}

fs::path ensure_run_dir(const std::string& out_dir) {
  fs::path dir(out_dir);
  fs::create_directories(dir);
  return dir;
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write '" + path.string() + "'");
  os << text;
}

// Every run directory gets one of these: the command line, the fully resolved
// configuration and content hashes of the inputs, enough to re-execute.
void write_manifest(const fs::path& run_dir, const std::string& command,
                    const std::vector<std::string>& args, uint64_t seed, const json& config,
                    const std::vector<std::string>& input_paths) {
  json inputs = json::array();
  for (const std::string& path : input_paths)
    inputs.push_back({{"path", path}, {"fnv1a64", hex64(data::fnv1a64_file(path))}});
  const json manifest = {{"command", command}, {"args", args},       {"seed", seed},
                         {"config", config},   {"inputs", inputs},   {"out", run_dir.string()}};
  write_text_file(run_dir / "manifest.json", manifest.dump(2) + "\n");
}

std::array<long long, kNumStages> count_stages(const std::vector<LabeledEpoch>& epochs) {
  std::array<long long, kNumStages> counts{};
  for (const LabeledEpoch& e : epochs) ++counts[static_cast<int>(e.label)];
  return counts;
}

json stage_counts_json(const std::array<long long, kNumStages>& counts) {
  json j;
  for (int i = 0; i < kNumStages; ++i) j[stage_name(static_cast<Stage>(i))] = counts[i];
  return j;
}

std::string stage_counts_table(const std::array<long long, kNumStages>& counts) {
  std::ostringstream out;
  long long total = 0;
  out << "  stage ";
  for (int i = 0; i < kNumStages; ++i) out << fmt("%8s", stage_name(static_cast<Stage>(i)));
  out << "     total\n  epochs";
  for (int i = 0; i < kNumStages; ++i) {
    out << fmt("%8lld", counts[i]);
    total += counts[i];
  }
  out << fmt("%10lld\n", total);
  return out.str();
}

// All night caches under the root, sorted by path for determinism.
std::vector<data::NightRecord> load_nights(const std::string& cache_dir,
                                           std::vector<std::string>& paths) {
  if (!fs::is_directory(cache_dir))
    throw DataError("cache directory '" + cache_dir + "' does not exist; run ingest or synth first");
  for (const auto& entry : fs::recursive_directory_iterator(cache_dir))
    if (entry.is_regular_file() && entry.path().extension() == ".night")
      paths.push_back(entry.path().string());
  std::sort(paths.begin(), paths.end());
  if (paths.empty()) throw DataError("no night caches found under '" + cache_dir + "'");
  std::vector<data::NightRecord> nights;
  nights.reserve(paths.size());
  for (const std::string& p : paths) nights.push_back(data::read_night_cache(p));
  return nights;
}

int common_epoch_len(const std::vector<data::NightRecord>& nights) {
  int len = static_cast<int>(nights.front().epochs.front().samples.size());
  for (const auto& night : nights)
    for (const auto& epoch : night.epochs)
      if (static_cast<int>(epoch.samples.size()) != len)
        throw DataError("cached nights mix epoch lengths (" + std::to_string(len) + " vs " +
                        std::to_string(epoch.samples.size()) + " samples); use one cache root per rate");
  return len;
}

std::vector<std::string> subject_list(const std::vector<data::NightRecord>& nights) {
  std::set<std::string> s;
  for (const auto& night : nights) s.insert(night.subject_id);
  return {s.begin(), s.end()};
}

eval::Protocol parse_protocol(const std::string& name) {
  const auto p = eval::protocol_from_name(name);
  if (!p) throw UsageError("unknown protocol '" + name + "' (expected sleepedf, mass, shhs or generic)");
  return *p;
}

// Accepts "4", "1..10" and "1,4,7"; every value must be in [1, 10].
std::vector<int> parse_seq_lens(const std::string& text) {
  auto to_int = [](const std::string& t) {
    size_t pos = 0;
    int v = 0;
    try {
      v = std::stoi(t, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != t.size() || t.empty())
      throw UsageError("invalid sequence length '" + t + "'");
    if (v < 1 || v > 10)
      throw UsageError("sequence length must be in [1, 10], got " + t);
    return v;
  };
  std::vector<int> out;
  std::stringstream ss(text);
  std::string piece;
  while (std::getline(ss, piece, ',')) {
    const size_t dots = piece.find("..");
    if (dots == std::string::npos) {
      out.push_back(to_int(piece));
      continue;
    }
    const int lo = to_int(piece.substr(0, dots));
    const int hi = to_int(piece.substr(dots + 2));
    if (hi < lo) throw UsageError("empty sequence length range '" + piece + "'");
    for (int v = lo; v <= hi; ++v) out.push_back(v);
  }
  if (out.empty()) throw UsageError("no sequence lengths given");
  return out;
}

// Default config for the model kind, merged with an optional user file.
// The sweep's L and the cache's epoch length stay authoritative.
json resolve_model_config(const std::string& model, int seq_len, int epoch_len, double rate,
                          const std::string& config_path) {
  json cfg;
  if (model == "iitnet") {
    model::IitnetConfig c;
    c.seq_len = seq_len;
    c.epoch_len = epoch_len;
    cfg = c.to_json();
  } else if (model == "e2e-dsn" || model == "e2e-intra-dsn") {
    cfg = model::BaselineConfig::for_rate(rate, seq_len).to_json();
    cfg["epoch_len"] = epoch_len;
  } else {
    throw UsageError("unknown model '" + model + "' (expected iitnet, e2e-dsn or e2e-intra-dsn)");
  }
  if (!config_path.empty()) {
    std::ifstream is(config_path);
    if (!is.good()) throw DataError("cannot open model config '" + config_path + "'");
    cfg.merge_patch(json::parse(is));
    cfg["seq_len"] = seq_len;
    cfg["epoch_len"] = epoch_len;
  }
  return cfg;
}

// Options shared by the training-flavored commands.
struct TrainFlags {
  std::string protocol = "generic";
  std::string model = "iitnet";
  std::string model_config;
  std::string cache_dir;
  std::string out_dir;
  uint64_t seed = 0;
  double lr = 0.003;
  double weight_reg = 1e-6;
  int batch_size = 32;
  int patience = 10;
  int max_passes = 100;
  int generic_folds = 2;
  double val_fraction = 0.2;
  bool skip_short_prefix = false;

  train::TrainConfig train_config() const {
    train::TrainConfig cfg;
    cfg.adam.lr = lr;
    cfg.weight_reg = weight_reg;
    cfg.batch_size = batch_size;
    cfg.early_stop_patience = patience;
    cfg.max_passes = max_passes;
    cfg.seed = seed;
    return cfg;
  }
};

void add_train_flags(CLI::App* cmd, TrainFlags& f) {
  cmd->add_option("--protocol", f.protocol, "split protocol: sleepedf, mass, shhs, generic");
  cmd->add_option("--model", f.model, "iitnet, e2e-dsn or e2e-intra-dsn");
  cmd->add_option("--model-config", f.model_config, "JSON file merged over the model defaults");
  cmd->add_option("--cache-dir", f.cache_dir, "night cache root (default: $IITNET_CACHE_DIR or ./cache)");
  cmd->add_option("--out", f.out_dir, "run directory for reports and checkpoints")->required();
  cmd->add_option("--seed", f.seed, "run seed");
  cmd->add_option("--lr", f.lr, "Adam learning rate");
  cmd->add_option("--weight-reg", f.weight_reg, "L2 penalty coefficient");
  cmd->add_option("--batch", f.batch_size, "minibatch size");
  cmd->add_option("--patience", f.patience, "early-stop patience in validation evaluations");
  cmd->add_option("--passes", f.max_passes, "maximum passes over the training set");
  cmd->add_option("--generic-folds", f.generic_folds, "fold count for the generic protocol");
  cmd->add_option("--val-fraction", f.val_fraction, "validation share for the generic protocol");
  cmd->add_flag("--skip-short-prefix", f.skip_short_prefix,
                "drop night-initial targets instead of left-padding");
}

struct LoadedCohort {
  std::vector<data::NightRecord> nights;
  std::vector<std::string> cache_paths;
  int epoch_len = 0;
  double sample_rate = 0.0;
};

LoadedCohort load_cohort(const std::string& cache_flag) {
  LoadedCohort c;
  c.nights = load_nights(resolve_cache_dir(cache_flag), c.cache_paths);
  c.epoch_len = common_epoch_len(c.nights);
  c.sample_rate = c.nights.front().sample_rate;
  return c;
}

eval::SplitPlan plan_for(const TrainFlags& f, const std::vector<std::string>& subjects) {
  const eval::Protocol protocol = parse_protocol(f.protocol);
  const eval::GenericSplitSpec generic{f.generic_folds, f.val_fraction};
  try {
    return eval::build_split_plan(protocol, subjects, f.seed, &generic);
  } catch (const std::invalid_argument& e) {
    // Subject-count/protocol mismatches come from the data on disk.
    throw DataError(e.what());
  }
}

// One cross-validation at a fixed L; reports land under `run_dir`.
eval::CrossValidationResult run_cv(const TrainFlags& f, const LoadedCohort& cohort,
                                   const eval::SplitPlan& plan, int seq_len,
                                   const std::vector<int>& fold_subset,
                                   const fs::path& run_dir, const json& model_cfg) {
  eval::ModelFactory factory = [&f, &model_cfg] {
    return model::make_classifier(f.model, model_cfg);
  };
  eval::RunOptions options;
  options.sequence_length = seq_len;
  options.skip_short_prefix = f.skip_short_prefix;
  options.out_dir = run_dir.string();
  options.fold_subset = fold_subset;
  const eval::CrossValidationResult result =
      eval::run_cross_validation(plan, cohort.nights, factory, f.train_config(), options);
  write_text_file(run_dir / "report.json", eval::cross_validation_to_json(result).dump(2) + "\n");
  write_text_file(run_dir / "report.txt", eval::render_cross_validation_text(result));
  return result;
}

json train_flags_json(const TrainFlags& f, const json& model_cfg) {
  return {{"protocol", f.protocol},
          {"model", f.model},
          {"model_config", model_cfg},
          {"train", f.train_config().to_json()},
          {"generic_folds", f.generic_folds},
          {"val_fraction", f.val_fraction},
          {"skip_short_prefix", f.skip_short_prefix}};
}

// ---------------------------------------------------------------- ingest --

struct IngestFlags {
  std::string dataset_dir;
  std::string protocol = "sleepedf";
  std::string channel = "EEG Fpz-Cz";
  double rate = 100.0;
  int trim = 60;
  bool skip_bad = false;
  std::string cache_dir;
  std::string out_dir;
};

void cmd_ingest(const IngestFlags& f, const std::vector<std::string>& args, std::ostream& out) {
  data::DatasetConfig cfg;
  try {
    cfg.kind = data::dataset_kind_from_name(f.protocol);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  cfg.channel = f.channel;
  cfg.sample_rate = f.rate;
  cfg.wake_trim_epochs = f.trim;
  cfg.validate();

  if (!fs::is_directory(f.dataset_dir))
    throw DataError("dataset directory '" + f.dataset_dir + "' does not exist");
  const std::vector<std::string> sources = data::discover_recordings(f.dataset_dir, cfg.kind);
  if (sources.empty())
    throw DataError("no recordings found under '" + f.dataset_dir + "' for the " + f.protocol +
                    " layout");

  const std::string cache_dir = resolve_cache_dir(f.cache_dir);
  fs::create_directories(cache_dir);

  json nights_json = json::array();
  json skipped = json::array();
  std::array<long long, kNumStages> totals{};
  int ingested = 0;
  for (const std::string& source : sources) {
    try {
      const data::NightRecord night = data::ingest_recording(source, cfg);
      const std::string cache_path =
          (fs::path(cache_dir) / data::cache_file_name(source, cfg)).string();
      data::write_night_cache(cache_path, night);
      const auto counts = count_stages(night.epochs);
      for (int i = 0; i < kNumStages; ++i) totals[i] += counts[i];
      nights_json.push_back({{"subject", night.subject_id},
                             {"source", source},
                             {"cache", cache_path},
                             {"epochs", night.epochs.size()},
                             {"per_class", stage_counts_json(counts)}});
      ++ingested;
    } catch (const std::exception& e) {
      if (!f.skip_bad) throw DataError("failed to ingest '" + source + "': " + e.what());
      skipped.push_back({{"path", source}, {"reason", e.what()}});
    }
  }
  if (ingested == 0)
    throw DataError("all " + std::to_string(sources.size()) + " recording(s) under '" +
                    f.dataset_dir + "' failed to ingest");

  std::ostringstream text;
  text << "ingested " << ingested << " night(s) from '" << f.dataset_dir << "' (" << f.protocol
       << " layout) into '" << cache_dir << "'\n";
  text << stage_counts_table(totals);
  if (!skipped.empty()) {
    text << "skipped " << skipped.size() << " file(s):\n";
    for (const auto& s : skipped)
      text << "  " << s.at("path").get<std::string>() << ": " << s.at("reason").get<std::string>()
           << "\n";
  }
  out << text.str();

  const json config = {{"dataset_dir", f.dataset_dir}, {"protocol", f.protocol},
                       {"channel", f.channel},         {"sample_rate", f.rate},
                       {"wake_trim_epochs", f.trim},   {"skip_bad", f.skip_bad},
                       {"cache_dir", cache_dir}};
  json report = config;
  report["nights"] = nights_json;
  report["totals"] = stage_counts_json(totals);
  report["totals"]["total"] = std::accumulate(totals.begin(), totals.end(), 0LL);
  report["skipped"] = skipped;

  const fs::path run_dir = ensure_run_dir(f.out_dir);
  write_text_file(run_dir / "ingest_report.json", report.dump(2) + "\n");
  write_text_file(run_dir / "ingest_report.txt", text.str());
  write_manifest(run_dir, "ingest", args, 0, config, sources);
}

// ----------------------------------------------------------------- synth --

struct SynthFlags {
  std::string preset = "separable";
  int subjects = -1;
  int epochs = -1;
  double rate = -1.0;
  double noise = -1.0;
  uint64_t seed = 0;
  std::string cache_dir;
  std::string out_dir;
};

void cmd_synth(const SynthFlags& f, const std::vector<std::string>& args, std::ostream& out) {
  synth::SyntheticSpec spec;
  if (f.preset == "separable")
    spec = synth::separable_spec();
  else if (f.preset == "ambiguous-markov")
    spec = synth::ambiguous_markov_spec();
  else if (f.preset == "iid-ambiguous")
    spec = synth::iid_ambiguous_spec();
  else
    throw UsageError("unknown preset '" + f.preset +
                     "' (expected separable, ambiguous-markov or iid-ambiguous)");
  if (f.subjects >= 0) spec.n_subjects = f.subjects;
  if (f.epochs >= 0) spec.epochs_per_subject = f.epochs;
  if (f.rate >= 0.0) spec.sample_rate = f.rate;
  if (f.noise >= 0.0) spec.noise_level = f.noise;
  spec.validate();

  const std::string cache_dir = resolve_cache_dir(f.cache_dir);
  const std::vector<std::string> paths = synth::write_synthetic_cache(spec, f.seed, cache_dir);

  std::array<long long, kNumStages> totals{};
  for (const std::string& p : paths) {
    const auto counts = count_stages(data::read_night_cache(p).epochs);
    for (int i = 0; i < kNumStages; ++i) totals[i] += counts[i];
  }
  std::ostringstream text;
  text << "wrote " << paths.size() << " synthetic night(s) into '" << cache_dir << "' (preset "
       << f.preset << ", seed " << f.seed << ")\n";
  text << stage_counts_table(totals);
  out << text.str();

  json config = {{"preset", f.preset}, {"spec", spec.to_json()}, {"cache_dir", cache_dir}};
  const fs::path run_dir = ensure_run_dir(f.out_dir);
  json report = config;
  report["cache_files"] = paths;
  report["totals"] = stage_counts_json(totals);
  write_text_file(run_dir / "synth_report.json", report.dump(2) + "\n");
  write_text_file(run_dir / "synth_report.txt", text.str());
  write_manifest(run_dir, "synth", args, f.seed, config, {});
}

// ----------------------------------------------------- train / experiment --

void cmd_train(const TrainFlags& f, int seq_len, int fold, const std::vector<std::string>& args,
               std::ostream& out) {
  const LoadedCohort cohort = load_cohort(f.cache_dir);
  const eval::SplitPlan plan = plan_for(f, subject_list(cohort.nights));
  const json model_cfg =
      resolve_model_config(f.model, seq_len, cohort.epoch_len, cohort.sample_rate, f.model_config);

  const fs::path run_dir = ensure_run_dir(f.out_dir);
  const eval::CrossValidationResult result =
      run_cv(f, cohort, plan, seq_len, {fold}, run_dir, model_cfg);
  out << eval::render_cross_validation_text(result);

  json config = train_flags_json(f, model_cfg);
  config["seq_len"] = seq_len;
  config["fold"] = fold;
  write_manifest(run_dir, "train", args, f.seed, config, cohort.cache_paths);
}

void cmd_experiment(const TrainFlags& f, const std::string& seq_lens_text,
                    const std::vector<int>& folds, const std::vector<std::string>& args,
                    std::ostream& out) {
  const std::vector<int> seq_lens = parse_seq_lens(seq_lens_text);
  const LoadedCohort cohort = load_cohort(f.cache_dir);
  const eval::SplitPlan plan = plan_for(f, subject_list(cohort.nights));

  const fs::path run_dir = ensure_run_dir(f.out_dir);
  json curve = json::array();
  std::ostringstream csv;
  csv << "L,accuracy,mf1,kappa,fold_mean_accuracy,fold_mean_mf1,fold_mean_kappa\n";
  json model_cfgs = json::object();
  for (const int seq_len : seq_lens) {
    const json model_cfg = resolve_model_config(f.model, seq_len, cohort.epoch_len,
                                                cohort.sample_rate, f.model_config);
    model_cfgs["L" + std::to_string(seq_len)] = model_cfg;
    const fs::path l_dir = run_dir / ("L_" + std::to_string(seq_len));
    fs::create_directories(l_dir);
    const eval::CrossValidationResult result =
        run_cv(f, cohort, plan, seq_len, folds, l_dir, model_cfg);
    out << "L=" << seq_len
        << fmt(": accuracy %6.4f | MF1 %6.4f | kappa %6.4f\n", result.aggregate.accuracy,
               result.aggregate.mf1, result.aggregate.kappa);
    curve.push_back({{"L", seq_len},
                     {"accuracy", result.aggregate.accuracy},
                     {"mf1", result.aggregate.mf1},
                     {"kappa", result.aggregate.kappa},
                     {"fold_mean_accuracy", result.fold_means.accuracy},
                     {"fold_mean_mf1", result.fold_means.mf1},
                     {"fold_mean_kappa", result.fold_means.kappa}});
    csv << fmt("%d,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n", seq_len, result.aggregate.accuracy,
               result.aggregate.mf1, result.aggregate.kappa, result.fold_means.accuracy,
               result.fold_means.mf1, result.fold_means.kappa);
  }
  write_text_file(run_dir / "curve.json", curve.dump(2) + "\n");
  write_text_file(run_dir / "curve.csv", csv.str());

  json config = train_flags_json(f, model_cfgs);
  config["seq_lens"] = seq_lens;
  config["folds"] = folds;
  write_manifest(run_dir, "experiment", args, f.seed, config, cohort.cache_paths);
}

// -------------------------------------------------------------- evaluate --

struct EvaluateFlags {
  std::string checkpoint;
  std::string cache_dir;
  std::vector<std::string> subjects;
  std::string dataset_label = "generic";
  int batch_size = 64;
  std::string out_dir;
};

void check_epoch_len(int model_epoch_len, int data_epoch_len, double rate) {
  if (model_epoch_len == data_epoch_len) return;
  throw DataError(fmt("recording epochs carry %d samples (30 s at %g Hz) but the checkpoint "
                      "expects %d; the model is tied to the sampling rate it was trained at, "
                      "so resample the input to match",
                      data_epoch_len, rate, model_epoch_len));
}

void cmd_evaluate(const EvaluateFlags& f, const std::vector<std::string>& args,
                  std::ostream& out) {
  train::LoadedCheckpoint ckpt = train::load_checkpoint(f.checkpoint);
  LoadedCohort cohort = load_cohort(f.cache_dir);
  if (!f.subjects.empty()) {
    const std::set<std::string> keep(f.subjects.begin(), f.subjects.end());
    std::erase_if(cohort.nights,
                  [&keep](const data::NightRecord& n) { return !keep.count(n.subject_id); });
    if (cohort.nights.empty())
      throw DataError("none of the requested subjects have cached nights");
  }
  check_epoch_len(ckpt.model->epoch_len(), cohort.epoch_len, cohort.sample_rate);

  std::vector<SequenceSample> samples;
  for (const auto& night : cohort.nights) {
    const auto s = data::make_sequences(night.epochs, ckpt.model->seq_len(), false);
    samples.insert(samples.end(), s.begin(), s.end());
  }
  const train::EvalStats stats = train::evaluate(*ckpt.model, samples, f.batch_size);
  eval::MetricsReport report = eval::compute_metrics(stats.confusion);
  report.sequence_length = ckpt.model->seq_len();
  report.dataset_kind = f.dataset_label;

  const std::string text = eval::render_report_text(report);
  out << text;
  const fs::path run_dir = ensure_run_dir(f.out_dir);
  write_text_file(run_dir / "report.json", eval::report_to_json(report).dump(2) + "\n");
  write_text_file(run_dir / "report.txt", text);

  std::vector<std::string> inputs = cohort.cache_paths;
  inputs.push_back(f.checkpoint);
  const json config = {{"checkpoint", f.checkpoint},
                       {"dataset", f.dataset_label},
                       {"subjects", f.subjects},
                       {"batch", f.batch_size},
                       {"model", ckpt.model->config_json()}};
  write_manifest(run_dir, "evaluate", args, 0, config, inputs);
}

// ------------------------------------------------------------- hypnogram --

struct HypnogramFlags {
  std::string checkpoint;
  std::string recording;
  std::string protocol = "sleepedf";
  std::string channel = "EEG Fpz-Cz";
  double rate = 100.0;
  int trim = 60;
  bool unlabeled = false;
  int batch_size = 64;
  std::string out_dir;
};

// Stage rows in clinical display order, wake on top and deep sleep at the
// bottom: W, REM, N1, N2, N3.
int display_row(int stage) {
  static constexpr int kRow[kNumStages] = {0, 2, 3, 4, 1};
  return kRow[stage];
}

std::string step_path(const std::vector<int>& stages, double x0, double xs, double y0,
                      double ys) {
  std::string d = fmt("M %.2f %.2f", x0, y0 + display_row(stages[0]) * ys);
  int row = display_row(stages[0]);
  for (size_t i = 1; i < stages.size(); ++i) {
    const int next = display_row(stages[i]);
    if (next == row) continue;
    d += fmt(" H %.2f V %.2f", x0 + static_cast<double>(i) * xs, y0 + next * ys);
    row = next;
  }
  d += fmt(" H %.2f", x0 + static_cast<double>(stages.size()) * xs);
  return d;
}

std::string svg_track(const std::vector<int>& stages, const char* id, const char* title,
                      const char* color, double top) {
  static constexpr const char* kRowName[kNumStages] = {"W", "REM", "N1", "N2", "N3"};
  const double x0 = 70.0, width = 960.0, ys = 30.0;
  const double xs = width / static_cast<double>(stages.size());
  std::string s = fmt("<g id=\"%s\">\n", id);
  s += fmt("<text x=\"%.0f\" y=\"%.2f\" font-size=\"14\" font-family=\"sans-serif\">%s</text>\n",
           x0, top - 10.0, title);
  for (int r = 0; r < kNumStages; ++r) {
    const double y = top + r * ys;
    s += fmt("<line x1=\"%.0f\" y1=\"%.2f\" x2=\"%.0f\" y2=\"%.2f\" stroke=\"#ddd\"/>\n", x0, y,
             x0 + width, y);
    s += fmt("<text x=\"%.0f\" y=\"%.2f\" font-size=\"12\" font-family=\"sans-serif\" "
             "text-anchor=\"end\">%s</text>\n",
             x0 - 8.0, y + 4.0, kRowName[r]);
  }
  s += fmt("<path d=\"%s\" fill=\"none\" stroke=\"%s\" stroke-width=\"1.5\"/>\n",
           step_path(stages, x0, xs, top, ys).c_str(), color);
  s += "</g>\n";
  return s;
}

// Fig.-style static artifact: expert track above the predicted one when
// labels exist, x in epochs, y over the five stages.
std::string render_hypnogram_svg(const std::vector<int>& predicted,
                                 const std::vector<int>* expert, const std::string& subject) {
  const bool two = expert != nullptr;
  const double height = two ? 420.0 : 250.0;
  std::string s = fmt("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"1080\" height=\"%.0f\" "
                      "viewBox=\"0 0 1080 %.0f\">\n",
                      height, height);
  s += fmt("<text x=\"70\" y=\"24\" font-size=\"16\" font-family=\"sans-serif\">hypnogram: "
           "%s (%zu epochs)</text>\n",
           subject.c_str(), predicted.size());
  double top = 60.0;
  if (two) {
    s += svg_track(*expert, "expert", "expert", "#1f77b4", top);
    top += 170.0;
  }
  s += svg_track(predicted, "predicted", "predicted", "#d62728", top);
  const double axis_y = top + 4 * 30.0 + 24.0;
  s += fmt("<text x=\"70\" y=\"%.2f\" font-size=\"12\" font-family=\"sans-serif\">epoch 0</text>\n",
           axis_y);
  s += fmt("<text x=\"1030\" y=\"%.2f\" font-size=\"12\" font-family=\"sans-serif\" "
           "text-anchor=\"end\">epoch %zu</text>\n",
           axis_y, predicted.size());
  s += "</svg>\n";
  return s;
}

data::NightRecord load_recording_for_hypnogram(const HypnogramFlags& f, bool& labeled) {
  if (fs::path(f.recording).extension() == ".night") {
    labeled = true;
    return data::read_night_cache(f.recording);
  }
  data::DatasetConfig cfg;
  try {
    cfg.kind = data::dataset_kind_from_name(f.protocol);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  cfg.channel = f.channel;
  cfg.sample_rate = f.rate;
  cfg.wake_trim_epochs = f.trim;
  cfg.validate();
  if (!f.unlabeled) {
    labeled = true;
    return data::ingest_recording(f.recording, cfg);
  }
  // No annotation sidecar: cut the configured channel into bare 30 s epochs.
  labeled = false;
  const data::EdfFile edf = data::read_edf(f.recording);
  const int sig = edf.find_signal(cfg.channel);
  if (sig < 0) throw data::MissingChannelError(cfg.channel, f.recording);
  std::vector<double> x = edf.physical(sig);
  const double native = edf.sample_rate(sig);
  if (std::abs(native - cfg.sample_rate) > 1e-9)
    x = data::resample(x, native, cfg.sample_rate);
  data::NightRecord night;
  night.subject_id = fs::path(f.recording).stem().string();
  night.source_path = f.recording;
  night.sample_rate = cfg.sample_rate;
  const int epoch_len = static_cast<int>(std::llround(30.0 * cfg.sample_rate));
  const int n = static_cast<int>(x.size()) / epoch_len;
  if (n == 0) throw DataError("'" + f.recording + "' is shorter than one 30 s epoch");
  for (int i = 0; i < n; ++i) {
    LabeledEpoch e;
    e.subject_id = night.subject_id;
    e.position = i;
    e.samples.assign(x.begin() + static_cast<long>(i) * epoch_len,
                     x.begin() + static_cast<long>(i + 1) * epoch_len);
    night.epochs.push_back(std::move(e));
  }
  return night;
}

void cmd_hypnogram(const HypnogramFlags& f, const std::vector<std::string>& args,
                   std::ostream& out) {
  train::LoadedCheckpoint ckpt = train::load_checkpoint(f.checkpoint);
  bool labeled = false;
  const data::NightRecord night = load_recording_for_hypnogram(f, labeled);
  if (night.epochs.empty()) throw DataError("'" + f.recording + "' produced no epochs");
  check_epoch_len(ckpt.model->epoch_len(),
                  static_cast<int>(night.epochs.front().samples.size()), night.sample_rate);

  // One sequence per epoch (left-padded), so predictions align with epochs.
  const std::vector<SequenceSample> samples =
      data::make_sequences(night.epochs, ckpt.model->seq_len(), false);
  std::vector<size_t> idx(samples.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<int> predicted(samples.size());
  for (size_t lo = 0; lo < samples.size(); lo += static_cast<size_t>(f.batch_size)) {
    const size_t hi = std::min(samples.size(), lo + static_cast<size_t>(f.batch_size));
    std::vector<int> ignored;
    const nn::SignalBatch x = train::batch_from_sequences(samples, idx, lo, hi, &ignored);
    const nn::Mat logits = ckpt.model->predict_logits(x);
    for (Eigen::Index j = 0; j < logits.cols(); ++j) {
      Eigen::Index p = 0;
      logits.col(j).maxCoeff(&p);
      predicted[lo + static_cast<size_t>(j)] = static_cast<int>(p);
    }
  }

  std::vector<int> expert;
  long long agree = 0;
  if (labeled) {
    expert.resize(night.epochs.size());
    for (size_t i = 0; i < night.epochs.size(); ++i) {
      expert[i] = static_cast<int>(night.epochs[i].label);
      if (expert[i] == predicted[i]) ++agree;
    }
  }

  std::ostringstream series;
  series << "# epoch predicted" << (labeled ? " expert" : "") << "\n";
  for (size_t i = 0; i < predicted.size(); ++i) {
    series << night.epochs[i].position << " " << stage_name(stage_from_index(predicted[i]));
    if (labeled) series << " " << stage_name(stage_from_index(expert[i]));
    series << "\n";
  }

  const fs::path run_dir = ensure_run_dir(f.out_dir);
  write_text_file(run_dir / "stages.txt", series.str());
  write_text_file(run_dir / "hypnogram.svg",
                  render_hypnogram_svg(predicted, labeled ? &expert : nullptr,
                                       night.subject_id));

  const double agreement =
      labeled ? static_cast<double>(agree) / static_cast<double>(predicted.size()) : 0.0;
  json summary = {{"subject", night.subject_id},
                  {"n_epochs", predicted.size()},
                  {"labeled", labeled}};
  if (labeled) summary["agreement"] = agreement;
  write_text_file(run_dir / "hypnogram.json", summary.dump(2) + "\n");

  out << "staged " << predicted.size() << " epoch(s) of subject '" << night.subject_id << "'\n";
  if (labeled)
    out << fmt("agreement with expert labels: %.4f (%lld/%zu epochs)\n", agreement, agree,
               predicted.size());

  std::vector<std::string> inputs = {f.checkpoint, f.recording};
  const json config = {{"checkpoint", f.checkpoint}, {"recording", f.recording},
                       {"protocol", f.protocol},     {"channel", f.channel},
                       {"sample_rate", f.rate},      {"unlabeled", f.unlabeled},
                       {"model", ckpt.model->config_json()}};
  write_manifest(run_dir, "hypnogram", args, 0, config, inputs);
}

}  // namespace

int run(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"sleep stage classification toolkit"};
  app.name("iitnet");
  app.require_subcommand(1);

  IngestFlags ingest;
  CLI::App* ingest_cmd = app.add_subcommand("ingest", "parse recordings into night caches");
  ingest_cmd->add_option("--dataset", ingest.dataset_dir, "directory of recordings")->required();
  ingest_cmd->add_option("--protocol", ingest.protocol, "sleepedf, mass, shhs or generic");
  ingest_cmd->add_option("--channel", ingest.channel, "signal label to extract");
  ingest_cmd->add_option("--rate", ingest.rate, "model-facing sample rate in Hz");
  ingest_cmd->add_option("--trim", ingest.trim, "wake epochs kept around sleep (sleepedf only)");
  ingest_cmd->add_flag("--skip-bad", ingest.skip_bad, "skip unreadable recordings and report them");
  ingest_cmd->add_option("--cache-dir", ingest.cache_dir, "night cache root");
  ingest_cmd->add_option("--out", ingest.out_dir, "run directory for the ingestion report")
      ->required();

  SynthFlags synth_flags;
  CLI::App* synth_cmd = app.add_subcommand("synth", "generate synthetic night caches");
  synth_cmd->add_option("--preset", synth_flags.preset,
                        "separable, ambiguous-markov or iid-ambiguous");
  synth_cmd->add_option("--subjects", synth_flags.subjects, "number of subjects");
  synth_cmd->add_option("--epochs", synth_flags.epochs, "epochs per subject");
  synth_cmd->add_option("--rate", synth_flags.rate, "sample rate in Hz");
  synth_cmd->add_option("--noise", synth_flags.noise, "noise level");
  synth_cmd->add_option("--seed", synth_flags.seed, "generator seed");
  synth_cmd->add_option("--cache-dir", synth_flags.cache_dir, "night cache root");
  synth_cmd->add_option("--out", synth_flags.out_dir, "run directory for the report")->required();

  TrainFlags train_flags;
  int train_seq_len = 1;
  int train_fold = 0;
  CLI::App* train_cmd = app.add_subcommand("train", "train one fold and keep its checkpoint");
  add_train_flags(train_cmd, train_flags);
  train_cmd->add_option("-L,--seq-len", train_seq_len, "epochs per input sequence")
      ->check(CLI::Range(1, 10));
  train_cmd->add_option("--fold", train_fold, "fold index of the split plan to train");

  TrainFlags exp_flags;
  std::string exp_seq_lens = "1";
  std::vector<int> exp_folds;
  CLI::App* exp_cmd =
      app.add_subcommand("experiment", "cross-validate over a sequence-length sweep");
  add_train_flags(exp_cmd, exp_flags);
  exp_cmd->add_option("-L,--seq-len", exp_seq_lens, "sweep: '4', '1..10' or '1,4,7'");
  exp_cmd->add_option("--folds", exp_folds, "fold subset, e.g. 0,1 (default: all)")
      ->delimiter(',');

  EvaluateFlags eval_flags;
  CLI::App* eval_cmd = app.add_subcommand("evaluate", "score a checkpoint on cached nights");
  eval_cmd->add_option("--checkpoint", eval_flags.checkpoint, "model checkpoint")->required();
  eval_cmd->add_option("--cache-dir", eval_flags.cache_dir, "night cache root");
  eval_cmd->add_option("--subjects", eval_flags.subjects, "subject subset, comma separated")
      ->delimiter(',');
  eval_cmd->add_option("--dataset", eval_flags.dataset_label, "dataset label for the report");
  eval_cmd->add_option("--batch", eval_flags.batch_size, "evaluation batch size");
  eval_cmd->add_option("--out", eval_flags.out_dir, "run directory for the report")->required();

  HypnogramFlags hyp_flags;
  CLI::App* hyp_cmd =
      app.add_subcommand("hypnogram", "stage one night and plot predicted vs expert");
  hyp_cmd->add_option("--checkpoint", hyp_flags.checkpoint, "model checkpoint")->required();
  hyp_cmd->add_option("--recording", hyp_flags.recording, "a .night cache or a PSG file")
      ->required();
  hyp_cmd->add_option("--protocol", hyp_flags.protocol, "layout of a PSG recording");
  hyp_cmd->add_option("--channel", hyp_flags.channel, "signal label to extract");
  hyp_cmd->add_option("--rate", hyp_flags.rate, "model-facing sample rate in Hz");
  hyp_cmd->add_option("--trim", hyp_flags.trim, "wake epochs kept around sleep (sleepedf only)");
  hyp_cmd->add_flag("--unlabeled", hyp_flags.unlabeled,
                    "recording has no annotations; omit the expert track");
  hyp_cmd->add_option("--batch", hyp_flags.batch_size, "inference batch size");
  hyp_cmd->add_option("--out", hyp_flags.out_dir, "run directory for the artifacts")->required();

  ingest_cmd->callback([&] { cmd_ingest(ingest, args, out); });
  synth_cmd->callback([&] { cmd_synth(synth_flags, args, out); });
  train_cmd->callback([&] { cmd_train(train_flags, train_seq_len, train_fold, args, out); });
  exp_cmd->callback([&] { cmd_experiment(exp_flags, exp_seq_lens, exp_folds, args, out); });
  eval_cmd->callback([&] { cmd_evaluate(eval_flags, args, out); });
  hyp_cmd->callback([&] { cmd_hypnogram(hyp_flags, args, out); });

  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("iitnet");
  for (const std::string& a : args) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const train::TrainingDiverged& e) {
    err << "training diverged at step " << e.step << " (pass " << e.pass << "): " << e.what()
        << "\n";
    return kExitTraining;
  } catch (const eval::FoldFailure& e) {
    err << "cross-validation failed: " << e.what() << "\n";
    return kExitTraining;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
}

}  // namespace iitnet::cli
