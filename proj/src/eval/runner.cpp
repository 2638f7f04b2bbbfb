#include "iitnet/eval/runner.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "iitnet/eval/report.hpp"
#include "iitnet/train/checkpoint.hpp"

namespace iitnet::eval {

namespace {

namespace fs = std::filesystem;

// Per-fold training seed: decorrelates fold initializations while staying a
// pure function of the run seed.
uint64_t fold_seed(uint64_t run_seed, int fold_index) {
  uint64_t x = run_seed + 0x9e3779b97f4a7c15ULL * static_cast<uint64_t>(fold_index + 1);
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  return x;
}

std::vector<SequenceSample> gather_samples(
    const std::vector<std::string>& subjects,
    const std::map<std::string, std::vector<const data::NightRecord*>>& by_subject,
    int sequence_length, bool skip_short_prefix, const char* role) {
  std::vector<SequenceSample> samples;
  for (const std::string& subject : subjects) {
    auto it = by_subject.find(subject);
    if (it == by_subject.end()) {
      throw std::invalid_argument(std::string(role) + " subject '" + subject +
                                  "' has no recorded nights");
    }
    for (const data::NightRecord* night : it->second) {
      std::vector<SequenceSample> s =
          data::make_sequences(night->epochs, sequence_length, skip_short_prefix);
      samples.insert(samples.end(), std::make_move_iterator(s.begin()),
                     std::make_move_iterator(s.end()));
    }
  }
  if (samples.empty()) {
    throw std::invalid_argument("empty " + std::string(role) + " set");
  }
  return samples;
}

}  // namespace

CrossValidationResult run_cross_validation(const SplitPlan& plan,
                                           const std::vector<data::NightRecord>& nights,
                                           const ModelFactory& factory,
                                           const train::TrainConfig& train_config,
                                           const RunOptions& options) {
  if (options.sequence_length < 1) {
    throw std::invalid_argument("sequence length must be at least 1");
  }
  std::map<std::string, std::vector<const data::NightRecord*>> by_subject;
  for (const data::NightRecord& night : nights) by_subject[night.subject_id].push_back(&night);
  std::vector<std::string> subjects;
  for (const auto& [subject, _] : by_subject) subjects.push_back(subject);

  // Leak detection happens here, before any model is built or trained.
  validate_split_plan(plan, subjects);

  std::vector<int> fold_indices;
  if (options.fold_subset.empty()) {
    for (int k = 0; k < static_cast<int>(plan.folds.size()); ++k) fold_indices.push_back(k);
  } else {
    fold_indices = options.fold_subset;
    std::sort(fold_indices.begin(), fold_indices.end());
    fold_indices.erase(std::unique(fold_indices.begin(), fold_indices.end()),
                       fold_indices.end());
    for (int k : fold_indices) {
      if (k < 0 || k >= static_cast<int>(plan.folds.size())) {
        throw std::invalid_argument("fold index " + std::to_string(k) +
                                    " outside plan with " +
                                    std::to_string(plan.folds.size()) + " folds");
      }
    }
  }

  CrossValidationResult result;
  ConfusionMatrix pooled;
  for (int k : fold_indices) {
    const Fold& fold = plan.folds[k];
    FoldReport report;
    report.fold_index = k;
    try {
      std::vector<SequenceSample> train_set =
          gather_samples(fold.train_subjects, by_subject, options.sequence_length,
                         options.skip_short_prefix, "train");
      std::vector<SequenceSample> val_set =
          gather_samples(fold.val_subjects, by_subject, options.sequence_length,
                         options.skip_short_prefix, "val");
      std::vector<SequenceSample> test_set =
          gather_samples(fold.test_subjects, by_subject, options.sequence_length,
                         options.skip_short_prefix, "test");

      std::unique_ptr<model::SequenceClassifier> model = factory();
      train::TrainConfig cfg = train_config;
      cfg.seed = fold_seed(train_config.seed, k);

      std::ofstream history;
      fs::path fold_dir;
      if (!options.out_dir.empty()) {
        fold_dir = fs::path(options.out_dir) / ("fold_" + std::to_string(k));
        fs::create_directories(fold_dir);
        history.open(fold_dir / "history.jsonl");
      }
      report.train = train::fit(*model, train_set, val_set, cfg,
                                history.is_open() ? &history : nullptr);

      train::EvalStats stats = train::evaluate(*model, test_set, cfg.batch_size);
      report.metrics = compute_metrics(stats.confusion);
      report.metrics.sequence_length = options.sequence_length;
      report.metrics.dataset_kind = protocol_name(plan.protocol);

      if (!options.out_dir.empty()) {
        train::CheckpointMeta meta;
        meta.step = report.train.steps;
        meta.best_val_accuracy = report.train.best_val_accuracy;
        meta.extra = {{"fold_index", k}, {"seed", cfg.seed}};
        train::save_checkpoint((fold_dir / "model.ckpt").string(), *model, nullptr, meta);
        std::ofstream(fold_dir / "report.json")
            << report_to_json(report.metrics).dump(2) << "\n";
      }
    } catch (const std::exception& err) {
      throw FoldFailure(k, err.what());
    }
    pooled += report.metrics.confusion;
    result.folds.push_back(std::move(report));
  }

  result.aggregate = compute_metrics(pooled);
  result.aggregate.sequence_length = options.sequence_length;
  result.aggregate.dataset_kind = protocol_name(plan.protocol);
  for (const FoldReport& fold : result.folds) {
    result.fold_means.accuracy += fold.metrics.accuracy / result.folds.size();
    result.fold_means.mf1 += fold.metrics.mf1 / result.folds.size();
    result.fold_means.kappa += fold.metrics.kappa / result.folds.size();
  }
  return result;
}

}  // namespace iitnet::eval
