#pragma once

#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "iitnet/data/ingest.hpp"
#include "iitnet/eval/metrics.hpp"
#include "iitnet/eval/splits.hpp"
#include "iitnet/model/classifier.hpp"
#include "iitnet/train/trainer.hpp"

namespace iitnet::eval {

// Carries the index of the fold whose training or evaluation failed; earlier
// folds' results are already on disk when an output directory was given.
class FoldFailure : public std::runtime_error {
 public:
  FoldFailure(int fold_index, const std::string& why)
      : std::runtime_error("fold " + std::to_string(fold_index) + ": " + why),
        fold_index(fold_index) {}
  int fold_index;
};

struct FoldReport {
  int fold_index = 0;
  MetricsReport metrics;  // test subjects of this fold
  train::TrainResult train;
};

// Arithmetic means of per-fold summary metrics. Reported alongside, and
// never mixed with, the pooled-confusion aggregate.
struct FoldAverages {
  double accuracy = 0.0;
  double mf1 = 0.0;
  double kappa = 0.0;
};

struct CrossValidationResult {
  MetricsReport aggregate;  // metrics of the summed fold confusion matrices
  FoldAverages fold_means;
  std::vector<FoldReport> folds;
};

using ModelFactory = std::function<std::unique_ptr<model::SequenceClassifier>()>;

struct RunOptions {
  int sequence_length = 1;
  bool skip_short_prefix = false;
  // When non-empty, each fold writes fold_<k>/{report.json,model.ckpt,
  // history.jsonl} into this directory as it completes.
  std::string out_dir;
  // When non-empty, only these fold indices run (test sets then no longer
  // partition the population; the aggregate covers the selected folds).
  std::vector<int> fold_subset;
};

// Trains one model per fold on the given nights and pools test confusion
// matrices across folds. The plan is validated against the nights' subjects
// before any training starts.
CrossValidationResult run_cross_validation(const SplitPlan& plan,
                                           const std::vector<data::NightRecord>& nights,
                                           const ModelFactory& factory,
                                           const train::TrainConfig& train_config,
                                           const RunOptions& options);

}  // namespace iitnet::eval
