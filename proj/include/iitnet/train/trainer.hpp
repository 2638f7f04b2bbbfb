#pragma once

#include <cstdint>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "iitnet/core.hpp"
#include "iitnet/model/classifier.hpp"
#include "iitnet/train/adam.hpp"

namespace iitnet::train {

using nn::Mat;
using nn::SignalBatch;

struct TrainConfig {
  AdamConfig adam;
  double weight_reg = 1e-6;
  int batch_size = 256;
  int early_stop_patience = 10;  // validation evaluations without cost improvement
  int max_passes = 100;          // hard cap on passes over the training set
  uint64_t seed = 0;

  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

// One validation evaluation (made once per pass over the training set).
struct EvalPoint {
  long long step = 0;
  int pass = 0;
  double train_loss = 0.0;  // mean total loss across the pass's batches
  double val_cost = 0.0;    // mean data loss on validation plus penalty
  double val_accuracy = 0.0;
};

struct TrainResult {
  double best_val_accuracy = 0.0;
  double best_val_cost = 0.0;
  long long steps = 0;
  int passes = 0;
  bool early_stopped = false;
  std::vector<EvalPoint> history;
};

// Raised when the training loss leaves the reals; carries enough context to
// find the offending step.
class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(const std::string& what, long long step, int pass, int batch_index,
                   std::vector<double> recent_losses)
      : std::runtime_error(what),
        step(step),
        pass(pass),
        batch_index(batch_index),
        recent_losses(std::move(recent_losses)) {}

  long long step;
  int pass;
  int batch_index;
  std::vector<double> recent_losses;
};

// Assembles the epochs of samples[idx[lo..hi)] into one input batch plus the
// target labels. All samples must agree on sequence length and epoch size.
SignalBatch batch_from_sequences(const std::vector<SequenceSample>& samples,
                                 const std::vector<size_t>& idx, size_t lo, size_t hi,
                                 std::vector<int>* labels);

struct EvalStats {
  double data_loss = 0.0;
  double accuracy = 0.0;
  ConfusionMatrix confusion;
  long long n = 0;
};

// Eval-mode pass over a sample set, chunked to bound memory.
EvalStats evaluate(const model::SequenceClassifier& model,
                   const std::vector<SequenceSample>& set, int batch_size);

// Initializes the model from cfg.seed, minimizes cross-entropy plus the L2
// penalty with Adam, evaluates on validation after each pass, and stops when
// the validation cost has not improved for cfg.early_stop_patience
// consecutive evaluations (or at max_passes). The model is left holding the
// weights of the evaluation with the highest validation accuracy. Requires
// train and validation subjects to be disjoint. If `jsonl` is non-null one
// JSON line is appended per evaluation.
TrainResult fit(model::SequenceClassifier& model,
                const std::vector<SequenceSample>& train_set,
                const std::vector<SequenceSample>& val_set, const TrainConfig& cfg,
                std::ostream* jsonl = nullptr);

}  // namespace iitnet::train
