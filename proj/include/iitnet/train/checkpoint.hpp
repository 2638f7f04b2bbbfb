#pragma once

#include <memory>
#include <string>

#include "json.hpp"

#include "iitnet/model/classifier.hpp"
#include "iitnet/train/adam.hpp"

namespace iitnet::train {

struct CheckpointMeta {
  long long step = 0;
  double best_val_accuracy = 0.0;
  nlohmann::json extra;  // run/fold identifiers, free form
};

// Single-file binary snapshot: magic, format version, a JSON index, then the
// raw little-endian f64 tensor data (parameters, normalization statistics,
// and optionally the optimizer moments). Round trips are bit exact.
void save_checkpoint(const std::string& path, model::SequenceClassifier& model,
                     const Adam* adam, const CheckpointMeta& meta);

struct LoadedCheckpoint {
  std::unique_ptr<model::SequenceClassifier> model;
  std::unique_ptr<Adam> adam;  // null when the file carries no optimizer state
  CheckpointMeta meta;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace iitnet::train
