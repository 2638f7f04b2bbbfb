#pragma once

#include <memory>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"

#include "iitnet/nn/batch.hpp"
#include "iitnet/nn/params.hpp"

namespace iitnet::model {

using nn::Mat;
using nn::SignalBatch;
using nn::Vec;

// Loss split so the regularization invariant (total(wr) - total(0) equals
// wr * sum of squared weights) can be verified on exact components.
struct LossParts {
  double data = 0.0;
  double penalty = 0.0;
  double total() const { return data + penalty; }
};

// Common face of the sequence classifiers: input is a batch of epoch
// sequences (count = batch * seq_len epochs, sample-major chronological),
// output one label per sequence (the last epoch's stage).
class SequenceClassifier {
 public:
  virtual ~SequenceClassifier() = default;

  virtual std::string kind() const = 0;
  virtual int seq_len() const = 0;
  virtual int epoch_len() const = 0;
  virtual int classes() const = 0;

  virtual void init(std::mt19937_64& rng) = 0;

  // Pure inference: no statistics updates, no dropout, no recording.
  // Safe to call concurrently with nothing else mutating the model.
  virtual Mat predict_logits(const SignalBatch& x) const = 0;

  // Forward + backward. Gradients accumulate into the parameter slots
  // (call zero_grad() first). `training` selects batch statistics and
  // dropout; eval mode still produces exact gradients of the eval-mode loss,
  // which is what derivative checks use. The RNG is consulted only for
  // dropout in training mode.
  virtual LossParts backprop(const SignalBatch& x, const std::vector<int>& labels,
                             double weight_reg, bool training,
                             std::mt19937_64* rng) = 0;

  virtual void zero_grad() = 0;
  virtual std::vector<nn::ParamRef> params() = 0;
  virtual std::vector<nn::ParamRef> buffers() = 0;

  virtual nlohmann::json config_json() const = 0;
};

// Sum of squared values over the regularized parameters, accumulated in
// collection order. Plain scalar loop so tests can reproduce it bitwise.
double regularized_squared_norm(const std::vector<nn::ParamRef>& params);

// Adds weight_reg * 2w to the gradient slots of regularized parameters.
void add_regularization_gradient(const std::vector<nn::ParamRef>& params,
                                 double weight_reg);

}  // namespace iitnet::model
