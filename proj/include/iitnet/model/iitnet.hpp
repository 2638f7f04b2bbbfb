#pragma once

#include "iitnet/model/classifier.hpp"
#include "iitnet/model/encoder.hpp"
#include "iitnet/model/head.hpp"

namespace iitnet::model {

struct IitnetConfig {
  EncoderConfig encoder;
  int seq_len = 1;       // epochs per input sequence (L)
  int epoch_len = 3000;  // samples per epoch
  int hidden_dim = 128;  // per direction
  int classes = 5;

  nlohmann::json to_json() const;
  static IitnetConfig from_json(const nlohmann::json& j);
};

// Encoder shared across the epochs of a sequence, followed by the recurrent
// context head. Epoch features are laid out chronologically, so a sequence
// contributes seq_len * feature_len recurrent steps.
class Iitnet : public SequenceClassifier {
 public:
  explicit Iitnet(const IitnetConfig& cfg);

  std::string kind() const override { return "iitnet"; }
  int seq_len() const override { return cfg_.seq_len; }
  int epoch_len() const override { return cfg_.epoch_len; }
  int classes() const override { return cfg_.classes; }

  void init(std::mt19937_64& rng) override;
  Mat predict_logits(const SignalBatch& x) const override;
  LossParts backprop(const SignalBatch& x, const std::vector<int>& labels,
                     double weight_reg, bool training, std::mt19937_64* rng) override;
  void zero_grad() override;
  std::vector<nn::ParamRef> params() override;
  std::vector<nn::ParamRef> buffers() override;
  nlohmann::json config_json() const override;

  // Feature map of a batch of independent epochs (count = epochs). Exposed
  // for the weight-sharing equivalence checks and feature inspection.
  SignalBatch encode_epochs(const SignalBatch& x) const;

  const IitnetConfig& config() const { return cfg_; }
  Encoder& encoder() { return encoder_; }
  ContextHead& head() { return head_; }

 private:
  Mat forward_internal(const SignalBatch& x, bool training, std::mt19937_64* rng,
                       Encoder::Ctx* ectx, ContextHead::Ctx* hctx) const;

  IitnetConfig cfg_;
  mutable Encoder encoder_;  // mutable: eval-mode forward does not observably mutate
  mutable ContextHead head_;
};

}  // namespace iitnet::model
