#pragma once

#include "iitnet/model/classifier.hpp"
#include "iitnet/model/head.hpp"
#include "iitnet/nn/layers.hpp"

namespace iitnet::model {

// One DeepSleepNet representation branch, in samples. The published schedule
// (Supratak et al., 2017) sets the first convolution's width and stride
// relative to the sampling rate; small_branch_for_rate/large_branch_for_rate
// reproduce it and configs/deepsleepnet_branches.json pins the same numbers
// as reviewable fixture data.
struct BranchSpec {
  int conv1_kernel = 50;
  int conv1_stride = 6;
  int conv1_filters = 64;
  int pool1_kernel = 8;  // pool strides equal their kernels
  int convn_kernel = 8;
  int convn_filters = 128;
  int n_convs = 3;
  int pool2_kernel = 4;

  int out_len(int input_len) const;
  int out_channels() const { return convn_filters; }

  nlohmann::json to_json() const;
  static BranchSpec from_json(const nlohmann::json& j);
};

BranchSpec small_branch_for_rate(double rate);  // width fs/2, stride fs/16
BranchSpec large_branch_for_rate(double rate);  // width fs*4, stride fs/2

struct BaselineConfig {
  int seq_len = 1;
  int epoch_len = 3000;
  int hidden_dim = 128;
  int classes = 5;
  double dropout = 0.5;
  BranchSpec small, large;

  static BaselineConfig for_rate(double rate, int seq_len);

  nlohmann::json to_json() const;
  static BaselineConfig from_json(const nlohmann::json& j);
};

// conv -> bn -> relu -> pool -> dropout -> (conv -> bn -> relu) x n -> pool.
class DsnBranch {
 public:
  DsnBranch(int in_channels, const BranchSpec& spec, double dropout);

  struct Ctx {
    std::vector<SignalBatch> conv_in;   // input to each conv (conv1 first)
    std::vector<nn::BatchNorm1d::Cache> bn;
    std::vector<SignalBatch> relu_out;
    nn::MaxPool1d::Cache pool1, pool2;
    nn::Dropout::Cache drop;
  };

  void init(std::mt19937_64& rng);
  SignalBatch forward(const SignalBatch& x, bool training, std::mt19937_64* rng,
                      Ctx* ctx) const;
  void backward(const SignalBatch& gy, Ctx& ctx);

  void collect(const std::string& prefix, std::vector<nn::ParamRef>& out);
  void collect_buffers(const std::string& prefix, std::vector<nn::ParamRef>& out);
  void zero_grad();

  const BranchSpec& spec() const { return spec_; }

 private:
  BranchSpec spec_;
  nn::Conv1d conv1_;
  nn::BatchNorm1d bn1_;
  nn::MaxPool1d pool1_;
  nn::Dropout drop_;
  std::vector<nn::Conv1d> convs_;
  std::vector<nn::BatchNorm1d> bns_;
  nn::MaxPool1d pool2_;
};

// Dual-branch trunk, each epoch flattened to one feature vector, recurrent
// context over the L epoch vectors only (inter-epoch context alone).
class E2eDeepSleepNet : public SequenceClassifier {
 public:
  explicit E2eDeepSleepNet(const BaselineConfig& cfg);

  std::string kind() const override { return "e2e-dsn"; }
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

  int feature_dim() const;  // flattened per-epoch vector width

 private:
  struct Ctx {
    DsnBranch::Ctx small, large;
    nn::Dropout::Cache drop;
    ContextHead::Ctx head;
    int batch = 0;
  };
  Mat forward_internal(const SignalBatch& x, bool training, std::mt19937_64* rng,
                       Ctx* ctx) const;

  BaselineConfig cfg_;
  mutable DsnBranch small_;
  mutable DsnBranch large_;
  nn::Dropout concat_drop_;
  mutable ContextHead head_;
};

// Dual-branch trunk kept as sequences: the large branch is linearly
// interpolated onto the small branch's length, channels concatenated, then
// two width-1 convolutions halve the channel count back to the small width.
// The recurrent context runs over every sub-epoch step (intra + inter).
class E2eIntraDeepSleepNet : public SequenceClassifier {
 public:
  explicit E2eIntraDeepSleepNet(const BaselineConfig& cfg);

  std::string kind() const override { return "e2e-intra-dsn"; }
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

  int steps_per_epoch() const;  // the small branch's output length

 private:
  struct Ctx {
    DsnBranch::Ctx small, large;
    nn::Dropout::Cache drop;
    SignalBatch mix_in;  // concatenated input to the first width-1 conv
    SignalBatch mix1;    // after first conv+bn+relu
    nn::BatchNorm1d::Cache bn_a, bn_b;
    SignalBatch relu_a, relu_b;
    ContextHead::Ctx head;
    int batch = 0;
  };
  Mat forward_internal(const SignalBatch& x, bool training, std::mt19937_64* rng,
                       Ctx* ctx) const;

  BaselineConfig cfg_;
  mutable DsnBranch small_;
  mutable DsnBranch large_;
  nn::Dropout concat_drop_;
  nn::Conv1d mix_a_;
  nn::BatchNorm1d mix_bn_a_;
  nn::Conv1d mix_b_;
  nn::BatchNorm1d mix_bn_b_;
  mutable ContextHead head_;
};

// Linear interpolation of each signal block onto `out_len` positions
// (align-corners). Exposed for direct testing; backward distributes each
// output gradient onto its two source columns.
SignalBatch interpolate_columns(const SignalBatch& x, int out_len);
SignalBatch interpolate_columns_backward(const SignalBatch& gy, int in_len);

}  // namespace iitnet::model
