#pragma once

#include <array>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "iitnet/nn/layers.hpp"

namespace iitnet::model {

using nn::Mat;
using nn::SignalBatch;
using nn::Vec;

// Widths of one bottleneck block: two reduced stages and the expanded output.
struct BottleneckSpec {
  int mid1 = 0;
  int mid2 = 0;
  int out = 0;
};

// Residual feature extractor over raw single-channel epochs. Narrower than
// the stock 50-layer image network and adapted to 1-D: reduced per-stage
// widths, an extra max pool between the second and third stages, and dropout
// in place of global average pooling so the temporal axis survives into the
// sequence model.
struct EncoderConfig {
  int in_channels = 1;
  int stem_channels = 64;
  int stem_kernel = 7;
  int stem_stride = 2;
  std::array<int, 4> blocks{3, 4, 6, 3};
  std::array<BottleneckSpec, 4> widths{
      {{16, 16, 64}, {16, 16, 64}, {32, 32, 128}, {32, 32, 128}}};
  std::array<int, 4> stage_strides{1, 2, 2, 2};  // first block of each stage
  bool pool_between_stages_2_3 = true;
  double dropout = 0.5;

  int feature_dim() const { return widths[3].out; }
  // Temporal length of the feature sequence for one input of `input_len`
  // samples: every stride-2 op takes ceil(len/2).
  int feature_len(int input_len) const;

  // Small configuration for gradient checks and fast tests.
  static EncoderConfig tiny();
};

// One pre-expansion bottleneck: 1x(s) -> BN -> ReLU -> 3x -> BN -> ReLU ->
// 1x -> BN, plus shortcut, then ReLU. The shortcut is a projection (1x conv
// with the block stride + BN) when the shape changes, identity otherwise.
class Bottleneck {
 public:
  Bottleneck(int in_ch, const BottleneckSpec& spec, int stride);

  struct Ctx {
    SignalBatch x;        // block input
    SignalBatch y1, y2;   // post-ReLU activations of the two reduced stages
    SignalBatch out;      // post-addition ReLU output
    nn::BatchNorm1d::Cache b1, b2, b3, bs;
  };

  void init(std::mt19937_64& rng);
  SignalBatch forward(const SignalBatch& x, bool training, Ctx* ctx);
  SignalBatch backward(const SignalBatch& gout, const Ctx& ctx);
  void collect(const std::string& prefix, std::vector<nn::ParamRef>& out);
  void collect_buffers(const std::string& prefix, std::vector<nn::ParamRef>& out);
  void zero_grad();

  bool has_projection() const { return proj_conv_.has_value(); }
  int stride() const { return stride_; }

 private:
  nn::Conv1d c1_, c2_, c3_;
  nn::BatchNorm1d b1_, b2_, b3_;
  std::optional<nn::Conv1d> proj_conv_;
  std::optional<nn::BatchNorm1d> proj_bn_;
  int stride_;
};

class Encoder {
 public:
  explicit Encoder(const EncoderConfig& cfg = EncoderConfig());

  struct Ctx {
    SignalBatch x;
    SignalBatch stem_act;  // post-ReLU stem output
    nn::BatchNorm1d::Cache stem_bn;
    nn::MaxPool1d::Cache stem_pool;
    nn::MaxPool1d::Cache mid_pool;
    std::vector<Bottleneck::Ctx> blocks;
    nn::Dropout::Cache drop;
  };

  void init(std::mt19937_64& rng);

  // x: in_channels x (count * input_len). Output: feature_dim x (count *
  // feature_len). `training` switches batch-norm statistics and dropout; ctx
  // non-null records activations for backward. The RNG is only consulted for
  // dropout masks in training mode.
  SignalBatch forward(const SignalBatch& x, bool training, std::mt19937_64* rng,
                      Ctx* ctx);
  SignalBatch backward(const SignalBatch& gy, const Ctx& ctx);

  void collect(const std::string& prefix, std::vector<nn::ParamRef>& out);
  void collect_buffers(const std::string& prefix, std::vector<nn::ParamRef>& out);
  void zero_grad();

  const EncoderConfig& config() const { return cfg_; }
  int feature_dim() const { return cfg_.feature_dim(); }
  int feature_len(int input_len) const { return cfg_.feature_len(input_len); }

 private:
  EncoderConfig cfg_;
  nn::Conv1d stem_;
  nn::BatchNorm1d stem_bn_;
  nn::MaxPool1d stem_pool_;
  nn::MaxPool1d mid_pool_;
  std::vector<Bottleneck> blocks_;
  int mid_pool_after_ = -1;  // flat block index the extra pool follows
  nn::Dropout drop_;
};

}  // namespace iitnet::model
