#pragma once

#include <algorithm>
#include <random>
#include <string>
#include <vector>

#include "iitnet/nn/batch.hpp"
#include "iitnet/nn/params.hpp"

namespace iitnet::nn {

// Output length of a "same"-padded strided op: ceil(length / stride).
inline int same_out_len(int length, int stride) { return (length + stride - 1) / stride; }

// Left padding for "same" semantics (total = max((out-1)*s + k - n, 0),
// split left = total/2, right = rest).
inline int same_pad_left(int length, int kernel, int stride) {
  const int out = same_out_len(length, stride);
  const int total = std::max((out - 1) * stride + kernel - length, 0);
  return total / 2;
}

// 1-D convolution with "same" padding. Weights are stored out_ch x
// (in_ch * kernel); column layout matches the im2col patch layout
// (kernel-position-major, channel-minor).
class Conv1d {
 public:
  Conv1d(int in_ch, int out_ch, int kernel, int stride, bool bias = false);

  void init(std::mt19937_64& rng);  // He fan-in normal init

  SignalBatch forward(const SignalBatch& x) const;
  // Accumulates weight/bias gradients and returns the input gradient.
  // `x` must be the same batch the matching forward saw.
  SignalBatch backward(const SignalBatch& x, const SignalBatch& gy);

  void collect(const std::string& prefix, std::vector<ParamRef>& out);
  void zero_grad();

  int in_channels() const { return in_ch_; }
  int out_channels() const { return out_ch_; }
  int kernel() const { return kernel_; }
  int stride() const { return stride_; }

  Mat w;
  Vec b;
  Mat gw;
  Vec gb;

 private:
  int in_ch_, out_ch_, kernel_, stride_;
  bool has_bias_;
};

// Batch normalization over (batch, length) per channel. Training mode uses
// batch statistics (biased variance for normalization, unbiased for the
// running update, matching common framework behavior); eval mode uses the
// running averages.
class BatchNorm1d {
 public:
  struct Cache {
    Mat xhat;
    Vec inv_std;
    bool training = false;
  };

  BatchNorm1d(int channels, double eps = 1e-5, double momentum = 0.9);

  SignalBatch forward(const SignalBatch& x, bool training, Cache* cache);
  SignalBatch backward(const SignalBatch& gy, const Cache& cache);

  void collect(const std::string& prefix, std::vector<ParamRef>& out);
  void collect_buffers(const std::string& prefix, std::vector<ParamRef>& out);
  void zero_grad();

  Vec gamma, beta, running_mean, running_var;
  Vec ggamma, gbeta;

 private:
  int channels_;
  double eps_, momentum_;
};

// y = max(x, 0); backward masks on the stored output.
SignalBatch relu(const SignalBatch& x);
SignalBatch relu_backward(const SignalBatch& y, const SignalBatch& gy);

// Max pooling with "same" padding; padded positions never win the max.
class MaxPool1d {
 public:
  struct Cache {
    Eigen::MatrixXi argmax;  // source column index per output element
    int in_length = 0;
    int in_count = 0;
  };

  MaxPool1d(int kernel, int stride) : kernel_(kernel), stride_(stride) {}

  SignalBatch forward(const SignalBatch& x, Cache* cache) const;
  SignalBatch backward(const SignalBatch& gy, const Cache& cache) const;

 private:
  int kernel_, stride_;
};

// Inverted dropout: scales kept activations by 1/(1-p) during training,
// identity in eval mode.
class Dropout {
 public:
  struct Cache {
    Mat mask;
  };

  explicit Dropout(double p) : p_(p) {}

  Mat forward(const Mat& x, bool training, std::mt19937_64* rng, Cache* cache) const;
  Mat backward(const Mat& gy, const Cache& cache) const;

  double p() const { return p_; }

 private:
  double p_;
};

// Fully connected layer on column-vector batches: y = W x + b.
class Linear {
 public:
  Linear(int in_dim, int out_dim);

  void init(std::mt19937_64& rng);  // U(-1/sqrt(in), 1/sqrt(in))

  Mat forward(const Mat& x) const;
  Mat backward(const Mat& x, const Mat& gy);

  void collect(const std::string& prefix, std::vector<ParamRef>& out);
  void zero_grad();

  Mat w;
  Vec b;
  Mat gw;
  Vec gb;

 private:
  int in_dim_, out_dim_;
};

}  // namespace iitnet::nn
