#include "iitnet/nn/layers.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace iitnet::nn {

namespace {

// Gathers the padded patches of one signal: cols is (in_ch * kernel) x
// out_len. Row block kk*in_ch..(kk+1)*in_ch holds the input column at kernel
// offset kk. Padding is applied per signal, never across signal boundaries.
void im2col_one(const SignalBatch& x, int e, int kernel, int stride, int out_len,
                Mat& cols) {
  const int in_ch = x.channels();
  const int pad_left = same_pad_left(x.length, kernel, stride);
  const Eigen::Index src_base = static_cast<Eigen::Index>(e) * x.length;
  cols.setZero();
  for (int kk = 0; kk < kernel; ++kk) {
    // Valid output range for this kernel offset: 0 <= t*stride - pad + kk < len.
    const int off = kk - pad_left;
    int t_lo = 0;
    if (off < 0) t_lo = (-off + stride - 1) / stride;
    int t_hi = out_len;  // exclusive
    if (off + static_cast<long long>(t_hi - 1) * stride >= x.length)
      t_hi = static_cast<int>((x.length - 1 - off) / stride) + 1;
    if (t_hi <= t_lo) continue;
    if (stride == 1) {
      cols.block(static_cast<Eigen::Index>(kk) * in_ch, t_lo, in_ch, t_hi - t_lo) =
          x.data.block(0, src_base + t_lo + off, in_ch, t_hi - t_lo);
    } else {
      for (int t = t_lo; t < t_hi; ++t) {
        cols.block(static_cast<Eigen::Index>(kk) * in_ch, t, in_ch, 1) =
            x.data.col(src_base + static_cast<Eigen::Index>(t) * stride + off);
      }
    }
  }
}

// Scatter-adds one signal's patch gradients back onto the input layout.
void col2im_add_one(const Mat& gcols, int e, int kernel, int stride, int out_len,
                    SignalBatch& gx) {
  const int in_ch = gx.channels();
  const int pad_left = same_pad_left(gx.length, kernel, stride);
  const Eigen::Index dst_base = static_cast<Eigen::Index>(e) * gx.length;
  for (int kk = 0; kk < kernel; ++kk) {
    const int off = kk - pad_left;
    for (int t = 0; t < out_len; ++t) {
      const int j = t * stride + off;
      if (j < 0 || j >= gx.length) continue;
      gx.data.col(dst_base + j) +=
          gcols.block(static_cast<Eigen::Index>(kk) * in_ch, t, in_ch, 1);
    }
  }
}

}  // namespace

Conv1d::Conv1d(int in_ch, int out_ch, int kernel, int stride, bool bias)
    : w(Mat::Zero(out_ch, static_cast<Eigen::Index>(in_ch) * kernel)),
      b(Vec::Zero(bias ? out_ch : 0)),
      gw(Mat::Zero(out_ch, static_cast<Eigen::Index>(in_ch) * kernel)),
      gb(Vec::Zero(bias ? out_ch : 0)),
      in_ch_(in_ch),
      out_ch_(out_ch),
      kernel_(kernel),
      stride_(stride),
      has_bias_(bias) {}

void Conv1d::init(std::mt19937_64& rng) {
  const double stddev = std::sqrt(2.0 / (static_cast<double>(in_ch_) * kernel_));
  std::normal_distribution<double> dist(0.0, stddev);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = dist(rng);
  b.setZero();
}

SignalBatch Conv1d::forward(const SignalBatch& x) const {
  if (x.channels() != in_ch_)
    throw std::invalid_argument("Conv1d: expected " + std::to_string(in_ch_) +
                                " input channels, got " + std::to_string(x.channels()));
  const int out_len = same_out_len(x.length, stride_);
  // One GEMM per signal: the product shape is fixed, so a signal's output is
  // bitwise independent of how many other signals share the batch.
  Mat cols(static_cast<Eigen::Index>(in_ch_) * kernel_, out_len);
  SignalBatch y(out_ch_, x.count, out_len);
  for (int e = 0; e < x.count; ++e) {
    im2col_one(x, e, kernel_, stride_, out_len, cols);
    y.data.middleCols(static_cast<Eigen::Index>(e) * out_len, out_len).noalias() =
        w * cols;
  }
  if (has_bias_) y.data.colwise() += b;
  return y;
}

SignalBatch Conv1d::backward(const SignalBatch& x, const SignalBatch& gy) {
  const int out_len = gy.length;
  Mat cols(static_cast<Eigen::Index>(in_ch_) * kernel_, out_len);
  Mat gcols(cols.rows(), out_len);
  SignalBatch gx(in_ch_, x.count, x.length);
  for (int e = 0; e < x.count; ++e) {
    auto gy_e = gy.data.middleCols(static_cast<Eigen::Index>(e) * out_len, out_len);
    im2col_one(x, e, kernel_, stride_, out_len, cols);
    gw.noalias() += gy_e * cols.transpose();
    gcols.noalias() = w.transpose() * gy_e;
    col2im_add_one(gcols, e, kernel_, stride_, out_len, gx);
  }
  if (has_bias_) gb += gy.data.rowwise().sum();
  return gx;
}

void Conv1d::collect(const std::string& prefix, std::vector<ParamRef>& out) {
  out.push_back(param_ref(prefix + ".w", w, gw, true));
  if (has_bias_) out.push_back(param_ref(prefix + ".b", b, gb, false));
}

void Conv1d::zero_grad() {
  gw.setZero();
  gb.setZero();
}

BatchNorm1d::BatchNorm1d(int channels, double eps, double momentum)
    : gamma(Vec::Ones(channels)),
      beta(Vec::Zero(channels)),
      running_mean(Vec::Zero(channels)),
      running_var(Vec::Ones(channels)),
      ggamma(Vec::Zero(channels)),
      gbeta(Vec::Zero(channels)),
      channels_(channels),
      eps_(eps),
      momentum_(momentum) {}

SignalBatch BatchNorm1d::forward(const SignalBatch& x, bool training, Cache* cache) {
  if (x.channels() != channels_)
    throw std::invalid_argument("BatchNorm1d: channel mismatch");
  const Eigen::Index m = x.data.cols();

  Vec mean(channels_), inv_std(channels_);
  Mat xhat;
  if (training) {
    mean = x.data.rowwise().mean();
    Mat centered = x.data.colwise() - mean;
    Vec var = centered.array().square().rowwise().mean();
    inv_std = (var.array() + eps_).rsqrt();
    xhat = centered.array().colwise() * inv_std.array();

    const double correction = m > 1 ? static_cast<double>(m) / (m - 1) : 1.0;
    running_mean = momentum_ * running_mean + (1.0 - momentum_) * mean;
    running_var = momentum_ * running_var + (1.0 - momentum_) * (var * correction);
  } else {
    mean = running_mean;
    inv_std = (running_var.array() + eps_).rsqrt();
    xhat = (x.data.colwise() - mean).array().colwise() * inv_std.array();
  }

  SignalBatch y(channels_, x.count, x.length);
  y.data = (xhat.array().colwise() * gamma.array()).colwise() + beta.array();
  if (cache) {
    cache->xhat = std::move(xhat);
    cache->inv_std = std::move(inv_std);
    cache->training = training;
  }
  return y;
}

SignalBatch BatchNorm1d::backward(const SignalBatch& gy, const Cache& cache) {
  const Eigen::Index m = gy.data.cols();
  ggamma += (gy.data.array() * cache.xhat.array()).rowwise().sum().matrix();
  gbeta += gy.data.rowwise().sum();

  SignalBatch gx(channels_, gy.count, gy.length);
  if (!cache.training) {
    gx.data = gy.data.array().colwise() * (gamma.array() * cache.inv_std.array());
    return gx;
  }
  // Training mode: account for the dependence of batch statistics on x.
  Mat dxhat = gy.data.array().colwise() * gamma.array();
  Vec sum_dxhat = dxhat.rowwise().sum();
  Vec sum_dxhat_xhat = (dxhat.array() * cache.xhat.array()).rowwise().sum();
  gx.data = (dxhat * static_cast<double>(m)).colwise() - sum_dxhat;
  gx.data.array() -= cache.xhat.array().colwise() * sum_dxhat_xhat.array();
  gx.data.array().colwise() *= cache.inv_std.array() / static_cast<double>(m);
  return gx;
}

void BatchNorm1d::collect(const std::string& prefix, std::vector<ParamRef>& out) {
  out.push_back(param_ref(prefix + ".gamma", gamma, ggamma, false));
  out.push_back(param_ref(prefix + ".beta", beta, gbeta, false));
}

void BatchNorm1d::collect_buffers(const std::string& prefix, std::vector<ParamRef>& out) {
  out.push_back(buffer_ref(prefix + ".running_mean", running_mean));
  out.push_back(buffer_ref(prefix + ".running_var", running_var));
}

void BatchNorm1d::zero_grad() {
  ggamma.setZero();
  gbeta.setZero();
}

SignalBatch relu(const SignalBatch& x) {
  SignalBatch y = x;
  y.data = y.data.cwiseMax(0.0);
  return y;
}

SignalBatch relu_backward(const SignalBatch& y, const SignalBatch& gy) {
  SignalBatch gx = gy;
  gx.data = (y.data.array() > 0.0).select(gy.data, 0.0);
  return gx;
}

SignalBatch MaxPool1d::forward(const SignalBatch& x, Cache* cache) const {
  const int out_len = same_out_len(x.length, stride_);
  const int pad_left = same_pad_left(x.length, kernel_, stride_);
  const int ch = x.channels();

  SignalBatch y(ch, x.count, out_len);
  Eigen::MatrixXi argmax(ch, static_cast<Eigen::Index>(x.count) * out_len);

  for (int e = 0; e < x.count; ++e) {
    const Eigen::Index src_base = static_cast<Eigen::Index>(e) * x.length;
    const Eigen::Index dst_base = static_cast<Eigen::Index>(e) * out_len;
    for (int t = 0; t < out_len; ++t) {
      const int start = t * stride_ - pad_left;
      for (int c = 0; c < ch; ++c) {
        double best = -std::numeric_limits<double>::infinity();
        int best_j = -1;
        for (int kk = 0; kk < kernel_; ++kk) {
          const int j = start + kk;
          if (j < 0 || j >= x.length) continue;
          const double v = x.data(c, src_base + j);
          if (v > best) {
            best = v;
            best_j = j;
          }
        }
        y.data(c, dst_base + t) = best;
        argmax(c, dst_base + t) = best_j;
      }
    }
  }
  if (cache) {
    cache->argmax = std::move(argmax);
    cache->in_length = x.length;
    cache->in_count = x.count;
  }
  return y;
}

SignalBatch MaxPool1d::backward(const SignalBatch& gy, const Cache& cache) const {
  SignalBatch gx(gy.channels(), cache.in_count, cache.in_length);
  const int out_len = gy.length;
  for (int e = 0; e < gy.count; ++e) {
    const Eigen::Index src_base = static_cast<Eigen::Index>(e) * cache.in_length;
    const Eigen::Index dst_base = static_cast<Eigen::Index>(e) * out_len;
    for (int t = 0; t < out_len; ++t) {
      for (int c = 0; c < gy.channels(); ++c) {
        const int j = cache.argmax(c, dst_base + t);
        if (j >= 0) gx.data(c, src_base + j) += gy.data(c, dst_base + t);
      }
    }
  }
  return gx;
}

Mat Dropout::forward(const Mat& x, bool training, std::mt19937_64* rng, Cache* cache) const {
  if (!training || p_ <= 0.0) {
    if (cache) cache->mask.resize(0, 0);
    return x;
  }
  if (!rng) throw std::invalid_argument("Dropout: training mode requires an RNG");
  std::bernoulli_distribution keep(1.0 - p_);
  const double scale = 1.0 / (1.0 - p_);
  Mat mask(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < mask.size(); ++i)
    mask.data()[i] = keep(*rng) ? scale : 0.0;
  Mat y = x.cwiseProduct(mask);
  if (cache) cache->mask = std::move(mask);
  return y;
}

Mat Dropout::backward(const Mat& gy, const Cache& cache) const {
  if (cache.mask.size() == 0) return gy;
  return gy.cwiseProduct(cache.mask);
}

Linear::Linear(int in_dim, int out_dim)
    : w(Mat::Zero(out_dim, in_dim)),
      b(Vec::Zero(out_dim)),
      gw(Mat::Zero(out_dim, in_dim)),
      gb(Vec::Zero(out_dim)),
      in_dim_(in_dim),
      out_dim_(out_dim) {}

void Linear::init(std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_dim_));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = dist(rng);
  for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = dist(rng);
}

Mat Linear::forward(const Mat& x) const {
  Mat y = w * x;
  y.colwise() += b;
  return y;
}

Mat Linear::backward(const Mat& x, const Mat& gy) {
  gw.noalias() += gy * x.transpose();
  gb += gy.rowwise().sum();
  return w.transpose() * gy;
}

void Linear::collect(const std::string& prefix, std::vector<ParamRef>& out) {
  out.push_back(param_ref(prefix + ".w", w, gw, true));
  out.push_back(param_ref(prefix + ".b", b, gb, false));
}

void Linear::zero_grad() {
  gw.setZero();
  gb.setZero();
}

}  // namespace iitnet::nn
