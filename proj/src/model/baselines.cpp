#include "iitnet/model/baselines.hpp"

#include <cmath>
#include <stdexcept>

#include "iitnet/nn/loss.hpp"

namespace iitnet::model {

int BranchSpec::out_len(int input_len) const {
  int l = nn::same_out_len(input_len, conv1_stride);
  l = nn::same_out_len(l, pool1_kernel);
  // The stacked convolutions are stride 1 and "same": length unchanged.
  return nn::same_out_len(l, pool2_kernel);
}

nlohmann::json BranchSpec::to_json() const {
  return {{"conv1_kernel", conv1_kernel},   {"conv1_stride", conv1_stride},
          {"conv1_filters", conv1_filters}, {"pool1_kernel", pool1_kernel},
          {"convn_kernel", convn_kernel},   {"convn_filters", convn_filters},
          {"n_convs", n_convs},             {"pool2_kernel", pool2_kernel}};
}

BranchSpec BranchSpec::from_json(const nlohmann::json& j) {
  BranchSpec s;
  s.conv1_kernel = j.at("conv1_kernel");
  s.conv1_stride = j.at("conv1_stride");
  s.conv1_filters = j.at("conv1_filters");
  s.pool1_kernel = j.at("pool1_kernel");
  s.convn_kernel = j.at("convn_kernel");
  s.convn_filters = j.at("convn_filters");
  s.n_convs = j.at("n_convs");
  s.pool2_kernel = j.at("pool2_kernel");
  return s;
}

BranchSpec small_branch_for_rate(double rate) {
  BranchSpec s;
  s.conv1_kernel = std::max(1, static_cast<int>(std::llround(rate / 2.0)));
  s.conv1_stride = std::max(1, static_cast<int>(std::llround(rate / 16.0)));
  s.conv1_filters = 64;
  s.pool1_kernel = 8;
  s.convn_kernel = 8;
  s.convn_filters = 128;
  s.n_convs = 3;
  s.pool2_kernel = 4;
  return s;
}

BranchSpec large_branch_for_rate(double rate) {
  BranchSpec s;
  s.conv1_kernel = std::max(1, static_cast<int>(std::llround(rate * 4.0)));
  s.conv1_stride = std::max(1, static_cast<int>(std::llround(rate / 2.0)));
  s.conv1_filters = 64;
  s.pool1_kernel = 4;
  s.convn_kernel = 6;
  s.convn_filters = 128;
  s.n_convs = 3;
  s.pool2_kernel = 2;
  return s;
}

BaselineConfig BaselineConfig::for_rate(double rate, int seq_len) {
  BaselineConfig cfg;
  cfg.seq_len = seq_len;
  cfg.epoch_len = static_cast<int>(std::llround(30.0 * rate));
  cfg.small = small_branch_for_rate(rate);
  cfg.large = large_branch_for_rate(rate);
  return cfg;
}

nlohmann::json BaselineConfig::to_json() const {
  return {{"seq_len", seq_len},       {"epoch_len", epoch_len},
          {"hidden_dim", hidden_dim}, {"classes", classes},
          {"dropout", dropout},       {"small", small.to_json()},
          {"large", large.to_json()}};
}

BaselineConfig BaselineConfig::from_json(const nlohmann::json& j) {
  BaselineConfig cfg;
  cfg.seq_len = j.at("seq_len");
  cfg.epoch_len = j.at("epoch_len");
  cfg.hidden_dim = j.at("hidden_dim");
  cfg.classes = j.at("classes");
  cfg.dropout = j.at("dropout");
  cfg.small = BranchSpec::from_json(j.at("small"));
  cfg.large = BranchSpec::from_json(j.at("large"));
  return cfg;
}

DsnBranch::DsnBranch(int in_channels, const BranchSpec& spec, double dropout)
    : spec_(spec),
      conv1_(in_channels, spec.conv1_filters, spec.conv1_kernel, spec.conv1_stride),
      bn1_(spec.conv1_filters),
      pool1_(spec.pool1_kernel, spec.pool1_kernel),
      drop_(dropout),
      pool2_(spec.pool2_kernel, spec.pool2_kernel) {
  int in = spec.conv1_filters;
  for (int i = 0; i < spec.n_convs; ++i) {
    convs_.emplace_back(in, spec.convn_filters, spec.convn_kernel, 1);
    bns_.emplace_back(spec.convn_filters);
    in = spec.convn_filters;
  }
}

void DsnBranch::init(std::mt19937_64& rng) {
  conv1_.init(rng);
  for (auto& c : convs_) c.init(rng);
}

SignalBatch DsnBranch::forward(const SignalBatch& x, bool training,
                               std::mt19937_64* rng, Ctx* ctx) const {
  auto& self = const_cast<DsnBranch&>(*this);
  if (ctx) {
    ctx->conv_in.resize(static_cast<size_t>(spec_.n_convs) + 1);
    ctx->bn.resize(static_cast<size_t>(spec_.n_convs) + 1);
    ctx->relu_out.resize(static_cast<size_t>(spec_.n_convs) + 1);
    ctx->conv_in[0] = x;
  }
  SignalBatch y = nn::relu(
      self.bn1_.forward(conv1_.forward(x), training, ctx ? &ctx->bn[0] : nullptr));
  if (ctx) ctx->relu_out[0] = y;
  y = pool1_.forward(y, ctx ? &ctx->pool1 : nullptr);
  y.data = drop_.forward(y.data, training, rng, ctx ? &ctx->drop : nullptr);
  for (int i = 0; i < spec_.n_convs; ++i) {
    if (ctx) ctx->conv_in[static_cast<size_t>(i) + 1] = y;
    y = nn::relu(self.bns_[static_cast<size_t>(i)].forward(
        convs_[static_cast<size_t>(i)].forward(y), training,
        ctx ? &ctx->bn[static_cast<size_t>(i) + 1] : nullptr));
    if (ctx) ctx->relu_out[static_cast<size_t>(i) + 1] = y;
  }
  return pool2_.forward(y, ctx ? &ctx->pool2 : nullptr);
}

void DsnBranch::backward(const SignalBatch& gy, Ctx& ctx) {
  SignalBatch g = pool2_.backward(gy, ctx.pool2);
  for (int i = spec_.n_convs - 1; i >= 0; --i) {
    g = nn::relu_backward(ctx.relu_out[static_cast<size_t>(i) + 1], g);
    g = bns_[static_cast<size_t>(i)].backward(g, ctx.bn[static_cast<size_t>(i) + 1]);
    g = convs_[static_cast<size_t>(i)].backward(ctx.conv_in[static_cast<size_t>(i) + 1],
                                                g);
  }
  g.data = drop_.backward(g.data, ctx.drop);
  g = pool1_.backward(g, ctx.pool1);
  g = nn::relu_backward(ctx.relu_out[0], g);
  g = bn1_.backward(g, ctx.bn[0]);
  conv1_.backward(ctx.conv_in[0], g);
}

void DsnBranch::collect(const std::string& prefix, std::vector<nn::ParamRef>& out) {
  conv1_.collect(prefix + ".conv1", out);
  bn1_.collect(prefix + ".bn1", out);
  for (size_t i = 0; i < convs_.size(); ++i) {
    convs_[i].collect(prefix + ".conv" + std::to_string(i + 2), out);
    bns_[i].collect(prefix + ".bn" + std::to_string(i + 2), out);
  }
}

void DsnBranch::collect_buffers(const std::string& prefix,
                                std::vector<nn::ParamRef>& out) {
  bn1_.collect_buffers(prefix + ".bn1", out);
  for (size_t i = 0; i < bns_.size(); ++i)
    bns_[i].collect_buffers(prefix + ".bn" + std::to_string(i + 2), out);
}

void DsnBranch::zero_grad() {
  conv1_.zero_grad();
  bn1_.zero_grad();
  for (auto& c : convs_) c.zero_grad();
  for (auto& b : bns_) b.zero_grad();
}

SignalBatch interpolate_columns(const SignalBatch& x, int out_len) {
  SignalBatch y(x.channels(), x.count, out_len);
  const int in_len = x.length;
  for (int b = 0; b < x.count; ++b) {
    auto src = x.block(b);
    auto dst = y.block(b);
    for (int j = 0; j < out_len; ++j) {
      if (in_len == 1) {
        dst.col(j) = src.col(0);
        continue;
      }
      const double pos = out_len == 1
                             ? 0.0
                             : static_cast<double>(j) * (in_len - 1) / (out_len - 1);
      const int i0 = static_cast<int>(pos);
      const int i1 = std::min(i0 + 1, in_len - 1);
      const double frac = pos - i0;
      dst.col(j) = (1.0 - frac) * src.col(i0) + frac * src.col(i1);
    }
  }
  return y;
}

SignalBatch interpolate_columns_backward(const SignalBatch& gy, int in_len) {
  SignalBatch gx(gy.channels(), gy.count, in_len);
  const int out_len = gy.length;
  for (int b = 0; b < gy.count; ++b) {
    auto src = gy.block(b);
    auto dst = gx.block(b);
    for (int j = 0; j < out_len; ++j) {
      if (in_len == 1) {
        dst.col(0) += src.col(j);
        continue;
      }
      const double pos = out_len == 1
                             ? 0.0
                             : static_cast<double>(j) * (in_len - 1) / (out_len - 1);
      const int i0 = static_cast<int>(pos);
      const int i1 = std::min(i0 + 1, in_len - 1);
      const double frac = pos - i0;
      dst.col(i0) += (1.0 - frac) * src.col(j);
      if (frac != 0.0) dst.col(i1) += frac * src.col(j);
    }
  }
  return gx;
}

E2eDeepSleepNet::E2eDeepSleepNet(const BaselineConfig& cfg)
    : cfg_(cfg),
      small_(1, cfg.small, cfg.dropout),
      large_(1, cfg.large, cfg.dropout),
      concat_drop_(cfg.dropout),
      head_(cfg.small.out_channels() * cfg.small.out_len(cfg.epoch_len) +
                cfg.large.out_channels() * cfg.large.out_len(cfg.epoch_len),
            cfg.hidden_dim, cfg.classes) {}

int E2eDeepSleepNet::feature_dim() const {
  return cfg_.small.out_channels() * cfg_.small.out_len(cfg_.epoch_len) +
         cfg_.large.out_channels() * cfg_.large.out_len(cfg_.epoch_len);
}

void E2eDeepSleepNet::init(std::mt19937_64& rng) {
  small_.init(rng);
  large_.init(rng);
  head_.init(rng);
}

Mat E2eDeepSleepNet::forward_internal(const SignalBatch& x, bool training,
                                      std::mt19937_64* rng, Ctx* ctx) const {
  if (x.length != cfg_.epoch_len)
    throw std::invalid_argument("e2e-dsn: epoch length mismatch");
  if (x.count % cfg_.seq_len != 0)
    throw std::invalid_argument("e2e-dsn: epoch count not divisible by seq_len");
  const int batch = x.count / cfg_.seq_len;
  if (ctx) ctx->batch = batch;

  SignalBatch so = small_.forward(x, training, rng, ctx ? &ctx->small : nullptr);
  SignalBatch lo = large_.forward(x, training, rng, ctx ? &ctx->large : nullptr);
  const auto ds = static_cast<Eigen::Index>(so.channels()) * so.length;
  const auto dl = static_cast<Eigen::Index>(lo.channels()) * lo.length;

  // Flatten each epoch's two branch outputs into one feature vector; the
  // column blocks are contiguous, so this is a pure relayout.
  Mat feats(ds + dl, x.count);
  for (int c = 0; c < x.count; ++c) {
    feats.col(c).head(ds) = Eigen::Map<const Vec>(so.data.data() + ds * c, ds);
    feats.col(c).tail(dl) = Eigen::Map<const Vec>(lo.data.data() + dl * c, dl);
  }
  feats = concat_drop_.forward(feats, training, rng, ctx ? &ctx->drop : nullptr);
  auto& self = const_cast<E2eDeepSleepNet&>(*this);
  return self.head_.forward(feats, batch, cfg_.seq_len, ctx ? &ctx->head : nullptr);
}

Mat E2eDeepSleepNet::predict_logits(const SignalBatch& x) const {
  return forward_internal(x, false, nullptr, nullptr);
}

LossParts E2eDeepSleepNet::backprop(const SignalBatch& x, const std::vector<int>& labels,
                                    double weight_reg, bool training,
                                    std::mt19937_64* rng) {
  Ctx ctx;
  Mat logits = forward_internal(x, training, rng, &ctx);
  Mat dlogits;
  LossParts loss;
  loss.data = nn::softmax_cross_entropy(logits, labels, &dlogits);

  Mat gfeats = concat_drop_.backward(head_.backward(dlogits, ctx.head), ctx.drop);

  const int s_len = cfg_.small.out_len(cfg_.epoch_len);
  const int l_len = cfg_.large.out_len(cfg_.epoch_len);
  const auto ds = static_cast<Eigen::Index>(cfg_.small.out_channels()) * s_len;
  const auto dl = static_cast<Eigen::Index>(cfg_.large.out_channels()) * l_len;
  SignalBatch gsmall(cfg_.small.out_channels(), x.count, s_len);
  SignalBatch glarge(cfg_.large.out_channels(), x.count, l_len);
  for (int c = 0; c < x.count; ++c) {
    Eigen::Map<Vec>(gsmall.data.data() + ds * c, ds) = gfeats.col(c).head(ds);
    Eigen::Map<Vec>(glarge.data.data() + dl * c, dl) = gfeats.col(c).tail(dl);
  }
  small_.backward(gsmall, ctx.small);
  large_.backward(glarge, ctx.large);

  auto ps = params();
  loss.penalty = weight_reg * regularized_squared_norm(ps);
  add_regularization_gradient(ps, weight_reg);
  return loss;
}

void E2eDeepSleepNet::zero_grad() {
  small_.zero_grad();
  large_.zero_grad();
  head_.zero_grad();
}

std::vector<nn::ParamRef> E2eDeepSleepNet::params() {
  std::vector<nn::ParamRef> out;
  small_.collect("small", out);
  large_.collect("large", out);
  head_.collect("head", out);
  return out;
}

std::vector<nn::ParamRef> E2eDeepSleepNet::buffers() {
  std::vector<nn::ParamRef> out;
  small_.collect_buffers("small", out);
  large_.collect_buffers("large", out);
  return out;
}

nlohmann::json E2eDeepSleepNet::config_json() const { return cfg_.to_json(); }

E2eIntraDeepSleepNet::E2eIntraDeepSleepNet(const BaselineConfig& cfg)
    : cfg_(cfg),
      small_(1, cfg.small, cfg.dropout),
      large_(1, cfg.large, cfg.dropout),
      concat_drop_(cfg.dropout),
      mix_a_(cfg.small.out_channels() + cfg.large.out_channels(),
             cfg.small.out_channels(), 1, 1),
      mix_bn_a_(cfg.small.out_channels()),
      mix_b_(cfg.small.out_channels(), cfg.small.out_channels(), 1, 1),
      mix_bn_b_(cfg.small.out_channels()),
      head_(cfg.small.out_channels(), cfg.hidden_dim, cfg.classes) {}

int E2eIntraDeepSleepNet::steps_per_epoch() const {
  return cfg_.small.out_len(cfg_.epoch_len);
}

void E2eIntraDeepSleepNet::init(std::mt19937_64& rng) {
  small_.init(rng);
  large_.init(rng);
  mix_a_.init(rng);
  mix_b_.init(rng);
  head_.init(rng);
}

Mat E2eIntraDeepSleepNet::forward_internal(const SignalBatch& x, bool training,
                                           std::mt19937_64* rng, Ctx* ctx) const {
  if (x.length != cfg_.epoch_len)
    throw std::invalid_argument("e2e-intra-dsn: epoch length mismatch");
  if (x.count % cfg_.seq_len != 0)
    throw std::invalid_argument("e2e-intra-dsn: epoch count not divisible by seq_len");
  const int batch = x.count / cfg_.seq_len;
  if (ctx) ctx->batch = batch;

  SignalBatch so = small_.forward(x, training, rng, ctx ? &ctx->small : nullptr);
  SignalBatch lo = large_.forward(x, training, rng, ctx ? &ctx->large : nullptr);
  SignalBatch li = interpolate_columns(lo, so.length);

  SignalBatch cat(so.channels() + li.channels(), x.count, so.length);
  cat.data.topRows(so.channels()) = so.data;
  cat.data.bottomRows(li.channels()) = li.data;
  cat.data = concat_drop_.forward(cat.data, training, rng, ctx ? &ctx->drop : nullptr);
  if (ctx) ctx->mix_in = cat;

  auto& self = const_cast<E2eIntraDeepSleepNet&>(*this);
  SignalBatch h = nn::relu(self.mix_bn_a_.forward(mix_a_.forward(cat), training,
                                                  ctx ? &ctx->bn_a : nullptr));
  if (ctx) {
    ctx->relu_a = h;
    ctx->mix1 = h;
  }
  h = nn::relu(self.mix_bn_b_.forward(mix_b_.forward(h), training,
                                      ctx ? &ctx->bn_b : nullptr));
  if (ctx) ctx->relu_b = h;

  return self.head_.forward(h.data, batch, cfg_.seq_len * so.length,
                            ctx ? &ctx->head : nullptr);
}

Mat E2eIntraDeepSleepNet::predict_logits(const SignalBatch& x) const {
  return forward_internal(x, false, nullptr, nullptr);
}

LossParts E2eIntraDeepSleepNet::backprop(const SignalBatch& x,
                                         const std::vector<int>& labels,
                                         double weight_reg, bool training,
                                         std::mt19937_64* rng) {
  Ctx ctx;
  Mat logits = forward_internal(x, training, rng, &ctx);
  Mat dlogits;
  LossParts loss;
  loss.data = nn::softmax_cross_entropy(logits, labels, &dlogits);

  const int s_len = cfg_.small.out_len(cfg_.epoch_len);
  const int l_len = cfg_.large.out_len(cfg_.epoch_len);

  SignalBatch gh(cfg_.small.out_channels(), x.count, s_len);
  gh.data = head_.backward(dlogits, ctx.head);
  gh = nn::relu_backward(ctx.relu_b, gh);
  gh = mix_bn_b_.backward(gh, ctx.bn_b);
  gh = mix_b_.backward(ctx.mix1, gh);
  gh = nn::relu_backward(ctx.relu_a, gh);
  gh = mix_bn_a_.backward(gh, ctx.bn_a);
  SignalBatch gcat = mix_a_.backward(ctx.mix_in, gh);
  gcat.data = concat_drop_.backward(gcat.data, ctx.drop);

  SignalBatch gsmall(cfg_.small.out_channels(), x.count, s_len);
  gsmall.data = gcat.data.topRows(cfg_.small.out_channels());
  SignalBatch gli(cfg_.large.out_channels(), x.count, s_len);
  gli.data = gcat.data.bottomRows(cfg_.large.out_channels());
  SignalBatch glarge = interpolate_columns_backward(gli, l_len);
  small_.backward(gsmall, ctx.small);
  large_.backward(glarge, ctx.large);

  auto ps = params();
  loss.penalty = weight_reg * regularized_squared_norm(ps);
  add_regularization_gradient(ps, weight_reg);
  return loss;
}

void E2eIntraDeepSleepNet::zero_grad() {
  small_.zero_grad();
  large_.zero_grad();
  mix_a_.zero_grad();
  mix_bn_a_.zero_grad();
  mix_b_.zero_grad();
  mix_bn_b_.zero_grad();
  head_.zero_grad();
}

std::vector<nn::ParamRef> E2eIntraDeepSleepNet::params() {
  std::vector<nn::ParamRef> out;
  small_.collect("small", out);
  large_.collect("large", out);
  mix_a_.collect("mix_a", out);
  mix_bn_a_.collect("mix_bn_a", out);
  mix_b_.collect("mix_b", out);
  mix_bn_b_.collect("mix_bn_b", out);
  head_.collect("head", out);
  return out;
}

std::vector<nn::ParamRef> E2eIntraDeepSleepNet::buffers() {
  std::vector<nn::ParamRef> out;
  small_.collect_buffers("small", out);
  large_.collect_buffers("large", out);
  mix_bn_a_.collect_buffers("mix_bn_a", out);
  mix_bn_b_.collect_buffers("mix_bn_b", out);
  return out;
}

nlohmann::json E2eIntraDeepSleepNet::config_json() const { return cfg_.to_json(); }

}  // namespace iitnet::model
