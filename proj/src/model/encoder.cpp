#include "iitnet/model/encoder.hpp"

#include <stdexcept>

namespace iitnet::model {

int EncoderConfig::feature_len(int input_len) const {
  int len = nn::same_out_len(input_len, stem_stride);
  len = nn::same_out_len(len, 2);  // stem pool
  for (int s = 0; s < 4; ++s) {
    len = nn::same_out_len(len, stage_strides[s]);
    if (pool_between_stages_2_3 && s == 1) len = nn::same_out_len(len, 2);
  }
  return len;
}

EncoderConfig EncoderConfig::tiny() {
  EncoderConfig cfg;
  cfg.stem_channels = 4;
  cfg.stem_kernel = 5;
  cfg.blocks = {1, 1, 1, 1};
  cfg.widths = {{{2, 2, 4}, {2, 2, 4}, {3, 3, 6}, {3, 3, 6}}};
  return cfg;
}

Bottleneck::Bottleneck(int in_ch, const BottleneckSpec& spec, int stride)
    : c1_(in_ch, spec.mid1, 1, stride),
      c2_(spec.mid1, spec.mid2, 3, 1),
      c3_(spec.mid2, spec.out, 1, 1),
      b1_(spec.mid1),
      b2_(spec.mid2),
      b3_(spec.out),
      stride_(stride) {
  if (stride != 1 || in_ch != spec.out) {
    proj_conv_.emplace(in_ch, spec.out, 1, stride);
    proj_bn_.emplace(spec.out);
  }
}

void Bottleneck::init(std::mt19937_64& rng) {
  c1_.init(rng);
  c2_.init(rng);
  c3_.init(rng);
  if (proj_conv_) proj_conv_->init(rng);
}

SignalBatch Bottleneck::forward(const SignalBatch& x, bool training, Ctx* ctx) {
  SignalBatch y1 = nn::relu(b1_.forward(c1_.forward(x), training, ctx ? &ctx->b1 : nullptr));
  SignalBatch y2 = nn::relu(b2_.forward(c2_.forward(y1), training, ctx ? &ctx->b2 : nullptr));
  SignalBatch main = b3_.forward(c3_.forward(y2), training, ctx ? &ctx->b3 : nullptr);

  if (proj_conv_) {
    main.data += proj_bn_->forward(proj_conv_->forward(x), training, ctx ? &ctx->bs : nullptr)
                     .data;
  } else {
    main.data += x.data;
  }
  SignalBatch out = nn::relu(main);
  if (ctx) {
    ctx->x = x;
    ctx->y1 = std::move(y1);
    ctx->y2 = std::move(y2);
    ctx->out = out;
  }
  return out;
}

SignalBatch Bottleneck::backward(const SignalBatch& gout, const Ctx& ctx) {
  SignalBatch gadd = nn::relu_backward(ctx.out, gout);

  SignalBatch gx_short(ctx.x.channels(), ctx.x.count, ctx.x.length);
  if (proj_conv_) {
    gx_short = proj_conv_->backward(ctx.x, proj_bn_->backward(gadd, ctx.bs));
  } else {
    gx_short.data = gadd.data;
  }

  SignalBatch g = c3_.backward(ctx.y2, b3_.backward(gadd, ctx.b3));
  g = nn::relu_backward(ctx.y2, g);
  g = c2_.backward(ctx.y1, b2_.backward(g, ctx.b2));
  g = nn::relu_backward(ctx.y1, g);
  g = c1_.backward(ctx.x, b1_.backward(g, ctx.b1));

  g.data += gx_short.data;
  return g;
}

void Bottleneck::collect(const std::string& prefix, std::vector<nn::ParamRef>& out) {
  c1_.collect(prefix + ".c1", out);
  b1_.collect(prefix + ".b1", out);
  c2_.collect(prefix + ".c2", out);
  b2_.collect(prefix + ".b2", out);
  c3_.collect(prefix + ".c3", out);
  b3_.collect(prefix + ".b3", out);
  if (proj_conv_) {
    proj_conv_->collect(prefix + ".proj", out);
    proj_bn_->collect(prefix + ".proj_bn", out);
  }
}

void Bottleneck::collect_buffers(const std::string& prefix,
                                 std::vector<nn::ParamRef>& out) {
  b1_.collect_buffers(prefix + ".b1", out);
  b2_.collect_buffers(prefix + ".b2", out);
  b3_.collect_buffers(prefix + ".b3", out);
  if (proj_bn_) proj_bn_->collect_buffers(prefix + ".proj_bn", out);
}

void Bottleneck::zero_grad() {
  c1_.zero_grad();
  b1_.zero_grad();
  c2_.zero_grad();
  b2_.zero_grad();
  c3_.zero_grad();
  b3_.zero_grad();
  if (proj_conv_) {
    proj_conv_->zero_grad();
    proj_bn_->zero_grad();
  }
}

Encoder::Encoder(const EncoderConfig& cfg)
    : cfg_(cfg),
      stem_(cfg.in_channels, cfg.stem_channels, cfg.stem_kernel, cfg.stem_stride),
      stem_bn_(cfg.stem_channels),
      stem_pool_(3, 2),
      mid_pool_(3, 2),
      drop_(cfg.dropout) {
  int in_ch = cfg.stem_channels;
  int flat = 0;
  for (int s = 0; s < 4; ++s) {
    for (int b = 0; b < cfg.blocks[s]; ++b) {
      const int stride = b == 0 ? cfg.stage_strides[s] : 1;
      blocks_.emplace_back(in_ch, cfg.widths[s], stride);
      in_ch = cfg.widths[s].out;
      ++flat;
    }
    if (cfg.pool_between_stages_2_3 && s == 1) mid_pool_after_ = flat - 1;
  }
}

void Encoder::init(std::mt19937_64& rng) {
  stem_.init(rng);
  for (auto& b : blocks_) b.init(rng);
}

SignalBatch Encoder::forward(const SignalBatch& x, bool training, std::mt19937_64* rng,
                             Ctx* ctx) {
  if (ctx) {
    ctx->x = x;
    ctx->blocks.resize(blocks_.size());
  }
  SignalBatch h = nn::relu(
      stem_bn_.forward(stem_.forward(x), training, ctx ? &ctx->stem_bn : nullptr));
  if (ctx) ctx->stem_act = h;
  h = stem_pool_.forward(h, ctx ? &ctx->stem_pool : nullptr);

  for (size_t i = 0; i < blocks_.size(); ++i) {
    h = blocks_[i].forward(h, training, ctx ? &ctx->blocks[i] : nullptr);
    if (static_cast<int>(i) == mid_pool_after_)
      h = mid_pool_.forward(h, ctx ? &ctx->mid_pool : nullptr);
  }

  h.data = drop_.forward(h.data, training, rng, ctx ? &ctx->drop : nullptr);
  return h;
}

SignalBatch Encoder::backward(const SignalBatch& gy, const Ctx& ctx) {
  SignalBatch g = gy;
  g.data = drop_.backward(g.data, ctx.drop);

  for (int i = static_cast<int>(blocks_.size()) - 1; i >= 0; --i) {
    if (i == mid_pool_after_) {
      SignalBatch gp = mid_pool_.backward(g, ctx.mid_pool);
      g = std::move(gp);
    }
    g = blocks_[i].backward(g, ctx.blocks[i]);
  }

  g = stem_pool_.backward(g, ctx.stem_pool);
  g = nn::relu_backward(ctx.stem_act, g);
  g = stem_.backward(ctx.x, stem_bn_.backward(g, ctx.stem_bn));
  return g;
}

void Encoder::collect(const std::string& prefix, std::vector<nn::ParamRef>& out) {
  stem_.collect(prefix + ".stem", out);
  stem_bn_.collect(prefix + ".stem_bn", out);
  for (size_t i = 0; i < blocks_.size(); ++i)
    blocks_[i].collect(prefix + ".block" + std::to_string(i), out);
}

void Encoder::collect_buffers(const std::string& prefix,
                              std::vector<nn::ParamRef>& out) {
  stem_bn_.collect_buffers(prefix + ".stem_bn", out);
  for (size_t i = 0; i < blocks_.size(); ++i)
    blocks_[i].collect_buffers(prefix + ".block" + std::to_string(i), out);
}

void Encoder::zero_grad() {
  stem_.zero_grad();
  stem_bn_.zero_grad();
  for (auto& b : blocks_) b.zero_grad();
}

}  // namespace iitnet::model
