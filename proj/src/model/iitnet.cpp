#include "iitnet/model/iitnet.hpp"

#include <stdexcept>

#include "iitnet/nn/loss.hpp"

namespace iitnet::model {

nlohmann::json IitnetConfig::to_json() const {
  return {
      {"encoder",
       {{"in_channels", encoder.in_channels},
        {"stem_channels", encoder.stem_channels},
        {"stem_kernel", encoder.stem_kernel},
        {"stem_stride", encoder.stem_stride},
        {"blocks", encoder.blocks},
        {"widths",
         {{encoder.widths[0].mid1, encoder.widths[0].mid2, encoder.widths[0].out},
          {encoder.widths[1].mid1, encoder.widths[1].mid2, encoder.widths[1].out},
          {encoder.widths[2].mid1, encoder.widths[2].mid2, encoder.widths[2].out},
          {encoder.widths[3].mid1, encoder.widths[3].mid2, encoder.widths[3].out}}},
        {"stage_strides", encoder.stage_strides},
        {"pool_between_stages_2_3", encoder.pool_between_stages_2_3},
        {"dropout", encoder.dropout}}},
      {"seq_len", seq_len},
      {"epoch_len", epoch_len},
      {"hidden_dim", hidden_dim},
      {"classes", classes},
  };
}

IitnetConfig IitnetConfig::from_json(const nlohmann::json& j) {
  IitnetConfig cfg;
  const auto& e = j.at("encoder");
  cfg.encoder.in_channels = e.at("in_channels");
  cfg.encoder.stem_channels = e.at("stem_channels");
  cfg.encoder.stem_kernel = e.at("stem_kernel");
  cfg.encoder.stem_stride = e.at("stem_stride");
  for (int s = 0; s < 4; ++s) {
    cfg.encoder.blocks[s] = e.at("blocks").at(s);
    cfg.encoder.widths[s] = {e.at("widths").at(s).at(0), e.at("widths").at(s).at(1),
                             e.at("widths").at(s).at(2)};
    cfg.encoder.stage_strides[s] = e.at("stage_strides").at(s);
  }
  cfg.encoder.pool_between_stages_2_3 = e.at("pool_between_stages_2_3");
  cfg.encoder.dropout = e.at("dropout");
  cfg.seq_len = j.at("seq_len");
  cfg.epoch_len = j.at("epoch_len");
  cfg.hidden_dim = j.at("hidden_dim");
  cfg.classes = j.at("classes");
  return cfg;
}

Iitnet::Iitnet(const IitnetConfig& cfg)
    : cfg_(cfg),
      encoder_(cfg.encoder),
      head_(cfg.encoder.feature_dim(), cfg.hidden_dim, cfg.classes) {}

void Iitnet::init(std::mt19937_64& rng) {
  encoder_.init(rng);
  head_.init(rng);
}

Mat Iitnet::forward_internal(const SignalBatch& x, bool training, std::mt19937_64* rng,
                             Encoder::Ctx* ectx, ContextHead::Ctx* hctx) const {
  if (x.length != cfg_.epoch_len)
    throw std::invalid_argument("Iitnet: epoch length mismatch");
  if (x.count % cfg_.seq_len != 0)
    throw std::invalid_argument("Iitnet: epoch count not divisible by seq_len");
  const int batch = x.count / cfg_.seq_len;
  const int l = encoder_.feature_len(cfg_.epoch_len);

  SignalBatch feats = encoder_.forward(x, training, rng, ectx);
  return head_.forward(feats.data, batch, cfg_.seq_len * l, hctx);
}

Mat Iitnet::predict_logits(const SignalBatch& x) const {
  return forward_internal(x, false, nullptr, nullptr, nullptr);
}

LossParts Iitnet::backprop(const SignalBatch& x, const std::vector<int>& labels,
                           double weight_reg, bool training, std::mt19937_64* rng) {
  Encoder::Ctx ectx;
  ContextHead::Ctx hctx;
  Mat logits = forward_internal(x, training, rng, &ectx, &hctx);

  Mat dlogits;
  LossParts loss;
  loss.data = nn::softmax_cross_entropy(logits, labels, &dlogits);

  Mat gfeats = head_.backward(dlogits, hctx);
  const int l = encoder_.feature_len(cfg_.epoch_len);
  SignalBatch gf(encoder_.feature_dim(), x.count, l);
  gf.data = std::move(gfeats);
  encoder_.backward(gf, ectx);

  auto ps = params();
  loss.penalty = weight_reg * regularized_squared_norm(ps);
  add_regularization_gradient(ps, weight_reg);
  return loss;
}

void Iitnet::zero_grad() {
  encoder_.zero_grad();
  head_.zero_grad();
}

std::vector<nn::ParamRef> Iitnet::params() {
  std::vector<nn::ParamRef> out;
  encoder_.collect("encoder", out);
  head_.collect("head", out);
  return out;
}

std::vector<nn::ParamRef> Iitnet::buffers() {
  std::vector<nn::ParamRef> out;
  encoder_.collect_buffers("encoder", out);
  return out;
}

nlohmann::json Iitnet::config_json() const { return cfg_.to_json(); }

SignalBatch Iitnet::encode_epochs(const SignalBatch& x) const {
  return encoder_.forward(x, false, nullptr, nullptr);
}

double regularized_squared_norm(const std::vector<nn::ParamRef>& params) {
  double s = 0.0;
  for (const auto& p : params) {
    if (!p.regularized) continue;
    for (Eigen::Index i = 0; i < p.size(); ++i) s += p.value[i] * p.value[i];
  }
  return s;
}

void add_regularization_gradient(const std::vector<nn::ParamRef>& params,
                                 double weight_reg) {
  if (weight_reg == 0.0) return;
  for (const auto& p : params) {
    if (!p.regularized || !p.grad) continue;
    for (Eigen::Index i = 0; i < p.size(); ++i)
      p.grad[i] += 2.0 * weight_reg * p.value[i];
  }
}

}  // namespace iitnet::model
