#include <random>

#include "doctest.h"
#include "iitnet/model/iitnet.hpp"
#include "iitnet/nn/loss.hpp"
#include "support/grad_check.hpp"

using namespace iitnet;
using namespace iitnet::model;
using testsupport::fd_slot;
using testsupport::random_mat;
using testsupport::rel_err;

namespace {

SignalBatch random_epochs(int count, int len, std::mt19937_64& rng) {
  SignalBatch x(1, count, len);
  x.data = random_mat(1, count * len, rng);
  return x;
}

}  // namespace

TEST_CASE("feature sequence shapes follow the ceil-halving chain") {
  EncoderConfig cfg;
  CHECK(cfg.feature_dim() == 128);
  CHECK(cfg.feature_len(3000) == 47);
  CHECK(cfg.feature_len(6000) == 94);
  CHECK(cfg.feature_len(1500) == 24);

  // Six stride-2 stages: repeated ceil halving equals ceil(len / 64).
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> len_dist(1500, 12000);
  for (int i = 0; i < 50; ++i) {
    const int n = len_dist(rng);
    CHECK(cfg.feature_len(n) == (n + 63) / 64);
  }
}

TEST_CASE("default encoder produces 47 steps of 128 features per standard epoch") {
  std::mt19937_64 rng(2);
  Encoder enc{EncoderConfig{}};
  enc.init(rng);
  SignalBatch x = random_epochs(1, 3000, rng);
  SignalBatch y = enc.forward(x, false, nullptr, nullptr);
  CHECK(y.channels() == 128);
  CHECK(y.length == 47);
  CHECK(y.count == 1);
}

TEST_CASE("first residual block keeps identity shortcut, stage transitions project") {
  IitnetConfig cfg;
  Iitnet net(cfg);
  std::vector<std::string> names;
  for (auto& p : net.params()) names.push_back(p.name);
  auto has = [&](const std::string& n) {
    return std::find(names.begin(), names.end(), n) != names.end();
  };
  // Stage 1 holds blocks 0..2 (64 -> 64, stride 1): identity shortcuts only.
  CHECK(!has("encoder.block0.proj.w"));
  CHECK(!has("encoder.block1.proj.w"));
  CHECK(!has("encoder.block2.proj.w"));
  // First block of each later stage downsamples and needs a projection.
  CHECK(has("encoder.block3.proj.w"));    // stage 2
  CHECK(has("encoder.block7.proj.w"));    // stage 3
  CHECK(has("encoder.block13.proj.w"));   // stage 4
  CHECK(!has("encoder.block4.proj.w"));
}

TEST_CASE("sequence encoding is bit-identical to per-epoch encoding") {
  std::mt19937_64 rng(3);
  IitnetConfig cfg;
  cfg.seq_len = 4;
  Iitnet net(cfg);
  net.init(rng);
  // Make the eval-mode normalization non-trivial.
  for (auto& b : net.buffers())
    for (Eigen::Index i = 0; i < b.size(); ++i)
      b.value[i] = 0.5 + 0.1 * static_cast<double>((i % 7) + 1);

  SignalBatch seq = random_epochs(4, 3000, rng);
  SignalBatch seq_feats = net.encode_epochs(seq);

  for (int e = 0; e < 4; ++e) {
    SignalBatch one(1, 1, 3000);
    one.data = seq.block(e);
    SignalBatch f = net.encode_epochs(one);
    const int l = f.length;
    CHECK((seq_feats.data.middleCols(static_cast<Eigen::Index>(e) * l, l) - f.data)
              .cwiseAbs()
              .maxCoeff() == 0.0);
  }
}

TEST_CASE("logits shape and classifier wiring") {
  std::mt19937_64 rng(4);
  IitnetConfig cfg;
  cfg.encoder = EncoderConfig::tiny();
  cfg.epoch_len = 64;
  cfg.seq_len = 3;
  cfg.hidden_dim = 4;
  Iitnet net(cfg);
  net.init(rng);

  SignalBatch x = random_epochs(6, 64, rng);  // two sequences of three epochs
  Mat logits = net.predict_logits(x);
  CHECK(logits.rows() == 5);
  CHECK(logits.cols() == 2);

  // Eval-mode forward twice gives the same answer (no hidden state leaks).
  Mat again = net.predict_logits(x);
  CHECK((logits - again).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("loss gradient matches finite differences through encoder and head") {
  std::mt19937_64 rng(5);
  IitnetConfig cfg;
  cfg.encoder = EncoderConfig::tiny();
  cfg.epoch_len = 48;
  cfg.seq_len = 2;
  cfg.hidden_dim = 3;
  Iitnet net(cfg);
  net.init(rng);
  // Randomize the running statistics so eval-mode normalization is active.
  std::uniform_real_distribution<double> ud(0.2, 1.5);
  for (auto& b : net.buffers())
    for (Eigen::Index i = 0; i < b.size(); ++i) b.value[i] = ud(rng);

  SignalBatch x = random_epochs(4, 48, rng);  // batch of two sequences
  const std::vector<int> labels = {1, 3};
  const double wr = 1e-3;

  auto loss = [&]() {
    Mat logits = net.predict_logits(x);
    return nn::softmax_cross_entropy(logits, labels, nullptr) +
           wr * regularized_squared_norm(net.params());
  };

  net.zero_grad();
  const LossParts parts = net.backprop(x, labels, wr, false, nullptr);
  CHECK(parts.total() == doctest::Approx(loss()).epsilon(1e-12));

  int checked = 0;
  for (auto& p : net.params()) {
    const Eigen::Index step = std::max<Eigen::Index>(1, p.size() / 3);
    for (Eigen::Index i = 0; i < p.size(); i += step) {
      const double num = fd_slot(p.value + i, loss, 1e-5);
      const double err = rel_err(p.grad[i], num);
      CAPTURE(p.name);
      CAPTURE(i);
      CHECK(err < 1e-5);
      ++checked;
    }
  }
  CHECK(checked > 50);
}

TEST_CASE("regularization shifts the loss by exactly the squared norm of weights") {
  std::mt19937_64 rng(6);
  IitnetConfig cfg;
  cfg.encoder = EncoderConfig::tiny();
  cfg.epoch_len = 48;
  cfg.seq_len = 1;
  cfg.hidden_dim = 3;
  Iitnet net(cfg);
  net.init(rng);

  SignalBatch x = random_epochs(2, 48, rng);
  const std::vector<int> labels = {0, 4};

  net.zero_grad();
  const LossParts with = net.backprop(x, labels, 1e-6, false, nullptr);
  net.zero_grad();
  const LossParts without = net.backprop(x, labels, 0.0, false, nullptr);

  CHECK(without.penalty == 0.0);
  CHECK(with.data == without.data);  // same forward, bitwise

  double sumsq = 0.0;
  for (auto& p : net.params()) {
    if (!p.regularized) continue;
    for (Eigen::Index i = 0; i < p.size(); ++i) sumsq += p.value[i] * p.value[i];
  }
  CHECK(with.penalty == 1e-6 * sumsq);
}

TEST_CASE("training-mode step updates running statistics, eval does not") {
  std::mt19937_64 rng(7);
  IitnetConfig cfg;
  cfg.encoder = EncoderConfig::tiny();
  cfg.epoch_len = 48;
  cfg.seq_len = 1;
  cfg.hidden_dim = 3;
  Iitnet net(cfg);
  net.init(rng);

  SignalBatch x = random_epochs(3, 48, rng);
  const std::vector<int> labels = {0, 1, 2};

  auto snapshot = [&]() {
    std::vector<double> v;
    for (auto& b : net.buffers())
      v.insert(v.end(), b.value, b.value + b.size());
    return v;
  };

  const auto before = snapshot();
  net.zero_grad();
  net.backprop(x, labels, 0.0, false, nullptr);
  CHECK(snapshot() == before);

  std::mt19937_64 drop_rng(1);
  net.backprop(x, labels, 0.0, true, &drop_rng);
  CHECK(snapshot() != before);
}

TEST_CASE("config serializes and restores") {
  IitnetConfig cfg;
  cfg.seq_len = 10;
  cfg.hidden_dim = 64;
  cfg.encoder.blocks = {1, 2, 2, 1};
  const auto j = cfg.to_json();
  const IitnetConfig back = IitnetConfig::from_json(j);
  CHECK(back.seq_len == 10);
  CHECK(back.hidden_dim == 64);
  CHECK(back.encoder.blocks == cfg.encoder.blocks);
  CHECK(back.encoder.widths[2].out == 128);
}
