#include <random>

#include "doctest.h"
#include "iitnet/nn/layers.hpp"
#include "iitnet/nn/loss.hpp"
#include "iitnet/nn/lstm.hpp"
#include "support/grad_check.hpp"

using namespace iitnet::nn;
using testsupport::fd_slot;
using testsupport::random_mat;
using testsupport::rel_err;

namespace {

SignalBatch random_batch(int ch, int count, int len, std::mt19937_64& rng) {
  SignalBatch x(ch, count, len);
  x.data = random_mat(ch, count * len, rng);
  return x;
}

double dot(const Mat& a, const Mat& b) { return (a.array() * b.array()).sum(); }

}  // namespace

TEST_CASE("same padding arithmetic") {
  CHECK(same_out_len(3000, 2) == 1500);
  CHECK(same_out_len(1500, 2) == 750);
  CHECK(same_out_len(375, 2) == 188);
  CHECK(same_out_len(47, 2) == 24);
  CHECK(same_out_len(100, 1) == 100);
  // k=7 s=2 on even length: total pad = 5, left 2 right 3.
  CHECK(same_pad_left(3000, 7, 2) == 2);
  // k=3 s=1: total pad = 2, symmetric.
  CHECK(same_pad_left(10, 3, 1) == 1);
  // k=1: no padding ever.
  CHECK(same_pad_left(10, 1, 2) == 0);
}

TEST_CASE("conv1d forward matches a direct loop") {
  std::mt19937_64 rng(1);
  const int in_ch = 3, out_ch = 4, k = 5, s = 2, len = 11, count = 2;
  Conv1d conv(in_ch, out_ch, k, s, true);
  conv.init(rng);
  conv.b = random_mat(out_ch, 1, rng).col(0);
  SignalBatch x = random_batch(in_ch, count, len, rng);

  SignalBatch y = conv.forward(x);
  const int out_len = same_out_len(len, s);
  REQUIRE(y.length == out_len);
  REQUIRE(y.channels() == out_ch);

  const int pad = same_pad_left(len, k, s);
  for (int e = 0; e < count; ++e)
    for (int o = 0; o < out_ch; ++o)
      for (int t = 0; t < out_len; ++t) {
        double acc = conv.b[o];
        for (int kk = 0; kk < k; ++kk)
          for (int c = 0; c < in_ch; ++c) {
            const int j = t * s - pad + kk;
            if (j < 0 || j >= len) continue;
            acc += conv.w(o, static_cast<Eigen::Index>(kk) * in_ch + c) *
                   x.data(c, static_cast<Eigen::Index>(e) * len + j);
          }
        CHECK(y.data(o, static_cast<Eigen::Index>(e) * out_len + t) ==
              doctest::Approx(acc).epsilon(1e-12));
      }
}

TEST_CASE("conv1d gradients agree with finite differences") {
  std::mt19937_64 rng(2);
  const int in_ch = 2, out_ch = 3, k = 3, s = 2, len = 9, count = 2;
  Conv1d conv(in_ch, out_ch, k, s, true);
  conv.init(rng);
  SignalBatch x = random_batch(in_ch, count, len, rng);
  const Mat r = random_mat(out_ch, count * same_out_len(len, s), rng);

  auto loss = [&]() { return dot(conv.forward(x).data, r); };

  conv.zero_grad();
  SignalBatch gy(out_ch, count, same_out_len(len, s));
  gy.data = r;
  SignalBatch gx = conv.backward(x, gy);

  for (Eigen::Index i = 0; i < conv.w.size(); i += 3) {
    const double num = fd_slot(conv.w.data() + i, loss);
    CHECK(rel_err(conv.gw.data()[i], num) < 1e-7);
  }
  for (Eigen::Index i = 0; i < conv.b.size(); ++i) {
    const double num = fd_slot(conv.b.data() + i, loss);
    CHECK(rel_err(conv.gb[i], num) < 1e-7);
  }
  for (Eigen::Index i = 0; i < x.data.size(); i += 5) {
    const double num = fd_slot(x.data.data() + i, loss);
    CHECK(rel_err(gx.data.data()[i], num) < 1e-7);
  }
}

TEST_CASE("batch norm normalizes and tracks running statistics") {
  std::mt19937_64 rng(3);
  BatchNorm1d bn(3);
  SignalBatch x = random_batch(3, 4, 10, rng);
  x.data.array() += 2.0;  // shift so the mean is clearly nonzero

  BatchNorm1d::Cache cache;
  SignalBatch y = bn.forward(x, true, &cache);
  for (int c = 0; c < 3; ++c) {
    CHECK(y.data.row(c).mean() == doctest::Approx(0.0).epsilon(1e-10));
    const double var = y.data.row(c).array().square().mean();
    CHECK(var == doctest::Approx(1.0).epsilon(1e-3));
  }
  // Running stats moved a tenth of the way from their init toward the batch.
  const double m0 = x.data.row(0).mean();
  CHECK(bn.running_mean[0] == doctest::Approx(0.1 * m0).epsilon(1e-10));

  // Eval mode reproduces a fixed affine map of the input.
  bn.running_mean.setConstant(1.0);
  bn.running_var.setConstant(4.0);
  SignalBatch ye = bn.forward(x, false, nullptr);
  CHECK(ye.data(0, 0) ==
        doctest::Approx((x.data(0, 0) - 1.0) / std::sqrt(4.0 + 1e-5)).epsilon(1e-12));
}

TEST_CASE("batch norm gradients agree with finite differences in both modes") {
  std::mt19937_64 rng(4);
  for (const bool training : {true, false}) {
    CAPTURE(training);
    BatchNorm1d bn(2);
    bn.gamma = random_mat(2, 1, rng).col(0).array() + 1.5;
    bn.beta = random_mat(2, 1, rng).col(0);
    bn.running_mean = random_mat(2, 1, rng).col(0);
    bn.running_var = random_mat(2, 1, rng).col(0).array().abs() + 0.5;
    SignalBatch x = random_batch(2, 2, 6, rng);
    const Mat r = random_mat(2, 12, rng);

    const Vec rm = bn.running_mean, rv = bn.running_var;
    auto loss = [&]() {
      bn.running_mean = rm;  // undo the side effect of training-mode calls
      bn.running_var = rv;
      return dot(bn.forward(x, training, nullptr).data, r);
    };

    bn.zero_grad();
    BatchNorm1d::Cache cache;
    bn.running_mean = rm;
    bn.running_var = rv;
    SignalBatch y = bn.forward(x, training, &cache);
    SignalBatch gy(2, 2, 6);
    gy.data = r;
    SignalBatch gx = bn.backward(gy, cache);

    for (Eigen::Index i = 0; i < 2; ++i) {
      CHECK(rel_err(bn.ggamma[i], fd_slot(bn.gamma.data() + i, loss)) < 1e-7);
      CHECK(rel_err(bn.gbeta[i], fd_slot(bn.beta.data() + i, loss)) < 1e-7);
    }
    for (Eigen::Index i = 0; i < x.data.size(); i += 3) {
      const double num = fd_slot(x.data.data() + i, loss);
      CHECK(rel_err(gx.data.data()[i], num) < 1e-6);
    }
  }
}

TEST_CASE("relu masks its backward on the forward output") {
  std::mt19937_64 rng(5);
  SignalBatch x = random_batch(2, 1, 8, rng);
  SignalBatch y = relu(x);
  CHECK((y.data.array() >= 0.0).all());
  SignalBatch gy = random_batch(2, 1, 8, rng);
  SignalBatch gx = relu_backward(y, gy);
  for (Eigen::Index i = 0; i < x.data.size(); ++i) {
    const double expect = x.data.data()[i] > 0.0 ? gy.data.data()[i] : 0.0;
    CHECK(gx.data.data()[i] == expect);
  }
}

TEST_CASE("max pool: padded positions never win, backward routes to the argmax") {
  SignalBatch x(1, 1, 4);
  x.data << -5.0, -7.0, -6.0, -8.0;  // all negative, so zero padding would win wrongly
  MaxPool1d pool(3, 2);
  MaxPool1d::Cache cache;
  SignalBatch y = pool.forward(x, &cache);
  REQUIRE(y.length == 2);
  CHECK(y.data(0, 0) == -5.0);  // window {pad, -5, -7}
  CHECK(y.data(0, 1) == -6.0);  // window {-7, -6, -8}

  SignalBatch gy(1, 1, 2);
  gy.data << 1.0, 2.0;
  SignalBatch gx = pool.backward(gy, cache);
  CHECK(gx.data(0, 0) == 1.0);
  CHECK(gx.data(0, 2) == 2.0);
  CHECK(gx.data(0, 1) == 0.0);
  CHECK(gx.data(0, 3) == 0.0);
}

TEST_CASE("max pool shape law matches ceil division") {
  std::mt19937_64 rng(6);
  MaxPool1d pool(3, 2);
  for (const int len : {7, 8, 47, 94, 375}) {
    SignalBatch x = random_batch(2, 1, len, rng);
    SignalBatch y = pool.forward(x, nullptr);
    CHECK(y.length == (len + 1) / 2);
  }
}

TEST_CASE("dropout scales kept units and is identity in eval mode") {
  std::mt19937_64 rng(7);
  Mat x = random_mat(16, 64, rng).array() + 5.0;
  Dropout drop(0.5);

  Mat eval_y = drop.forward(x, false, nullptr, nullptr);
  CHECK((eval_y - x).norm() == 0.0);

  Dropout::Cache cache;
  Mat y = drop.forward(x, true, &rng, &cache);
  int kept = 0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (y.data()[i] != 0.0) {
      ++kept;
      CHECK(y.data()[i] == doctest::Approx(2.0 * x.data()[i]));
    }
  }
  CHECK(kept > 300);
  CHECK(kept < 700);

  Mat gy = random_mat(16, 64, rng);
  Mat gx = drop.backward(gy, cache);
  for (Eigen::Index i = 0; i < gx.size(); ++i) {
    const double expect = cache.mask.data()[i] * gy.data()[i];
    CHECK(gx.data()[i] == expect);
  }
}

TEST_CASE("linear gradients agree with finite differences") {
  std::mt19937_64 rng(8);
  Linear fc(6, 4);
  fc.init(rng);
  Mat x = random_mat(6, 3, rng);
  const Mat r = random_mat(4, 3, rng);

  auto loss = [&]() { return dot(fc.forward(x), r); };

  fc.zero_grad();
  Mat gx = fc.backward(x, r);
  for (Eigen::Index i = 0; i < fc.w.size(); ++i)
    CHECK(rel_err(fc.gw.data()[i], fd_slot(fc.w.data() + i, loss)) < 1e-6);
  for (Eigen::Index i = 0; i < fc.b.size(); ++i)
    CHECK(rel_err(fc.gb[i], fd_slot(fc.b.data() + i, loss)) < 1e-6);
  for (Eigen::Index i = 0; i < x.size(); ++i)
    CHECK(rel_err(gx.data()[i], fd_slot(x.data() + i, loss)) < 1e-6);
}

TEST_CASE("lstm gradients agree with finite differences") {
  std::mt19937_64 rng(9);
  const int in = 3, hidden = 4, steps = 5, batch = 2;
  LstmCell cell(in, hidden);
  cell.init(rng);

  std::vector<Mat> xs(steps);
  std::vector<Mat> rs(steps);
  for (int t = 0; t < steps; ++t) {
    xs[t] = random_mat(in, batch, rng);
    rs[t] = random_mat(hidden, batch, rng);
  }

  auto loss = [&]() {
    auto hs = cell.forward(xs, nullptr);
    double acc = 0;
    for (int t = 0; t < steps; ++t) acc += dot(hs[t], rs[t]);
    return acc;
  };

  cell.zero_grad();
  LstmCell::Cache cache;
  cell.forward(xs, &cache);
  std::vector<Mat> gxs = cell.backward(rs, cache);

  std::vector<ParamRef> params;
  cell.collect("lstm", params);
  for (const auto& p : params) {
    for (Eigen::Index i = 0; i < p.size(); i += 7) {
      const double num = fd_slot(p.value + i, loss);
      CHECK(rel_err(p.grad[i], num) < 1e-6);
    }
  }
  for (int t = 0; t < steps; ++t)
    for (Eigen::Index i = 0; i < xs[t].size(); i += 2) {
      const double num = fd_slot(xs[t].data() + i, loss);
      CHECK(rel_err(gxs[t].data()[i], num) < 1e-6);
    }
}

TEST_CASE("bidirectional layer concatenates directions and final states") {
  std::mt19937_64 rng(10);
  const int in = 3, hidden = 4, steps = 4, batch = 2;
  BiLstmLayer layer(in, hidden);
  layer.init(rng);
  std::vector<Mat> xs(steps);
  for (auto& x : xs) x = random_mat(in, batch, rng);

  auto hs = layer.forward(xs, nullptr);
  REQUIRE(hs.size() == static_cast<size_t>(steps));
  CHECK(hs[0].rows() == 2 * hidden);

  // Forward half must equal the unidirectional run; backward half the
  // reversed run.
  auto hs_f = layer.fwd.forward(xs, nullptr);
  std::vector<Mat> rev(xs.rbegin(), xs.rend());
  auto hs_b = layer.bwd.forward(rev, nullptr);
  for (int t = 0; t < steps; ++t) {
    CHECK((hs[t].topRows(hidden) - hs_f[t]).norm() == 0.0);
    CHECK((hs[t].bottomRows(hidden) - hs_b[steps - 1 - t]).norm() == 0.0);
  }

  Mat fin = layer.final_states(hs);
  CHECK((fin.topRows(hidden) - hs_f[steps - 1]).norm() == 0.0);
  CHECK((fin.bottomRows(hidden) - hs_b[steps - 1]).norm() == 0.0);
}

TEST_CASE("bidirectional gradients agree with finite differences") {
  std::mt19937_64 rng(11);
  const int in = 2, hidden = 3, steps = 3, batch = 2;
  BiLstmLayer layer(in, hidden);
  layer.init(rng);
  std::vector<Mat> xs(steps), rs(steps);
  for (int t = 0; t < steps; ++t) {
    xs[t] = random_mat(in, batch, rng);
    rs[t] = random_mat(2 * hidden, batch, rng);
  }

  auto loss = [&]() {
    auto hs = layer.forward(xs, nullptr);
    double acc = 0;
    for (int t = 0; t < steps; ++t) acc += dot(hs[t], rs[t]);
    return acc;
  };

  layer.zero_grad();
  BiLstmLayer::Cache cache;
  layer.forward(xs, &cache);
  auto gxs = layer.backward(rs, cache);

  std::vector<ParamRef> params;
  layer.collect("bilstm", params);
  for (const auto& p : params)
    for (Eigen::Index i = 0; i < p.size(); i += 5) {
      CHECK(rel_err(p.grad[i], fd_slot(p.value + i, loss)) < 1e-6);
    }
  for (int t = 0; t < steps; ++t)
    for (Eigen::Index i = 0; i < xs[t].size(); ++i) {
      CHECK(rel_err(gxs[t].data()[i], fd_slot(xs[t].data() + i, loss)) < 1e-6);
    }
}

TEST_CASE("softmax cross entropy: values and gradients") {
  std::mt19937_64 rng(12);
  Mat logits = random_mat(5, 4, rng, 3.0);
  std::vector<int> labels = {0, 2, 4, 2};

  Mat dlogits;
  const double loss_val = softmax_cross_entropy(logits, labels, &dlogits);

  // Direct computation per column.
  double expect = 0;
  for (int j = 0; j < 4; ++j) {
    Eigen::ArrayXd col = logits.col(j).array();
    const double lse = std::log((col - col.maxCoeff()).exp().sum()) + col.maxCoeff();
    expect += lse - col[labels[j]];
  }
  expect /= 4.0;
  CHECK(loss_val == doctest::Approx(expect).epsilon(1e-12));

  auto loss = [&]() { return softmax_cross_entropy(logits, labels, nullptr); };
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    CHECK(rel_err(dlogits.data()[i], fd_slot(logits.data() + i, loss)) < 1e-6);
  }

  // Extreme logits stay finite.
  Mat big(5, 1);
  big << 1e4, -1e4, 0.0, 5e3, -2e3;
  std::vector<int> one = {1};
  const double big_loss = softmax_cross_entropy(big, one, nullptr);
  CHECK(std::isfinite(big_loss));
  CHECK(big_loss == doctest::Approx(2e4).epsilon(1e-9));

  // Probabilities sum to one.
  Mat p = softmax(logits);
  for (int j = 0; j < 4; ++j) CHECK(p.col(j).sum() == doctest::Approx(1.0).epsilon(1e-12));
}
