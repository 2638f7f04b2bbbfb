#include "iitnet/model/head.hpp"

#include <stdexcept>

namespace iitnet::model {

ContextHead::ContextHead(int input_dim, int hidden_dim, int classes)
    : l1_(input_dim, hidden_dim),
      l2_(2 * hidden_dim, hidden_dim),
      fc_(2 * hidden_dim, classes) {}

void ContextHead::init(std::mt19937_64& rng) {
  l1_.init(rng);
  l2_.init(rng);
  fc_.init(rng);
}

int ContextHead::classes() const { return static_cast<int>(fc_.b.size()); }

Mat ContextHead::forward(const Mat& feats, int batch, int steps, Ctx* ctx) {
  if (feats.cols() != static_cast<Eigen::Index>(batch) * steps)
    throw std::invalid_argument("ContextHead: column count does not match batch*steps");

  // Regroup columns: step t of sample b sits at column b*steps + t.
  std::vector<Mat> xs(steps);
  for (int t = 0; t < steps; ++t) {
    xs[t].resize(feats.rows(), batch);
    for (int b = 0; b < batch; ++b)
      xs[t].col(b) = feats.col(static_cast<Eigen::Index>(b) * steps + t);
  }

  std::vector<Mat> h1 = l1_.forward(xs, ctx ? &ctx->c1 : nullptr);
  std::vector<Mat> h2 = l2_.forward(h1, ctx ? &ctx->c2 : nullptr);
  Mat fin = l2_.final_states(h2);
  Mat logits = fc_.forward(fin);

  if (ctx) {
    ctx->xs = std::move(xs);
    ctx->h1 = std::move(h1);
    ctx->h2 = std::move(h2);
    ctx->final_states = std::move(fin);
  }
  return logits;
}

Mat ContextHead::backward(const Mat& dlogits, const Ctx& ctx) {
  const int steps = static_cast<int>(ctx.xs.size());
  const Eigen::Index batch = dlogits.cols();
  const int h = l2_.hidden_dim();

  Mat gfin = fc_.backward(ctx.final_states, dlogits);

  std::vector<Mat> gh2(steps, Mat::Zero(2 * h, batch));
  gh2[steps - 1].topRows(h) = gfin.topRows(h);
  gh2[0].bottomRows(h) = gfin.bottomRows(h);

  std::vector<Mat> gh1 = l2_.backward(gh2, ctx.c2);
  std::vector<Mat> gxs = l1_.backward(gh1, ctx.c1);

  Mat gfeats(ctx.xs[0].rows(), batch * steps);
  for (int t = 0; t < steps; ++t)
    for (Eigen::Index b = 0; b < batch; ++b)
      gfeats.col(b * steps + t) = gxs[t].col(b);
  return gfeats;
}

void ContextHead::collect(const std::string& prefix, std::vector<nn::ParamRef>& out) {
  l1_.collect(prefix + ".rnn1", out);
  l2_.collect(prefix + ".rnn2", out);
  fc_.collect(prefix + ".fc", out);
}

void ContextHead::zero_grad() {
  l1_.zero_grad();
  l2_.zero_grad();
  fc_.zero_grad();
}

}  // namespace iitnet::model
