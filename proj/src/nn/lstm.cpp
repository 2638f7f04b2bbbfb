#include "iitnet/nn/lstm.hpp"

#include <cmath>
#include <stdexcept>

namespace iitnet::nn {

namespace {

inline Eigen::ArrayXXd sigmoid(const Eigen::ArrayXXd& z) {
  return 1.0 / (1.0 + (-z).exp());
}

}  // namespace

LstmCell::LstmCell(int input_dim, int hidden_dim)
    : w_ih(Mat::Zero(4 * hidden_dim, input_dim)),
      w_hh(Mat::Zero(4 * hidden_dim, hidden_dim)),
      b_ih(Vec::Zero(4 * hidden_dim)),
      b_hh(Vec::Zero(4 * hidden_dim)),
      gw_ih(Mat::Zero(4 * hidden_dim, input_dim)),
      gw_hh(Mat::Zero(4 * hidden_dim, hidden_dim)),
      gb_ih(Vec::Zero(4 * hidden_dim)),
      gb_hh(Vec::Zero(4 * hidden_dim)),
      input_dim_(input_dim),
      hidden_dim_(hidden_dim) {}

void LstmCell::init(std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden_dim_));
  std::uniform_real_distribution<double> dist(-bound, bound);
  auto fill = [&](double* p, Eigen::Index n) {
    for (Eigen::Index i = 0; i < n; ++i) p[i] = dist(rng);
  };
  fill(w_ih.data(), w_ih.size());
  fill(w_hh.data(), w_hh.size());
  fill(b_ih.data(), b_ih.size());
  fill(b_hh.data(), b_hh.size());
}

std::vector<Mat> LstmCell::forward(const std::vector<Mat>& xs, Cache* cache) const {
  const int steps = static_cast<int>(xs.size());
  if (steps == 0) throw std::invalid_argument("LstmCell: empty sequence");
  const Eigen::Index batch = xs[0].cols();
  const int h = hidden_dim_;

  Mat h_prev = Mat::Zero(h, batch);
  Mat c_prev = Mat::Zero(h, batch);
  std::vector<Mat> hs(steps);
  if (cache) {
    cache->x.resize(steps);
    cache->gates.resize(steps);
    cache->c.resize(steps);
    cache->tanh_c.resize(steps);
    cache->h.resize(steps);
  }

  for (int t = 0; t < steps; ++t) {
    Mat pre = w_ih * xs[t] + w_hh * h_prev;
    pre.colwise() += b_ih + b_hh;

    Mat gates(4 * h, batch);
    gates.topRows(2 * h) = sigmoid(pre.topRows(2 * h).array());            // i, f
    gates.middleRows(2 * h, h) = pre.middleRows(2 * h, h).array().tanh();  // g
    gates.bottomRows(h) = sigmoid(pre.bottomRows(h).array());              // o

    Mat c = gates.middleRows(h, h).cwiseProduct(c_prev) +
            gates.topRows(h).cwiseProduct(gates.middleRows(2 * h, h));
    Mat tanh_c = c.array().tanh();
    hs[t] = gates.bottomRows(h).cwiseProduct(tanh_c);

    if (cache) {
      cache->x[t] = xs[t];
      cache->gates[t] = gates;
      cache->c[t] = c;
      cache->tanh_c[t] = tanh_c;
      cache->h[t] = hs[t];
    }
    h_prev = hs[t];
    c_prev = std::move(c);
  }
  return hs;
}

std::vector<Mat> LstmCell::backward(const std::vector<Mat>& ghs, const Cache& cache) {
  const int steps = static_cast<int>(cache.x.size());
  const Eigen::Index batch = cache.x[0].cols();
  const int h = hidden_dim_;

  std::vector<Mat> gxs(steps);
  Mat gh_next = Mat::Zero(h, batch);  // gradient flowing back through h
  Mat gc_next = Mat::Zero(h, batch);  // gradient flowing back through c

  for (int t = steps - 1; t >= 0; --t) {
    const Mat& gates = cache.gates[t];
    auto gi = gates.topRows(h);
    auto gf = gates.middleRows(h, h);
    auto gg = gates.middleRows(2 * h, h);
    auto go = gates.bottomRows(h);
    const Mat& tanh_c = cache.tanh_c[t];

    Mat gh = ghs[t] + gh_next;
    Mat gc = gc_next +
             gh.cwiseProduct(go).cwiseProduct(
                 (1.0 - tanh_c.array().square()).matrix());

    const Mat c_prev =
        t > 0 ? cache.c[t - 1] : Mat(Mat::Zero(h, batch));
    const Mat h_prev =
        t > 0 ? cache.h[t - 1] : Mat(Mat::Zero(h, batch));

    Mat gpre(4 * h, batch);
    // d/dpre through each activation.
    gpre.topRows(h) =
        gc.cwiseProduct(gg).cwiseProduct((gi.array() * (1.0 - gi.array())).matrix());
    gpre.middleRows(h, h) =
        gc.cwiseProduct(c_prev).cwiseProduct((gf.array() * (1.0 - gf.array())).matrix());
    gpre.middleRows(2 * h, h) =
        gc.cwiseProduct(gi).cwiseProduct((1.0 - gg.array().square()).matrix());
    gpre.bottomRows(h) =
        gh.cwiseProduct(tanh_c).cwiseProduct((go.array() * (1.0 - go.array())).matrix());

    gw_ih.noalias() += gpre * cache.x[t].transpose();
    gw_hh.noalias() += gpre * h_prev.transpose();
    Vec gb = gpre.rowwise().sum();
    gb_ih += gb;
    gb_hh += gb;

    gxs[t] = w_ih.transpose() * gpre;
    gh_next = w_hh.transpose() * gpre;
    gc_next = gc.cwiseProduct(gf);
  }
  return gxs;
}

void LstmCell::collect(const std::string& prefix, std::vector<ParamRef>& out) {
  out.push_back(param_ref(prefix + ".w_ih", w_ih, gw_ih, true));
  out.push_back(param_ref(prefix + ".w_hh", w_hh, gw_hh, true));
  out.push_back(param_ref(prefix + ".b_ih", b_ih, gb_ih, false));
  out.push_back(param_ref(prefix + ".b_hh", b_hh, gb_hh, false));
}

void LstmCell::zero_grad() {
  gw_ih.setZero();
  gw_hh.setZero();
  gb_ih.setZero();
  gb_hh.setZero();
}

BiLstmLayer::BiLstmLayer(int input_dim, int hidden_dim)
    : fwd(input_dim, hidden_dim), bwd(input_dim, hidden_dim), hidden_(hidden_dim) {}

void BiLstmLayer::init(std::mt19937_64& rng) {
  fwd.init(rng);
  bwd.init(rng);
}

std::vector<Mat> BiLstmLayer::forward(const std::vector<Mat>& xs, Cache* cache) const {
  const int steps = static_cast<int>(xs.size());
  std::vector<Mat> hs_f = fwd.forward(xs, cache ? &cache->fwd : nullptr);

  std::vector<Mat> rev(steps);
  for (int t = 0; t < steps; ++t) rev[t] = xs[steps - 1 - t];
  std::vector<Mat> hs_b = bwd.forward(rev, cache ? &cache->bwd : nullptr);

  std::vector<Mat> out(steps);
  for (int t = 0; t < steps; ++t) {
    out[t].resize(2 * hidden_, xs[t].cols());
    out[t].topRows(hidden_) = hs_f[t];
    out[t].bottomRows(hidden_) = hs_b[steps - 1 - t];
  }
  return out;
}

std::vector<Mat> BiLstmLayer::backward(const std::vector<Mat>& ghs, const Cache& cache) {
  const int steps = static_cast<int>(ghs.size());

  std::vector<Mat> gh_f(steps), gh_b(steps);
  for (int t = 0; t < steps; ++t) {
    gh_f[t] = ghs[t].topRows(hidden_);
    gh_b[steps - 1 - t] = ghs[t].bottomRows(hidden_);
  }

  std::vector<Mat> gx_f = fwd.backward(gh_f, cache.fwd);
  std::vector<Mat> gx_b = bwd.backward(gh_b, cache.bwd);

  std::vector<Mat> gxs(steps);
  for (int t = 0; t < steps; ++t) gxs[t] = gx_f[t] + gx_b[steps - 1 - t];
  return gxs;
}

Mat BiLstmLayer::final_states(const std::vector<Mat>& hs) const {
  // hs are this layer's concatenated outputs: forward final state is the top
  // half at the last step, backward final state the bottom half at step 0.
  const int steps = static_cast<int>(hs.size());
  Mat out(2 * hidden_, hs[0].cols());
  out.topRows(hidden_) = hs[steps - 1].topRows(hidden_);
  out.bottomRows(hidden_) = hs[0].bottomRows(hidden_);
  return out;
}

void BiLstmLayer::collect(const std::string& prefix, std::vector<ParamRef>& out) {
  fwd.collect(prefix + ".fwd", out);
  bwd.collect(prefix + ".bwd", out);
}

void BiLstmLayer::zero_grad() {
  fwd.zero_grad();
  bwd.zero_grad();
}

}  // namespace iitnet::nn
