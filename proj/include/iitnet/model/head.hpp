#pragma once

#include <random>
#include <string>
#include <vector>

#include "iitnet/nn/layers.hpp"
#include "iitnet/nn/lstm.hpp"

namespace iitnet::model {

using nn::Mat;
using nn::Vec;

// Sequence model over the concatenated per-epoch feature sequences: two
// stacked bidirectional recurrent layers, then a linear classifier fed with
// the second layer's final states (forward state at the last step, backward
// state at the first step).
class ContextHead {
 public:
  ContextHead(int input_dim, int hidden_dim, int classes);

  struct Ctx {
    std::vector<Mat> xs;   // per-step inputs (input_dim x batch)
    nn::BiLstmLayer::Cache c1, c2;
    std::vector<Mat> h1;   // first layer outputs
    std::vector<Mat> h2;   // second layer outputs
    Mat final_states;      // classifier input (2*hidden x batch)
  };

  void init(std::mt19937_64& rng);

  // feats: input_dim x (batch * steps), sample-major, with each sample's
  // `steps` timestep columns contiguous and chronological. Returns logits
  // (classes x batch).
  Mat forward(const Mat& feats, int batch, int steps, Ctx* ctx);

  // dlogits: gradient w.r.t. the logits. Returns the gradient w.r.t. feats in
  // the same column layout.
  Mat backward(const Mat& dlogits, const Ctx& ctx);

  void collect(const std::string& prefix, std::vector<nn::ParamRef>& out);
  void zero_grad();

  int hidden_dim() const { return l1_.hidden_dim(); }
  int classes() const;

 private:
  nn::BiLstmLayer l1_;
  nn::BiLstmLayer l2_;
  nn::Linear fc_;
};

}  // namespace iitnet::model
