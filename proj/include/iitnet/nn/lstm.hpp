#pragma once

#include <random>
#include <string>
#include <vector>

#include "iitnet/nn/batch.hpp"
#include "iitnet/nn/params.hpp"

namespace iitnet::nn {

// One LSTM direction unrolled over a fixed number of steps. Inputs and
// outputs are per-step matrices of shape (dim x batch). Gate rows are
// stacked [input, forget, cell, output]; initial h and c are zero.
class LstmCell {
 public:
  LstmCell(int input_dim, int hidden_dim);

  void init(std::mt19937_64& rng);  // U(-1/sqrt(hidden), 1/sqrt(hidden))

  struct Cache {
    std::vector<Mat> x;      // inputs per step
    std::vector<Mat> gates;  // post-activation [i;f;g;o] per step
    std::vector<Mat> c;      // cell states per step
    std::vector<Mat> tanh_c; // tanh(c) per step
    std::vector<Mat> h;      // hidden states per step
  };

  // Runs the sequence front to back; xs[t] is (input_dim x batch).
  // Returns hidden states per step. Cache may be null for inference.
  std::vector<Mat> forward(const std::vector<Mat>& xs, Cache* cache) const;

  // ghs[t] is the gradient w.r.t. the step-t hidden output (zero matrices
  // allowed). Accumulates parameter gradients, returns input gradients.
  std::vector<Mat> backward(const std::vector<Mat>& ghs, const Cache& cache);

  void collect(const std::string& prefix, std::vector<ParamRef>& out);
  void zero_grad();

  int input_dim() const { return input_dim_; }
  int hidden_dim() const { return hidden_dim_; }

  Mat w_ih;  // (4*hidden) x input
  Mat w_hh;  // (4*hidden) x hidden
  Vec b_ih;  // 4*hidden
  Vec b_hh;  // 4*hidden
  Mat gw_ih, gw_hh;
  Vec gb_ih, gb_hh;

 private:
  int input_dim_, hidden_dim_;
};

// Bidirectional layer: forward cell reads steps 0..T-1, backward cell reads
// T-1..0. Per-step output is the concatenation [forward; backward]
// (2*hidden x batch).
class BiLstmLayer {
 public:
  BiLstmLayer(int input_dim, int hidden_dim);

  void init(std::mt19937_64& rng);

  struct Cache {
    LstmCell::Cache fwd;
    LstmCell::Cache bwd;
  };

  std::vector<Mat> forward(const std::vector<Mat>& xs, Cache* cache) const;
  std::vector<Mat> backward(const std::vector<Mat>& ghs, const Cache& cache);

  // Final states used by the classifier: forward hidden at the last step and
  // backward hidden at the first step, stacked to (2*hidden x batch).
  Mat final_states(const std::vector<Mat>& hs) const;

  void collect(const std::string& prefix, std::vector<ParamRef>& out);
  void zero_grad();

  int hidden_dim() const { return hidden_; }

  LstmCell fwd;
  LstmCell bwd;

 private:
  int hidden_;
};

}  // namespace iitnet::nn
