#include "iitnet/nn/loss.hpp"

#include <cmath>
#include <stdexcept>

namespace iitnet::nn {

Mat softmax(const Mat& logits) {
  Mat p = logits;
  for (Eigen::Index j = 0; j < p.cols(); ++j) {
    Eigen::ArrayXd col = p.col(j).array() - p.col(j).maxCoeff();
    col = col.exp();
    p.col(j) = col / col.sum();
  }
  return p;
}

double softmax_cross_entropy(const Mat& logits, const std::vector<int>& labels,
                             Mat* dlogits) {
  const Eigen::Index batch = logits.cols();
  if (static_cast<Eigen::Index>(labels.size()) != batch)
    throw std::invalid_argument("softmax_cross_entropy: label count mismatch");
  if (batch == 0) throw std::invalid_argument("softmax_cross_entropy: empty batch");

  double total = 0.0;
  Mat p = logits;
  for (Eigen::Index j = 0; j < batch; ++j) {
    const int y = labels[j];
    if (y < 0 || y >= logits.rows())
      throw std::invalid_argument("softmax_cross_entropy: label out of range");
    const double mx = logits.col(j).maxCoeff();
    Eigen::ArrayXd shifted = logits.col(j).array() - mx;
    const double lse = std::log(shifted.exp().sum());
    total += lse - shifted[y];
    if (dlogits) p.col(j) = (shifted - lse).exp();
  }
  if (dlogits) {
    for (Eigen::Index j = 0; j < batch; ++j) p(labels[j], j) -= 1.0;
    *dlogits = p / static_cast<double>(batch);
  }
  return total / static_cast<double>(batch);
}

}  // namespace iitnet::nn
