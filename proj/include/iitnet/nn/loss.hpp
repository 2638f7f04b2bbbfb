#pragma once

#include <vector>

#include "iitnet/nn/batch.hpp"

namespace iitnet::nn {

// Column-wise softmax with the max-subtraction trick.
Mat softmax(const Mat& logits);

// Mean cross-entropy over the batch. logits is (classes x batch); labels are
// class indices per column. If dlogits is non-null it receives the gradient
// of the mean loss w.r.t. the logits.
double softmax_cross_entropy(const Mat& logits, const std::vector<int>& labels,
                             Mat* dlogits);

}  // namespace iitnet::nn
