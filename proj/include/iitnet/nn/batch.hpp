#pragma once

#include <Eigen/Dense>

namespace iitnet::nn {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// A batch of equal-length 1-D multichannel signals, stored channels x
// (count * length) with one contiguous column block per signal. Epoch i of a
// sequence batch lives in columns [i*length, (i+1)*length); block order is
// sample-major, chronological within each sample.
struct SignalBatch {
  Mat data;
  int count = 0;
  int length = 0;

  SignalBatch() = default;
  SignalBatch(int channels, int count_, int length_)
      : data(Mat::Zero(channels, static_cast<Eigen::Index>(count_) * length_)),
        count(count_),
        length(length_) {}

  int channels() const { return static_cast<int>(data.rows()); }

  auto block(int i) { return data.middleCols(static_cast<Eigen::Index>(i) * length, length); }
  auto block(int i) const {
    return data.middleCols(static_cast<Eigen::Index>(i) * length, length);
  }
};

}  // namespace iitnet::nn
