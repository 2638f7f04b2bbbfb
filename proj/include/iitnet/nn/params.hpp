#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace iitnet::nn {

// Flat view over one named tensor (column-major). `grad` is null for
// non-trainable state such as batch-norm running statistics. `regularized`
// marks tensors the L2 penalty applies to (weights yes, biases and
// batch-norm parameters no).
struct ParamRef {
  std::string name;
  double* value = nullptr;
  double* grad = nullptr;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  bool regularized = false;

  Eigen::Index size() const { return rows * cols; }
};

inline ParamRef param_ref(const std::string& name, Eigen::MatrixXd& value,
                          Eigen::MatrixXd& grad, bool regularized) {
  return ParamRef{name, value.data(), grad.data(), value.rows(), value.cols(), regularized};
}

inline ParamRef param_ref(const std::string& name, Eigen::VectorXd& value,
                          Eigen::VectorXd& grad, bool regularized) {
  return ParamRef{name, value.data(), grad.data(), value.size(), 1, regularized};
}

inline ParamRef buffer_ref(const std::string& name, Eigen::VectorXd& value) {
  return ParamRef{name, value.data(), nullptr, value.size(), 1, false};
}

}  // namespace iitnet::nn
