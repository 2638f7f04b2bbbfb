#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "iitnet/nn/params.hpp"

namespace iitnet::train {

struct AdamConfig {
  double lr = 0.005;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// First/second moment estimates with bias correction. State slots are keyed
// by parameter name so they survive checkpoint round trips.
class Adam {
 public:
  Adam(const std::vector<nn::ParamRef>& params, const AdamConfig& cfg = {});

  // Applies one update from the gradients currently in the parameter slots.
  void step(const std::vector<nn::ParamRef>& params);

  long long t() const { return t_; }
  const AdamConfig& config() const { return cfg_; }

  struct Slot {
    std::string name;
    Eigen::VectorXd m;
    Eigen::VectorXd v;
  };
  std::vector<Slot>& slots() { return slots_; }
  void set_t(long long t) { t_ = t; }

 private:
  AdamConfig cfg_;
  std::vector<Slot> slots_;
  long long t_ = 0;
};

}  // namespace iitnet::train
