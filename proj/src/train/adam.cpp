#include "iitnet/train/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace iitnet::train {

Adam::Adam(const std::vector<nn::ParamRef>& params, const AdamConfig& cfg) : cfg_(cfg) {
  slots_.reserve(params.size());
  for (const auto& p : params)
    slots_.push_back({p.name, Eigen::VectorXd::Zero(p.size()), Eigen::VectorXd::Zero(p.size())});
}

void Adam::step(const std::vector<nn::ParamRef>& params) {
  if (params.size() != slots_.size())
    throw std::invalid_argument("Adam: parameter list changed size");
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));

  for (size_t k = 0; k < params.size(); ++k) {
    const auto& p = params[k];
    Slot& s = slots_[k];
    if (p.name != s.name) throw std::invalid_argument("Adam: parameter order changed");
    if (!p.grad) continue;
    Eigen::Map<Eigen::VectorXd> value(p.value, p.size());
    Eigen::Map<const Eigen::VectorXd> grad(p.grad, p.size());

    s.m = cfg_.beta1 * s.m + (1.0 - cfg_.beta1) * grad;
    s.v = cfg_.beta2 * s.v + (1.0 - cfg_.beta2) * grad.cwiseProduct(grad);
    value.array() -= cfg_.lr * (s.m.array() / bc1) /
                     ((s.v.array() / bc2).sqrt() + cfg_.eps);
  }
}

}  // namespace iitnet::train
