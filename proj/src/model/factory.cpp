#include "iitnet/model/factory.hpp"

#include <stdexcept>

#include "iitnet/model/baselines.hpp"
#include "iitnet/model/iitnet.hpp"

namespace iitnet::model {

std::unique_ptr<SequenceClassifier> make_classifier(const std::string& kind,
                                                    const nlohmann::json& config) {
  if (kind == "iitnet")
    return std::make_unique<Iitnet>(IitnetConfig::from_json(config));
  if (kind == "e2e-dsn")
    return std::make_unique<E2eDeepSleepNet>(BaselineConfig::from_json(config));
  if (kind == "e2e-intra-dsn")
    return std::make_unique<E2eIntraDeepSleepNet>(BaselineConfig::from_json(config));
  throw std::invalid_argument("unknown model kind: " + kind);
}

}  // namespace iitnet::model
