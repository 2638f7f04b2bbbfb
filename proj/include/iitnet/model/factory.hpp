#pragma once

#include <memory>
#include <string>

#include "json.hpp"

#include "iitnet/model/classifier.hpp"

namespace iitnet::model {

// Builds an uninitialized classifier from its kind tag and configuration
// (the pair stored in checkpoints and run manifests).
std::unique_ptr<SequenceClassifier> make_classifier(const std::string& kind,
                                                    const nlohmann::json& config);

}  // namespace iitnet::model
