#pragma once

#include <json.hpp>

#include "dgbf/ensemble.hpp"

namespace dgbf::modelio::detail {

// ForestConfig encoding shared by model files and experiment reports.
nlohmann::ordered_json config_to_json(const ForestConfig& config);
ForestConfig config_from_json(const nlohmann::ordered_json& j);

}  // namespace dgbf::modelio::detail
