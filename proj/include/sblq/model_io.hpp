#pragma once

#include <filesystem>
#include <vector>

#include <json.hpp>

#include "sblq/learner.hpp"

namespace sblq {

nlohmann::json to_json(const AdaptiveConfig& cfg);
AdaptiveConfig adaptive_config_from_json(const nlohmann::json& j);

nlohmann::json to_json(const ModelBundle& model);
ModelBundle model_from_json(const nlohmann::json& j);

nlohmann::json to_json(const StageFitReport& report);
nlohmann::json to_json(const std::vector<StageFitReport>& reports);

void save_model(const ModelBundle& model, const std::filesystem::path& path);
ModelBundle load_model(const std::filesystem::path& path);

}  // namespace sblq
