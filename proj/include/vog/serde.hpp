#pragma once

#include <json.hpp>

#include "vog/model.hpp"
#include "vog/train.hpp"

namespace vog {

// JSON conversions for the on-disk formats. Parsers are strict: unknown keys
// are rejected so a typo in a config never silently becomes a default.

nlohmann::json model_spec_to_json(const ModelSpec& spec);
ModelSpec model_spec_from_json(const nlohmann::json& j);

nlohmann::json train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);

nlohmann::json shuffle_record_to_json(const LabelShuffleRecord& rec);
LabelShuffleRecord shuffle_record_from_json(const nlohmann::json& j);

// Throws ConfigError naming the first unknown key, if any.
void reject_unknown_keys(const nlohmann::json& obj, const std::vector<std::string>& known,
                         const std::string& context);

}  // namespace vog
