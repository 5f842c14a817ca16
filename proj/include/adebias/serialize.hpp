#pragma once

#include <json.hpp>

#include "adebias/nn.hpp"
#include "adebias/probe.hpp"
#include "adebias/train.hpp"

namespace adebias::nn {
void to_json(nlohmann::json& j, const HeadSpec& h);
void from_json(const nlohmann::json& j, HeadSpec& h);
}  // namespace adebias::nn

namespace adebias::train {
void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);
}  // namespace adebias::train

namespace adebias::probe {
void to_json(nlohmann::json& j, const ProbeOptions& o);
void from_json(const nlohmann::json& j, ProbeOptions& o);
}  // namespace adebias::probe
