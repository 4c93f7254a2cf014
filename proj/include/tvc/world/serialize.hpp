#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "tvc/world/episodes.hpp"
#include "tvc/world/world.hpp"

namespace tvc::world {

inline constexpr int kWorldFormatVersion = 1;
inline constexpr int kEpisodeFormatVersion = 1;

nlohmann::json config_to_json(const WorldConfig& config);
/// Missing keys keep their defaults; unknown keys are rejected.
WorldConfig config_from_json(const nlohmann::json& j);

nlohmann::json world_to_json(const World& world);
World world_from_json(const nlohmann::json& j);

nlohmann::json episodes_to_json(const std::vector<Episode>& episodes);
std::vector<Episode> episodes_from_json(const nlohmann::json& j);

}  // namespace tvc::world
