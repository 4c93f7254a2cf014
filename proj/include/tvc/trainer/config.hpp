#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "tvc/agent/agent.hpp"
#include "tvc/augment/augment.hpp"
#include "tvc/objectives/objectives.hpp"
#include "tvc/world/episodes.hpp"
#include "tvc/world/world.hpp"

namespace tvc::trainer {

inline constexpr int kConfigVersion = 1;

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainSettings {
  int iterations = 2000;
  int batch_size = 32;
  double learning_rate = 1e-4;
  double grad_clip = 25.0;
  int replay_capacity = 20000;
  int replay_batch = 32;
  int eval_every = 100;      // 0 disables periodic validation
  int eval_episodes = 64;
  int checkpoint_every = 0;  // 0 writes only the final checkpoint

  bool operator==(const TrainSettings&) const = default;
};

struct TtaSettings {
  int iterations = 10;
  int views = 8;
  double learning_rate = 1e-4;
  bool momentum_updates = true;

  bool operator==(const TtaSettings&) const = default;
};

struct RunConfig {
  std::uint64_t seed = 0;        // training seed
  std::uint64_t world_seed = 7;  // world and episodes; shared across training seeds
  world::WorldConfig world;
  world::EpisodeCounts episodes;
  world::EpisodeConfig hops;
  agent::AgentConfig agent;  // views, feature_dim and vocab_size are derived
  objectives::LossWeights loss;
  objectives::Switches switches;
  TrainSettings train;
  TtaSettings tta;
  augment::Pool pool = augment::default_pool();

  /// Agent config with the world-derived fields filled in.
  agent::AgentConfig resolved_agent() const;
  void validate() const;
  bool operator==(const RunConfig&) const = default;
};

nlohmann::json config_to_json(const RunConfig& c);
/// Requires "version" and "seed"; other keys default. Unknown keys throw ConfigError naming the field.
RunConfig config_from_json(const nlohmann::json& j);
/// Parses text, reporting the line of a syntax error.
RunConfig parse_config(const std::string& text);

/// Applies a "dotted.key=value" override to a config document. The value is
/// parsed as JSON when possible and as a string otherwise.
void apply_override(nlohmann::json& doc, const std::string& assignment);

/// SHA-256 of the canonical form of everything that determines a trained model.
std::string model_hash(const RunConfig& c);
std::string config_hash(const RunConfig& c);

objectives::Switches parse_switches(const std::string& list);
std::string switches_name(const objectives::Switches& s);

}  // namespace tvc::trainer
