#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "tvc/agent/agent.hpp"
#include "tvc/numcore/optimizer.hpp"
#include "tvc/trainer/config.hpp"
#include "tvc/trainer/rollout.hpp"
#include "tvc/world/episodes.hpp"

namespace tvc::trainer {

class DivergenceDetected : public std::runtime_error {
 public:
  DivergenceDetected(int iteration, const std::string& what)
      : std::runtime_error("training diverged at iteration " + std::to_string(iteration) + ": " + what),
        iteration_(iteration) {}
  int iteration() const { return iteration_; }

 private:
  int iteration_;
};

class CheckpointMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct IterationStats {
  int iteration = 0;  // 1-based index of the finished iteration
  double loss = 0.0;
  double il = 0.0;
  double actor = 0.0;
  double critic = 0.0;
  double cl_il = 0.0;
  double cl_rl = 0.0;
  double grad_norm = 0.0;
  double sample_steps = 0.0;  // mean sampled trajectory length
  std::size_t replay_size = 0;
};

nlohmann::json stats_to_json(const IterationStats& s);

struct TrainState {
  agent::AgentParams params;
  num::OptimizerState optimizer;
  int iteration = 0;
  ReplayBuffer replay;
};

/// Fresh parameters and optimizer for `config`.
TrainState init_train_state(const RunConfig& config);

/// Trainable parameters in optimizer order (supervised, then self-supervised).
std::vector<num::Parameter*> optimizer_params(agent::AgentParams& params);

/// One joint update. Throws DivergenceDetected on a non-finite loss or gradient.
IterationStats train_iteration(TrainState& state, const RunConfig& config, const world::World& world,
                               const std::vector<world::Episode>& train);

struct TrainHooks {
  /// Called after every iteration with the log record.
  std::function<void(const nlohmann::json&)> on_log;
  /// Called when a periodic checkpoint is due.
  std::function<void(const TrainState&)> on_checkpoint;
};

/// Runs iterations until state.iteration == config.train.iterations.
void train_joint(TrainState& state, const RunConfig& config, const world::World& world,
                 const world::EpisodeSets& episodes, const TrainHooks& hooks = {});

/// Evenly strided subset of at most `n` episodes.
std::vector<world::Episode> eval_subset(const std::vector<world::Episode>& episodes, int n);

/// Greedy success rate and SPL over `episodes`.
nlohmann::json quick_eval(agent::AgentParams& params, const world::World& world,
                          const std::vector<world::Episode>& episodes);

nlohmann::json checkpoint_to_json(const TrainState& state, const RunConfig& config, const std::string& world_hash);
struct LoadedCheckpoint {
  RunConfig config;
  std::string world_hash;
  TrainState state;
};
/// Throws CheckpointMismatch when the stored hash does not match the stored config.
LoadedCheckpoint checkpoint_from_json(const nlohmann::json& j);

/// SHA-256 of the canonical world document.
std::string world_hash(const world::World& world);

}  // namespace tvc::trainer
