#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "tvc/agent/agent.hpp"
#include "tvc/augment/augment.hpp"
#include "tvc/evalkit/metrics.hpp"
#include "tvc/objectives/objectives.hpp"
#include "tvc/util/rng.hpp"
#include "tvc/world/episodes.hpp"

namespace tvc::trainer {

class InsufficientSamples : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TooShortTrajectory : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class RolloutMode {
  kTeacherForcing,  // follow the shortest-path teacher
  kSample,          // draw from the policy
  kGreedy,          // argmax, lowest index on ties
  kForced,          // replay a given action list
};

struct StepTrace {
  int node = -1;
  int action = -1;
  int teacher = -1;
  world::Observation obs;  // as the policy saw it (augmented when requested)
  num::Var sectors;        // sector embeddings
  num::Var hidden;         // decoder state after the step
  num::Var logits;
  num::Var log_probs;
  std::vector<double> weights;  // attention-free pooling weights over navigable sectors
};

struct Rollout {
  evalkit::TrajectoryRecord record;
  std::vector<StepTrace> steps;
};

struct RolloutOptions {
  RolloutMode mode = RolloutMode::kGreedy;
  Rng* rng = nullptr;                                     // kSample
  std::span<const int> forced;                            // kForced
  const augment::AugmentationSpec* augmentation = nullptr;
  const agent::InstructionEncoding* instruction = nullptr;  // reuse an encoding on the same tape
};

Rollout rollout(num::Tape& tape, agent::AgentParams& params, const world::EnvironmentGraph& graph,
                const world::Episode& episode, const RolloutOptions& options);

/// Forward-only greedy episode.
evalkit::TrajectoryRecord greedy_episode(agent::AgentParams& params, const world::EnvironmentGraph& graph,
                                         const world::Episode& episode);

/// Fixed-capacity FIFO of transitions.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 20000);

  void push(objectives::ReplayTuple tuple);
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  const objectives::ReplayTuple& at(std::size_t i) const;
  /// `n` distinct tuples chosen uniformly. Throws InsufficientSamples when n > size.
  std::vector<const objectives::ReplayTuple*> sample(std::size_t n, Rng& rng) const;

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;
  std::vector<objectives::ReplayTuple> items_;
};

/// Negative keys for step `t`: the other steps' keys followed by the queue.
/// Throws TooShortTrajectory for fewer than two steps.
num::Tensor select_negatives(std::span<const std::vector<double>> keys, std::size_t t,
                             const agent::KeyQueue& queue);

}  // namespace tvc::trainer
