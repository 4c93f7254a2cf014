#include "tvc/trainer/rollout.hpp"

#include <cmath>
#include <string>

namespace tvc::trainer {

using num::Tape;
using num::Var;

Rollout rollout(Tape& tape, agent::AgentParams& params, const world::EnvironmentGraph& graph,
                const world::Episode& episode, const RolloutOptions& options) {
  const auto& cfg = params.config();
  if (options.mode == RolloutMode::kSample && options.rng == nullptr) {
    throw std::invalid_argument("sample rollouts need an rng");
  }
  if (options.mode == RolloutMode::kForced &&
      (options.forced.empty() || options.forced.size() > static_cast<std::size_t>(cfg.max_steps))) {
    throw std::invalid_argument("forced rollout needs 1..max_steps actions");
  }
  agent::InstructionEncoding instr = options.instruction != nullptr
                                         ? *options.instruction
                                         : agent::encode_instruction(tape, params, episode.instruction);
  agent::DecoderState state = agent::initial_state(tape, params, instr);

  Rollout out;
  out.record.episode_id = episode.episode_id;
  out.record.scene_id = episode.scene_id;
  out.record.stop_reason = evalkit::StopReason::kMaxSteps;
  int node = episode.start;
  out.record.nodes.push_back(node);
  const int stop = cfg.stop_action();
  const int limit = options.mode == RolloutMode::kForced ? static_cast<int>(options.forced.size()) : cfg.max_steps;

  for (int t = 0; t < limit; ++t) {
    StepTrace step;
    step.node = node;
    step.teacher = world::teacher_action(graph, node, episode.target);
    step.obs = world::observe(graph, node);
    if (options.augmentation != nullptr) step.obs = augment::apply(*options.augmentation, step.obs);
    step.sectors = agent::encode_observation(tape, params, step.obs.features);
    Var attended = agent::attend_visual(tape, params, step.sectors, state.hidden);
    agent::StepOutput so =
        agent::decode_step(tape, params, state, attended, step.sectors, step.obs.navigable, instr.features);
    step.hidden = so.state.hidden;
    step.logits = so.logits;
    step.log_probs = num::log_softmax(so.logits);
    step.weights = agent::navigable_weights(so.logits, step.obs.navigable);

    const auto& lp = step.log_probs.values();
    std::vector<double> probs(lp.size());
    for (std::size_t k = 0; k < lp.size(); ++k) probs[k] = std::exp(lp[k]);

    int action = -1;
    switch (options.mode) {
      case RolloutMode::kTeacherForcing:
        action = step.teacher;
        break;
      case RolloutMode::kForced:
        action = options.forced[static_cast<std::size_t>(t)];
        break;
      case RolloutMode::kGreedy: {
        action = 0;
        for (std::size_t k = 1; k < lp.size(); ++k) {
          if (lp[k] > lp[static_cast<std::size_t>(action)]) action = static_cast<int>(k);
        }
        break;
      }
      case RolloutMode::kSample: {
        const double u = options.rng->uniform();
        double cum = 0.0;
        action = stop;
        for (std::size_t k = 0; k < probs.size(); ++k) {
          if (probs[k] <= 0.0) continue;
          cum += probs[k];
          if (u < cum) {
            action = static_cast<int>(k);
            break;
          }
        }
        break;
      }
    }
    if (action != stop && graph.neighbor_in_sector(node, action) < 0) {
      throw agent::InvalidAction("action " + std::to_string(action) + " is not navigable at node " +
                                 std::to_string(node));
    }
    step.action = action;
    out.record.actions.push_back(action);
    out.record.distributions.push_back(std::move(probs));
    out.steps.push_back(std::move(step));

    state = so.state;
    state.prev_action = action;
    if (action == stop) {
      out.record.stop_reason = evalkit::StopReason::kStopped;
      break;
    }
    node = graph.neighbor_in_sector(node, action);
    out.record.nodes.push_back(node);
  }
  return out;
}

evalkit::TrajectoryRecord greedy_episode(agent::AgentParams& params, const world::EnvironmentGraph& graph,
                                         const world::Episode& episode) {
  Tape tape;
  RolloutOptions opts;
  opts.mode = RolloutMode::kGreedy;
  return rollout(tape, params, graph, episode, opts).record;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("replay capacity must be positive");
  items_.reserve(std::min<std::size_t>(capacity, 4096));
}

void ReplayBuffer::push(objectives::ReplayTuple tuple) {
  if (items_.size() < capacity_) {
    items_.push_back(std::move(tuple));
    return;
  }
  items_[head_] = std::move(tuple);
  head_ = (head_ + 1) % capacity_;
}

const objectives::ReplayTuple& ReplayBuffer::at(std::size_t i) const {
  if (i >= items_.size()) throw std::out_of_range("replay index " + std::to_string(i));
  return items_[(head_ + i) % items_.size()];
}

std::vector<const objectives::ReplayTuple*> ReplayBuffer::sample(std::size_t n, Rng& rng) const {
  if (n > items_.size()) {
    throw InsufficientSamples("requested " + std::to_string(n) + " tuples from a buffer holding " +
                              std::to_string(items_.size()));
  }
  std::vector<std::size_t> idx(items_.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::vector<const objectives::ReplayTuple*> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = i + rng.below(idx.size() - i);
    std::swap(idx[i], idx[j]);
    out.push_back(&items_[idx[i]]);
  }
  return out;
}

num::Tensor select_negatives(std::span<const std::vector<double>> keys, std::size_t t,
                             const agent::KeyQueue& queue) {
  if (keys.size() < 2) throw TooShortTrajectory("contrastive terms need at least two steps");
  if (t >= keys.size()) throw std::out_of_range("step index " + std::to_string(t));
  const std::size_t dim = keys[0].size();
  const std::size_t k = keys.size() - 1 + queue.size();
  num::Tensor neg({k, dim});
  std::size_t r = 0;
  for (std::size_t j = 0; j < keys.size(); ++j) {
    if (j == t) continue;
    if (keys[j].size() != dim) throw num::ShapeMismatch("key dimensions differ");
    std::copy(keys[j].begin(), keys[j].end(), neg.row(r++).begin());
  }
  for (const auto& q : queue.entries()) {
    if (q.size() != dim) throw num::ShapeMismatch("queue key dimension differs");
    std::copy(q.begin(), q.end(), neg.row(r++).begin());
  }
  return neg;
}

}  // namespace tvc::trainer
