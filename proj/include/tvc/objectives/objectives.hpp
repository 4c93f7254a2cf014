#pragma once

#include <span>
#include <stdexcept>
#include <vector>

#include "tvc/numcore/tape.hpp"
#include "tvc/world/world.hpp"

namespace tvc::objectives {

class ObjectiveError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class LengthMismatch : public ObjectiveError {
 public:
  using ObjectiveError::ObjectiveError;
};

class InvalidDistribution : public ObjectiveError {
 public:
  using ObjectiveError::ObjectiveError;
};

class EmptyBatch : public ObjectiveError {
 public:
  using ObjectiveError::ObjectiveError;
};

class DimensionMismatch : public ObjectiveError {
 public:
  using ObjectiveError::ObjectiveError;
};

struct LossWeights {
  double lambda_ml = 0.2;     // imitation weight inside the supervised aggregate
  double lambda_rl = 0.2;     // actor weight inside the RL term
  double lambda_cl_il = 0.2;  // contrastive teacher-forcing head
  double lambda_cl_rl = 0.2;  // contrastive actor-critic head
  double alpha = 0.05;        // entropy temperature
  double gamma = 0.95;        // discount

  void validate() const;
  bool operator==(const LossWeights&) const = default;
};

/// Which terms of the training objective are active.
struct Switches {
  bool ml = true;
  bool cl_il = true;
  bool cl_rl = true;

  bool any() const { return ml || cl_il || cl_rl; }
  bool operator==(const Switches&) const = default;
};

struct ReplayTuple {
  std::vector<double> o;
  int a = 0;
  std::vector<double> o_next;
  double r = 0.0;
  bool d = false;
  // Action drawn at o_next by the behavior policy and its log-probability.
  int next_action = 0;
  double next_logprob = 0.0;
};

/// Sum over steps of -log p_t(a*_t). `log_probs[t]` holds log p_t over actions.
num::Var il_loss(std::span<const int> teacher_actions, std::span<const num::Var> log_probs);

/// r + gamma (1 - d) (min_target_q - alpha * next_logprob).
double sac_target(const ReplayTuple& tuple, double next_logprob, double min_target_q, const LossWeights& w);

/// Mean of (q_i - target_i)^2 with targets held fixed.
num::Var critic_loss(std::span<const num::Var> q_values, std::span<const double> targets);

/// -sum_a pi(a) (Q(a) - alpha log pi(a)); Q is a constant.
num::Var actor_loss(num::Var log_probs, std::span<const double> q_values, double alpha);

/// -log softmax_0([q^T W k+, q^T W k_0, ...]). `negatives` is a (K x dim)
/// matrix, or an unbound Var for K = 0.
num::Var info_nce(num::Var query, num::Var positive, num::Var negatives, num::Var bilinear);

num::Var ml_aggregate(num::Var l_rl, num::Var l_il, const LossWeights& w);

/// Switched sum l_ml + lambda_cl_il l_cl_il + lambda_cl_rl l_cl_rl. Inactive
/// terms may be unbound Vars. Throws ObjectiveError when no term is active.
num::Var train_objective(num::Var l_ml, num::Var l_cl_il, num::Var l_cl_rl, const LossWeights& w,
                         const Switches& s);

/// -sum p log p from log-probabilities (0 log 0 = 0).
num::Var entropy(num::Var log_probs);

/// Mean entropy over the augmented views.
num::Var tta_objective(std::span<const num::Var> log_probs);

/// Shaped navigation reward: geodesic progress, +2 for stopping within the
/// success radius, -2 for stopping outside it.
double step_reward(const world::EnvironmentGraph& graph, int before, int after, bool stopped, int target);

}  // namespace tvc::objectives
