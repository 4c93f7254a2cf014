#include "tvc/objectives/objectives.hpp"

#include <cmath>
#include <string>

namespace tvc::objectives {

using num::Var;

namespace {

constexpr double kDistributionTolerance = 1e-6;
constexpr double kSuccessBonus = 2.0;

void check_distribution(Var log_probs, const char* where) {
  if (log_probs.shape().size() != 1) throw InvalidDistribution(std::string(where) + ": expected a vector");
  double total = 0.0;
  for (double lp : log_probs.values()) total += std::exp(lp);
  if (std::abs(total - 1.0) > kDistributionTolerance) {
    throw InvalidDistribution(std::string(where) + ": probabilities sum to " + std::to_string(total));
  }
}

void check_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw num::NonFiniteValue(std::string("sac_target: non-finite ") + what);
}

}  // namespace

void LossWeights::validate() const {
  for (double v : {lambda_ml, lambda_rl, lambda_cl_il, lambda_cl_rl, alpha, gamma}) {
    if (!std::isfinite(v) || v < 0.0) throw ObjectiveError("loss weights must be finite and non-negative");
  }
  if (gamma >= 1.0) throw ObjectiveError("gamma must be < 1");
}

Var il_loss(std::span<const int> teacher_actions, std::span<const Var> log_probs) {
  if (teacher_actions.size() != log_probs.size()) {
    throw LengthMismatch("il_loss: " + std::to_string(teacher_actions.size()) + " teacher actions vs " +
                         std::to_string(log_probs.size()) + " predictions");
  }
  if (log_probs.empty()) throw EmptyBatch("il_loss: empty sequence");
  Var total;
  for (std::size_t t = 0; t < log_probs.size(); ++t) {
    check_distribution(log_probs[t], "il_loss");
    const auto a = static_cast<std::size_t>(teacher_actions[t]);
    if (teacher_actions[t] < 0 || a >= log_probs[t].size()) throw DimensionMismatch("il_loss: action out of range");
    Var term = num::pick(log_probs[t], a);
    total = total.valid() ? total + term : term;
  }
  return num::scale(total, -1.0);
}

double sac_target(const ReplayTuple& tuple, double next_logprob, double min_target_q, const LossWeights& w) {
  check_finite(tuple.r, "reward");
  if (tuple.d) return tuple.r;
  check_finite(next_logprob, "log-probability");
  check_finite(min_target_q, "target Q");
  return tuple.r + w.gamma * (min_target_q - w.alpha * next_logprob);
}

Var critic_loss(std::span<const Var> q_values, std::span<const double> targets) {
  if (q_values.empty()) throw EmptyBatch("critic_loss: empty batch");
  if (q_values.size() != targets.size()) throw LengthMismatch("critic_loss: q/target count differs");
  num::Tape* tape = q_values.front().tape();
  std::vector<Var> diffs;
  diffs.reserve(q_values.size());
  for (std::size_t i = 0; i < q_values.size(); ++i) {
    diffs.push_back(num::sub(q_values[i], tape->scalar(targets[i])));
  }
  return num::mean(num::square(num::concat(diffs)));
}

Var actor_loss(Var log_probs, std::span<const double> q_values, double alpha) {
  check_distribution(log_probs, "actor_loss");
  if (q_values.size() != log_probs.size()) throw DimensionMismatch("actor_loss: Q and policy sizes differ");
  num::Tape* tape = log_probs.tape();
  Var q = tape->constant(num::Shape{q_values.size()}, std::vector<double>(q_values.begin(), q_values.end()));
  Var pi = num::exp(log_probs);
  Var inner = num::sub(q, num::scale(log_probs, alpha));
  return num::scale(num::dot(pi, inner), -1.0);
}

Var info_nce(Var query, Var positive, Var negatives, Var bilinear) {
  const auto& qs = query.shape();
  const auto& ws = bilinear.shape();
  if (qs.size() != 1 || positive.shape() != qs || ws.size() != 2 || ws[0] != qs[0] || ws[1] != qs[0]) {
    throw DimensionMismatch("info_nce: query, key and bilinear shapes disagree");
  }
  if (negatives.valid()) {
    const auto& ns = negatives.shape();
    if (ns.size() != 2 || ns[1] != qs[0]) throw DimensionMismatch("info_nce: negatives must be K x dim");
  }
  num::Tape* tape = query.tape();
  if (!negatives.valid()) return tape->scalar(0.0);
  Var qw = num::matmul(query, bilinear);
  std::vector<Var> logits{num::dot(qw, positive), num::matmul(negatives, qw)};
  return num::scale(num::pick(num::log_softmax(num::concat(logits)), 0), -1.0);
}

Var ml_aggregate(Var l_rl, Var l_il, const LossWeights& w) { return l_rl + num::scale(l_il, w.lambda_ml); }

Var train_objective(Var l_ml, Var l_cl_il, Var l_cl_rl, const LossWeights& w, const Switches& s) {
  if (!s.any()) throw ObjectiveError("train_objective: every term is switched off");
  Var total;
  auto add = [&](Var term, double weight) {
    if (!term.valid()) throw ObjectiveError("train_objective: active term was not computed");
    Var scaled = weight == 1.0 ? term : num::scale(term, weight);
    total = total.valid() ? total + scaled : scaled;
  };
  if (s.ml) add(l_ml, 1.0);
  if (s.cl_il) add(l_cl_il, w.lambda_cl_il);
  if (s.cl_rl) add(l_cl_rl, w.lambda_cl_rl);
  return total;
}

Var entropy(Var log_probs) {
  check_distribution(log_probs, "entropy");
  return num::scale(num::dot(num::exp(log_probs), log_probs), -1.0);
}

Var tta_objective(std::span<const Var> log_probs) {
  if (log_probs.empty()) throw EmptyBatch("tta_objective: no augmented views");
  Var total;
  for (Var lp : log_probs) {
    Var h = entropy(lp);
    total = total.valid() ? total + h : h;
  }
  return num::scale(total, 1.0 / static_cast<double>(log_probs.size()));
}

double step_reward(const world::EnvironmentGraph& graph, int before, int after, bool stopped, int target) {
  if (stopped) {
    return graph.geodesic(after, target) <= graph.success_radius() ? kSuccessBonus : -kSuccessBonus;
  }
  return graph.geodesic(before, target) - graph.geodesic(after, target);
}

}  // namespace tvc::objectives
