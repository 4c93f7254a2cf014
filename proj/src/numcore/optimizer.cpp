#include "tvc/numcore/optimizer.hpp"

#include <cmath>

namespace tvc::num {

OptimizerState make_adam_state(std::span<Parameter* const> params, AdamConfig config) {
  if (!(config.learning_rate > 0.0) || !(config.beta1 > 0.0 && config.beta1 < 1.0) ||
      !(config.beta2 > 0.0 && config.beta2 < 1.0) ||
      !(config.epsilon > 0.0 && config.epsilon < 1e-2)) {
    throw NumError("invalid Adam hyperparameters");
  }
  OptimizerState state;
  state.config = config;
  state.first_moment.reserve(params.size());
  state.second_moment.reserve(params.size());
  for (const Parameter* p : params) {
    state.first_moment.emplace_back(p->value.size(), 0.0);
    state.second_moment.emplace_back(p->value.size(), 0.0);
  }
  return state;
}

void adam_step(std::span<Parameter* const> params, OptimizerState& state) {
  if (state.first_moment.size() != params.size()) {
    throw ShapeMismatch("optimizer state tracks " + std::to_string(state.first_moment.size()) +
                        " tensors, got " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i]->has_grad()) throw MissingGradient("no gradient for " + params[i]->name);
    if (state.first_moment[i].size() != params[i]->value.size()) {
      throw ShapeMismatch("optimizer moment shape differs for " + params[i]->name);
    }
  }
  state.step_count += 1;
  const auto& cfg = state.config;
  const double t = static_cast<double>(state.step_count);
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = *params[i];
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    for (std::size_t j = 0; j < p.value.size(); ++j) {
      const double g = p.grad[j];
      m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g;
      v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g * g;
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      p.value.data[j] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon);
    }
    p.zero_grad();
  }
}

double clip_grad_norm(std::span<Parameter* const> params, double max_norm) {
  double sq = 0.0;
  for (const Parameter* p : params) {
    for (double g : p->grad) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double s = max_norm / norm;
    for (Parameter* p : params) {
      for (double& g : p->grad) g *= s;
    }
  }
  return norm;
}

void zero_grad(std::span<Parameter* const> params) {
  for (Parameter* p : params) p->zero_grad();
}

}  // namespace tvc::num
