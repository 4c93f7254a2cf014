#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tvc/numcore/tensor.hpp"

namespace tvc::num {

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct OptimizerState {
  std::uint64_t step_count = 0;
  AdamConfig config;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
};

/// Allocates zeroed moments matching `params`.
OptimizerState make_adam_state(std::span<Parameter* const> params, AdamConfig config);

/// One bias-corrected Adam update over `params`, then zeroes their gradients.
/// Throws MissingGradient if any parameter has no gradient buffer and
/// ShapeMismatch if the state was built for different parameters.
void adam_step(std::span<Parameter* const> params, OptimizerState& state);

/// Rescales gradients so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
double clip_grad_norm(std::span<Parameter* const> params, double max_norm);

void zero_grad(std::span<Parameter* const> params);

}  // namespace tvc::num
