#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tvc/agent/agent.hpp"
#include "tvc/evalkit/metrics.hpp"
#include "tvc/trainer/config.hpp"
#include "tvc/world/episodes.hpp"

namespace tvc::trainer {

struct AdaptResult {
  evalkit::TrajectoryRecord record;
  /// Mean augmented-view entropy along the reference path, before each
  /// update and once after the last (iterations + 1 values; empty when
  /// adaptation is disabled).
  std::vector<double> entropy_curve;
  std::string ml_hash_before;
  std::string ml_hash_after;
};

/// Adapts a private copy of `trained` to one episode and navigates with it.
/// Only the self-supervised parameters move; `trained` is never modified.
/// When `adapted` is given it receives the parameters used for the final run.
AdaptResult adapt_test_time(const agent::AgentParams& trained, const world::EnvironmentGraph& graph,
                            const world::Episode& episode, const RunConfig& config, std::uint64_t seed,
                            agent::AgentParams* adapted = nullptr);

}  // namespace tvc::trainer
