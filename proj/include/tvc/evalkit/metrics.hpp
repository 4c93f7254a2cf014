#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "tvc/world/episodes.hpp"
#include "tvc/world/world.hpp"

namespace tvc::evalkit {

class SceneMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class StopReason { kStopped, kMaxSteps };

std::string_view stop_reason_name(StopReason r);
StopReason parse_stop_reason(std::string_view name);

struct TrajectoryRecord {
  std::string episode_id;
  std::string scene_id;
  std::vector<int> nodes;
  std::vector<int> actions;
  std::vector<std::vector<double>> distributions;  // per-step action probabilities
  StopReason stop_reason = StopReason::kStopped;

  bool operator==(const TrajectoryRecord&) const = default;
};

/// Throws SceneMismatch unless consecutive nodes are adjacent in `graph`.
void validate_trajectory(const TrajectoryRecord& traj, const world::EnvironmentGraph& graph);

struct MetricRow {
  std::string episode_id;
  std::string scene_id;
  double tl = 0.0;
  double ne = 0.0;
  double sr = 0.0;
  double spl = 0.0;
  double cls = 0.0;
  double ndtw = 0.0;
  double sdtw = 0.0;

  bool operator==(const MetricRow&) const = default;
};

double path_length(const world::EnvironmentGraph& graph, std::span<const int> nodes);

/// Dynamic time warping with geodesic node distance as the local cost.
double dtw(const world::EnvironmentGraph& graph, std::span<const int> query, std::span<const int> reference);

/// exp(-DTW(query, reference) / (|reference| * d_th)).
double ndtw(const world::EnvironmentGraph& graph, std::span<const int> query, std::span<const int> reference,
            double d_th);

/// Coverage weighted by length score.
double cls(const world::EnvironmentGraph& graph, std::span<const int> path, std::span<const int> reference,
           double d_th);

MetricRow compute_metrics(const TrajectoryRecord& traj, const world::Episode& episode,
                          const world::EnvironmentGraph& graph, double d_th);

struct Aggregate {
  std::size_t episodes = 0;
  double tl = 0.0, ne = 0.0, sr = 0.0, spl = 0.0, cls = 0.0, ndtw = 0.0, sdtw = 0.0;

  bool operator==(const Aggregate&) const = default;
};

/// Plain means of the rows.
Aggregate aggregate(std::span<const MetricRow> rows);

nlohmann::json row_to_json(const MetricRow& row);
MetricRow row_from_json(const nlohmann::json& j);
nlohmann::json aggregate_to_json(const Aggregate& a);
nlohmann::json trajectory_to_json(const TrajectoryRecord& t);
TrajectoryRecord trajectory_from_json(const nlohmann::json& j);

}  // namespace tvc::evalkit
