#include "tvc/evalkit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace tvc::evalkit {

std::string_view stop_reason_name(StopReason r) { return r == StopReason::kStopped ? "stopped" : "max_steps"; }

StopReason parse_stop_reason(std::string_view name) {
  if (name == "stopped") return StopReason::kStopped;
  if (name == "max_steps") return StopReason::kMaxSteps;
  throw std::invalid_argument("unknown stop reason '" + std::string(name) + "'");
}

void validate_trajectory(const TrajectoryRecord& traj, const world::EnvironmentGraph& graph) {
  if (traj.scene_id != graph.scene_id()) {
    throw SceneMismatch("trajectory scene " + traj.scene_id + " scored against " + graph.scene_id());
  }
  if (traj.nodes.empty()) throw SceneMismatch("trajectory " + traj.episode_id + " has no nodes");
  for (int n : traj.nodes) {
    if (n < 0 || n >= graph.size()) throw SceneMismatch("trajectory node outside scene " + graph.scene_id());
  }
  for (std::size_t i = 1; i < traj.nodes.size(); ++i) {
    if (!graph.adjacent(traj.nodes[i - 1], traj.nodes[i])) {
      throw SceneMismatch("trajectory " + traj.episode_id + " jumps between non-adjacent nodes");
    }
  }
}

double path_length(const world::EnvironmentGraph& graph, std::span<const int> nodes) {
  double total = 0.0;
  for (std::size_t i = 1; i < nodes.size(); ++i) total += graph.edge_length(nodes[i - 1], nodes[i]);
  return total;
}

double dtw(const world::EnvironmentGraph& graph, std::span<const int> query, std::span<const int> reference) {
  const std::size_t n = query.size(), m = reference.size();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> table((n + 1) * (m + 1), inf);
  auto at = [&](std::size_t i, std::size_t j) -> double& { return table[i * (m + 1) + j]; };
  at(0, 0) = 0.0;
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const double cost = graph.geodesic(query[i - 1], reference[j - 1]);
      at(i, j) = cost + std::min({at(i - 1, j), at(i, j - 1), at(i - 1, j - 1)});
    }
  }
  return at(n, m);
}

double ndtw(const world::EnvironmentGraph& graph, std::span<const int> query, std::span<const int> reference,
            double d_th) {
  return std::exp(-dtw(graph, query, reference) / (static_cast<double>(reference.size()) * d_th));
}

double cls(const world::EnvironmentGraph& graph, std::span<const int> path, std::span<const int> reference,
           double d_th) {
  double coverage = 0.0;
  for (int r : reference) {
    double nearest = std::numeric_limits<double>::infinity();
    for (int p : path) nearest = std::min(nearest, graph.geodesic(r, p));
    coverage += std::exp(-nearest / d_th);
  }
  coverage /= static_cast<double>(reference.size());
  const double expected = coverage * path_length(graph, reference);
  const double actual = path_length(graph, path);
  const double denom = expected + std::abs(expected - actual);
  const double length_score = denom > 0.0 ? expected / denom : 1.0;
  return coverage * length_score;
}

MetricRow compute_metrics(const TrajectoryRecord& traj, const world::Episode& episode,
                          const world::EnvironmentGraph& graph, double d_th) {
  if (traj.episode_id != episode.episode_id || episode.scene_id != graph.scene_id()) {
    throw SceneMismatch("trajectory " + traj.episode_id + " does not belong to episode " + episode.episode_id);
  }
  validate_trajectory(traj, graph);
  MetricRow row;
  row.episode_id = episode.episode_id;
  row.scene_id = episode.scene_id;
  row.tl = path_length(graph, traj.nodes);
  row.ne = graph.geodesic(traj.nodes.back(), episode.target);
  row.sr = row.ne <= d_th ? 1.0 : 0.0;
  const double shortest = graph.geodesic(episode.start, episode.target);
  const double longest = std::max(shortest, row.tl);
  row.spl = longest > 0.0 ? row.sr * shortest / longest : row.sr;
  row.ndtw = ndtw(graph, traj.nodes, episode.gt_path, d_th);
  row.sdtw = row.sr * row.ndtw;
  row.cls = cls(graph, traj.nodes, episode.gt_path, d_th);
  return row;
}

Aggregate aggregate(std::span<const MetricRow> rows) {
  Aggregate a;
  a.episodes = rows.size();
  if (rows.empty()) return a;
  for (const auto& r : rows) {
    a.tl += r.tl;
    a.ne += r.ne;
    a.sr += r.sr;
    a.spl += r.spl;
    a.cls += r.cls;
    a.ndtw += r.ndtw;
    a.sdtw += r.sdtw;
  }
  const double n = static_cast<double>(rows.size());
  a.tl /= n;
  a.ne /= n;
  a.sr /= n;
  a.spl /= n;
  a.cls /= n;
  a.ndtw /= n;
  a.sdtw /= n;
  return a;
}

nlohmann::json row_to_json(const MetricRow& r) {
  return {{"episode_id", r.episode_id}, {"scene_id", r.scene_id}, {"tl", r.tl},   {"ne", r.ne},
          {"sr", r.sr},                 {"spl", r.spl},           {"cls", r.cls}, {"ndtw", r.ndtw},
          {"sdtw", r.sdtw}};
}

MetricRow row_from_json(const nlohmann::json& j) {
  MetricRow r;
  r.episode_id = j.at("episode_id").get<std::string>();
  r.scene_id = j.at("scene_id").get<std::string>();
  r.tl = j.at("tl").get<double>();
  r.ne = j.at("ne").get<double>();
  r.sr = j.at("sr").get<double>();
  r.spl = j.at("spl").get<double>();
  r.cls = j.at("cls").get<double>();
  r.ndtw = j.at("ndtw").get<double>();
  r.sdtw = j.at("sdtw").get<double>();
  return r;
}

nlohmann::json aggregate_to_json(const Aggregate& a) {
  return {{"episodes", a.episodes}, {"tl", a.tl},   {"ne", a.ne},     {"sr", a.sr},
          {"spl", a.spl},           {"cls", a.cls}, {"ndtw", a.ndtw}, {"sdtw", a.sdtw}};
}

nlohmann::json trajectory_to_json(const TrajectoryRecord& t) {
  return {{"episode_id", t.episode_id}, {"scene_id", t.scene_id},
          {"nodes", t.nodes},           {"actions", t.actions},
          {"distributions", t.distributions}, {"stop_reason", stop_reason_name(t.stop_reason)}};
}

TrajectoryRecord trajectory_from_json(const nlohmann::json& j) {
  TrajectoryRecord t;
  t.episode_id = j.at("episode_id").get<std::string>();
  t.scene_id = j.at("scene_id").get<std::string>();
  t.nodes = j.at("nodes").get<std::vector<int>>();
  t.actions = j.at("actions").get<std::vector<int>>();
  t.distributions = j.at("distributions").get<std::vector<std::vector<double>>>();
  t.stop_reason = parse_stop_reason(j.at("stop_reason").get<std::string>());
  return t;
}

}  // namespace tvc::evalkit
