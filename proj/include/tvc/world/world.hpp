#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "tvc/numcore/tensor.hpp"

namespace tvc::world {

class WorldError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidConfig : public WorldError {
 public:
  using WorldError::WorldError;
};

class UnknownNode : public WorldError {
 public:
  using WorldError::WorldError;
};

struct WorldConfig {
  int seen_scenes = 20;
  int unseen_scenes = 10;
  int min_nodes = 20;
  int max_nodes = 40;
  int views = 12;          // sectors per panorama
  int feature_dim = 32;
  double shift = 0.5;      // per-dimension offset of unseen style means
  double style_scale = 0.1;
  double noise = 0.1;
  double node_spacing = 2.0;  // meters
  double extra_edge_prob = 0.3;
  int num_landmarks = 40;

  void validate() const;
  bool operator==(const WorldConfig&) const = default;
};

struct Edge {
  int to = -1;
  double length = 0.0;
  int sector = -1;
};

struct Viewpoint {
  int id = -1;
  double x = 0.0;
  double y = 0.0;
  int landmark = -1;
  num::Tensor view_features;       // views x feature_dim
  std::vector<int> landmark_tags;  // per sector, -1 when the sector is empty
};

/// Raw panoramic observation at one viewpoint.
struct Observation {
  num::Tensor features;               // views x feature_dim
  std::vector<std::uint8_t> navigable;  // per sector

  int views() const { return static_cast<int>(navigable.size()); }
};

class EnvironmentGraph {
 public:
  EnvironmentGraph() = default;
  EnvironmentGraph(std::string scene_id, bool unseen, int views, int feature_dim,
                   std::vector<double> style, std::vector<Viewpoint> nodes,
                   std::vector<std::vector<Edge>> adjacency);

  const std::string& scene_id() const { return scene_id_; }
  bool unseen() const { return unseen_; }
  int views() const { return views_; }
  int feature_dim() const { return feature_dim_; }
  int stop_action() const { return views_; }
  const std::vector<double>& style() const { return style_; }
  int size() const { return static_cast<int>(nodes_.size()); }
  const Viewpoint& node(int id) const;
  const std::vector<Viewpoint>& nodes() const { return nodes_; }
  const std::vector<Edge>& edges(int id) const;
  int degree(int id) const { return static_cast<int>(edges(id).size()); }

  /// Neighbor reached through `sector`, or -1 when the sector is not navigable.
  int neighbor_in_sector(int node, int sector) const;
  /// Throws WorldError when the nodes are not adjacent.
  double edge_length(int a, int b) const;
  bool adjacent(int a, int b) const;
  double geodesic(int a, int b) const;
  double mean_edge_length() const { return mean_edge_length_; }
  /// Success threshold d_th: 1.5 x mean edge length.
  double success_radius() const { return 1.5 * mean_edge_length_; }

  void check_node(int id) const;
  bool connected() const;

 private:
  void compute_distances();

  std::string scene_id_;
  bool unseen_ = false;
  int views_ = 0;
  int feature_dim_ = 0;
  std::vector<double> style_;
  std::vector<Viewpoint> nodes_;
  std::vector<std::vector<Edge>> adjacency_;
  std::vector<std::vector<int>> sector_neighbor_;
  std::vector<double> distances_;  // all pairs, row-major
  double mean_edge_length_ = 0.0;
};

struct World {
  WorldConfig config;
  std::uint64_t seed = 0;
  num::Tensor landmark_signatures;  // num_landmarks x feature_dim
  std::vector<EnvironmentGraph> scenes;

  const EnvironmentGraph& scene(const std::string& scene_id) const;
  int scene_index(const std::string& scene_id) const;
};

/// Deterministic in (config, seed). Seen scenes come first, then unseen ones.
World build_world(const WorldConfig& config, std::uint64_t seed);

/// Sector index of the direction from (x0,y0) to (x1,y1) in a fixed world frame.
int direction_sector(double x0, double y0, double x1, double y1, int views);

Observation observe(const EnvironmentGraph& graph, int node);

/// Sector of the shortest-path next hop towards `target`, or the STOP action
/// (== graph.views()) when already there. Ties go to the lowest sector.
int teacher_action(const EnvironmentGraph& graph, int current, int target);

/// Node sequence produced by following teacher_action from start to target.
std::vector<int> teacher_path(const EnvironmentGraph& graph, int start, int target);

}  // namespace tvc::world
