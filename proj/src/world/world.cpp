#include "tvc/world/world.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <queue>

#include "tvc/util/rng.hpp"

namespace tvc::world {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kTieTolerance = 1e-9;

struct Dsu {
  std::vector<int> parent;
  explicit Dsu(int n) : parent(static_cast<std::size_t>(n)) {
    std::iota(parent.begin(), parent.end(), 0);
  }
  int find(int x) {
    while (parent[static_cast<std::size_t>(x)] != x) {
      parent[static_cast<std::size_t>(x)] =
          parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
      x = parent[static_cast<std::size_t>(x)];
    }
    return x;
  }
  bool unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent[static_cast<std::size_t>(b)] = a;
    return true;
  }
};

struct Layout {
  std::vector<double> xs, ys;
  std::vector<std::vector<Edge>> adjacency;
};

// Random planar-ish layout. Edges are admitted shortest-first subject to the
// one-neighbor-per-sector rule; returns false when the result violates
// connectivity or the degree bounds.
bool try_layout(Rng& rng, int n, int views, double spacing, double extra_p, Layout& out) {
  const double side = spacing * std::sqrt(static_cast<double>(n)) * 1.1;
  const double min_dist = 0.6 * spacing;
  out.xs.clear();
  out.ys.clear();
  int guard = 0;
  while (static_cast<int>(out.xs.size()) < n) {
    if (++guard > 20000) return false;
    const double x = rng.uniform(0.0, side);
    const double y = rng.uniform(0.0, side);
    bool ok = true;
    for (std::size_t i = 0; i < out.xs.size() && ok; ++i) {
      ok = std::hypot(out.xs[i] - x, out.ys[i] - y) >= min_dist;
    }
    if (ok) {
      out.xs.push_back(x);
      out.ys.push_back(y);
    }
  }

  struct Candidate {
    double length;
    int a, b;
  };
  std::vector<Candidate> candidates;
  const double radius = 1.9 * spacing;
  for (int a = 0; a < n; ++a) {
    for (int b = a + 1; b < n; ++b) {
      const double len = std::hypot(out.xs[static_cast<std::size_t>(a)] - out.xs[static_cast<std::size_t>(b)],
                                    out.ys[static_cast<std::size_t>(a)] - out.ys[static_cast<std::size_t>(b)]);
      if (len <= radius) candidates.push_back({len, a, b});
    }
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const Candidate& l, const Candidate& r) { return l.length < r.length; });

  std::vector<std::vector<int>> occupied(static_cast<std::size_t>(n), std::vector<int>(static_cast<std::size_t>(views), -1));
  out.adjacency.assign(static_cast<std::size_t>(n), {});
  std::vector<std::vector<char>> linked(static_cast<std::size_t>(n), std::vector<char>(static_cast<std::size_t>(n), 0));
  Dsu dsu(n);

  auto sectors_of = [&](int a, int b) {
    const auto ia = static_cast<std::size_t>(a), ib = static_cast<std::size_t>(b);
    return std::pair{direction_sector(out.xs[ia], out.ys[ia], out.xs[ib], out.ys[ib], views),
                     direction_sector(out.xs[ib], out.ys[ib], out.xs[ia], out.ys[ia], views)};
  };
  auto can_link = [&](const Candidate& c) {
    if (linked[static_cast<std::size_t>(c.a)][static_cast<std::size_t>(c.b)]) return false;
    auto [sa, sb] = sectors_of(c.a, c.b);
    return occupied[static_cast<std::size_t>(c.a)][static_cast<std::size_t>(sa)] < 0 &&
           occupied[static_cast<std::size_t>(c.b)][static_cast<std::size_t>(sb)] < 0;
  };
  auto link = [&](const Candidate& c) {
    auto [sa, sb] = sectors_of(c.a, c.b);
    occupied[static_cast<std::size_t>(c.a)][static_cast<std::size_t>(sa)] = c.b;
    occupied[static_cast<std::size_t>(c.b)][static_cast<std::size_t>(sb)] = c.a;
    linked[static_cast<std::size_t>(c.a)][static_cast<std::size_t>(c.b)] = 1;
    linked[static_cast<std::size_t>(c.b)][static_cast<std::size_t>(c.a)] = 1;
    out.adjacency[static_cast<std::size_t>(c.a)].push_back({c.b, c.length, sa});
    out.adjacency[static_cast<std::size_t>(c.b)].push_back({c.a, c.length, sb});
    dsu.unite(c.a, c.b);
  };

  for (const auto& c : candidates) {
    if (dsu.find(c.a) != dsu.find(c.b) && can_link(c)) link(c);
  }
  for (int v = 0; v < n; ++v) {
    for (const auto& c : candidates) {
      if (out.adjacency[static_cast<std::size_t>(v)].size() >= 2) break;
      if ((c.a == v || c.b == v) && can_link(c)) link(c);
    }
  }
  for (const auto& c : candidates) {
    const bool draw = rng.bernoulli(extra_p);
    if (draw && can_link(c)) link(c);
  }

  const int root = dsu.find(0);
  for (int v = 0; v < n; ++v) {
    const auto deg = out.adjacency[static_cast<std::size_t>(v)].size();
    if (dsu.find(v) != root || deg < 2 || deg > static_cast<std::size_t>(views)) return false;
  }
  for (auto& edges : out.adjacency) {
    std::sort(edges.begin(), edges.end(), [](const Edge& l, const Edge& r) { return l.sector < r.sector; });
  }
  return true;
}

// Greedy distance-2 colouring so the neighbors of any node carry distinct landmarks.
std::vector<int> assign_landmarks(Rng& rng, const std::vector<std::vector<Edge>>& adjacency,
                                  int num_landmarks) {
  const int n = static_cast<int>(adjacency.size());
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  for (int i = n - 1; i > 0; --i) {
    const auto j = static_cast<int>(rng.below(static_cast<std::uint64_t>(i + 1)));
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
  }
  std::vector<int> landmark(static_cast<std::size_t>(n), -1);
  std::vector<int> usage(static_cast<std::size_t>(num_landmarks), 0);
  for (int v : order) {
    std::vector<int> conflicts(static_cast<std::size_t>(num_landmarks), 0);
    for (const Edge& e : adjacency[static_cast<std::size_t>(v)]) {
      if (int l = landmark[static_cast<std::size_t>(e.to)]; l >= 0) conflicts[static_cast<std::size_t>(l)] += 1;
      for (const Edge& e2 : adjacency[static_cast<std::size_t>(e.to)]) {
        if (e2.to == v) continue;
        if (int l = landmark[static_cast<std::size_t>(e2.to)]; l >= 0) conflicts[static_cast<std::size_t>(l)] += 1;
      }
    }
    int best_conflict = std::numeric_limits<int>::max();
    std::vector<int> best;
    for (int l = 0; l < num_landmarks; ++l) {
      const int c = conflicts[static_cast<std::size_t>(l)] * 1000 + usage[static_cast<std::size_t>(l)];
      if (c < best_conflict) {
        best_conflict = c;
        best.assign(1, l);
      } else if (c == best_conflict) {
        best.push_back(l);
      }
    }
    const int pick = best[static_cast<std::size_t>(rng.below(best.size()))];
    landmark[static_cast<std::size_t>(v)] = pick;
    usage[static_cast<std::size_t>(pick)] += 1;
  }
  return landmark;
}

EnvironmentGraph make_scene(const WorldConfig& cfg, const num::Tensor& signatures,
                            const std::vector<double>& unseen_offset, std::uint64_t seed,
                            int index, bool unseen) {
  Rng rng = Rng::derive(seed, Stream::kWorld, static_cast<std::uint64_t>(1000 + index));
  const int n = rng.uniform_int(cfg.min_nodes, cfg.max_nodes);
  Layout layout;
  int attempts = 0;
  while (!try_layout(rng, n, cfg.views, cfg.node_spacing, cfg.extra_edge_prob, layout)) {
    if (++attempts >= 500) {
      throw InvalidConfig("could not generate a connected scene with " + std::to_string(n) +
                          " nodes and " + std::to_string(cfg.views) + " sectors");
    }
  }
  const auto landmarks = assign_landmarks(rng, layout.adjacency, cfg.num_landmarks);

  const auto d = static_cast<std::size_t>(cfg.feature_dim);
  std::vector<double> style(d);
  for (std::size_t j = 0; j < d; ++j) {
    style[j] = rng.normal(0.0, cfg.style_scale) + (unseen ? unseen_offset[j] : 0.0);
  }

  std::vector<Viewpoint> nodes(static_cast<std::size_t>(n));
  for (int v = 0; v < n; ++v) {
    auto& vp = nodes[static_cast<std::size_t>(v)];
    vp.id = v;
    vp.x = layout.xs[static_cast<std::size_t>(v)];
    vp.y = layout.ys[static_cast<std::size_t>(v)];
    vp.landmark = landmarks[static_cast<std::size_t>(v)];
    vp.landmark_tags.assign(static_cast<std::size_t>(cfg.views), -1);
    for (const Edge& e : layout.adjacency[static_cast<std::size_t>(v)]) {
      vp.landmark_tags[static_cast<std::size_t>(e.sector)] = landmarks[static_cast<std::size_t>(e.to)];
    }
    vp.view_features = num::Tensor({static_cast<std::size_t>(cfg.views), d});
    for (int s = 0; s < cfg.views; ++s) {
      const int tag = vp.landmark_tags[static_cast<std::size_t>(s)];
      auto row = vp.view_features.row(static_cast<std::size_t>(s));
      for (std::size_t j = 0; j < d; ++j) {
        double value = style[j] + rng.normal(0.0, cfg.noise);
        if (tag >= 0) value += signatures.at(static_cast<std::size_t>(tag), j);
        row[j] = value;
      }
    }
  }
  const std::string prefix = unseen ? "unseen_" : "seen_";
  return EnvironmentGraph(prefix + std::to_string(index), unseen, cfg.views, cfg.feature_dim,
                          std::move(style), std::move(nodes), std::move(layout.adjacency));
}

}  // namespace

void WorldConfig::validate() const {
  if (seen_scenes <= 0 || unseen_scenes <= 0) throw InvalidConfig("scene counts must be positive");
  if (min_nodes <= 0 || max_nodes < min_nodes) throw InvalidConfig("invalid node count range");
  if (min_nodes < 3) throw InvalidConfig("scenes need at least 3 nodes");
  if (views < 4) throw InvalidConfig("views must be >= 4");
  if (feature_dim < 8) throw InvalidConfig("feature_dim must be >= 8");
  if (shift < 0.0 || style_scale < 0.0 || noise < 0.0) throw InvalidConfig("negative scale");
  if (node_spacing <= 0.0) throw InvalidConfig("node_spacing must be positive");
  if (extra_edge_prob < 0.0 || extra_edge_prob > 1.0) throw InvalidConfig("extra_edge_prob outside [0,1]");
  if (num_landmarks < 2) throw InvalidConfig("num_landmarks must be >= 2");
}

int direction_sector(double x0, double y0, double x1, double y1, int views) {
  double angle = std::atan2(y1 - y0, x1 - x0);
  if (angle < 0.0) angle += 2.0 * std::numbers::pi;
  const double width = 2.0 * std::numbers::pi / views;
  int s = static_cast<int>(std::floor(angle / width));
  return std::clamp(s, 0, views - 1);
}

EnvironmentGraph::EnvironmentGraph(std::string scene_id, bool unseen, int views, int feature_dim,
                                   std::vector<double> style, std::vector<Viewpoint> nodes,
                                   std::vector<std::vector<Edge>> adjacency)
    : scene_id_(std::move(scene_id)),
      unseen_(unseen),
      views_(views),
      feature_dim_(feature_dim),
      style_(std::move(style)),
      nodes_(std::move(nodes)),
      adjacency_(std::move(adjacency)) {
  if (adjacency_.size() != nodes_.size()) throw WorldError("adjacency size differs from node count");
  sector_neighbor_.assign(nodes_.size(), std::vector<int>(static_cast<std::size_t>(views_), -1));
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t v = 0; v < adjacency_.size(); ++v) {
    for (const Edge& e : adjacency_[v]) {
      if (e.sector < 0 || e.sector >= views_) throw WorldError("edge sector out of range");
      if (sector_neighbor_[v][static_cast<std::size_t>(e.sector)] >= 0) {
        throw WorldError("two neighbors share a sector in " + scene_id_);
      }
      sector_neighbor_[v][static_cast<std::size_t>(e.sector)] = e.to;
      total += e.length;
      ++count;
    }
  }
  mean_edge_length_ = count ? total / static_cast<double>(count) : 0.0;
  compute_distances();
}

void EnvironmentGraph::check_node(int id) const {
  if (id < 0 || id >= size()) {
    throw UnknownNode("node " + std::to_string(id) + " not in scene " + scene_id_);
  }
}

const Viewpoint& EnvironmentGraph::node(int id) const {
  check_node(id);
  return nodes_[static_cast<std::size_t>(id)];
}

const std::vector<Edge>& EnvironmentGraph::edges(int id) const {
  check_node(id);
  return adjacency_[static_cast<std::size_t>(id)];
}

int EnvironmentGraph::neighbor_in_sector(int node, int sector) const {
  check_node(node);
  if (sector < 0 || sector >= views_) return -1;
  return sector_neighbor_[static_cast<std::size_t>(node)][static_cast<std::size_t>(sector)];
}

double EnvironmentGraph::edge_length(int a, int b) const {
  for (const Edge& e : edges(a)) {
    if (e.to == b) return e.length;
  }
  throw WorldError("nodes " + std::to_string(a) + " and " + std::to_string(b) + " are not adjacent");
}

bool EnvironmentGraph::adjacent(int a, int b) const {
  for (const Edge& e : edges(a)) {
    if (e.to == b) return true;
  }
  return false;
}

double EnvironmentGraph::geodesic(int a, int b) const {
  check_node(a);
  check_node(b);
  return distances_[static_cast<std::size_t>(a) * nodes_.size() + static_cast<std::size_t>(b)];
}

bool EnvironmentGraph::connected() const {
  for (double d : distances_) {
    if (!std::isfinite(d)) return false;
  }
  return true;
}

void EnvironmentGraph::compute_distances() {
  const std::size_t n = nodes_.size();
  distances_.assign(n * n, kInf);
  using Item = std::pair<double, int>;
  for (std::size_t src = 0; src < n; ++src) {
    double* dist = &distances_[src * n];
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    dist[src] = 0.0;
    pq.emplace(0.0, static_cast<int>(src));
    while (!pq.empty()) {
      auto [d, v] = pq.top();
      pq.pop();
      if (d > dist[v]) continue;
      for (const Edge& e : adjacency_[static_cast<std::size_t>(v)]) {
        const double nd = d + e.length;
        if (nd < dist[e.to]) {
          dist[e.to] = nd;
          pq.emplace(nd, e.to);
        }
      }
    }
  }
}

const EnvironmentGraph& World::scene(const std::string& scene_id) const {
  return scenes[static_cast<std::size_t>(scene_index(scene_id))];
}

int World::scene_index(const std::string& scene_id) const {
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    if (scenes[i].scene_id() == scene_id) return static_cast<int>(i);
  }
  throw WorldError("unknown scene " + scene_id);
}

World build_world(const WorldConfig& config, std::uint64_t seed) {
  config.validate();
  World world;
  world.config = config;
  world.seed = seed;
  Rng rng = Rng::derive(seed, Stream::kWorld, 0);
  const auto d = static_cast<std::size_t>(config.feature_dim);
  world.landmark_signatures = num::Tensor({static_cast<std::size_t>(config.num_landmarks), d});
  for (auto& v : world.landmark_signatures.data) v = rng.normal();
  std::vector<double> offset(d);
  for (auto& v : offset) v = (rng.bernoulli(0.5) ? 1.0 : -1.0) * config.shift;

  for (int i = 0; i < config.seen_scenes; ++i) {
    world.scenes.push_back(make_scene(config, world.landmark_signatures, offset, seed, i, false));
  }
  for (int i = 0; i < config.unseen_scenes; ++i) {
    world.scenes.push_back(make_scene(config, world.landmark_signatures, offset, seed,
                                      config.seen_scenes + i, true));
  }
  return world;
}

Observation observe(const EnvironmentGraph& graph, int node) {
  const Viewpoint& vp = graph.node(node);
  Observation obs;
  obs.features = vp.view_features;
  obs.navigable.assign(static_cast<std::size_t>(graph.views()), 0);
  for (const Edge& e : graph.edges(node)) obs.navigable[static_cast<std::size_t>(e.sector)] = 1;
  return obs;
}

int teacher_action(const EnvironmentGraph& graph, int current, int target) {
  graph.check_node(current);
  graph.check_node(target);
  if (current == target) return graph.stop_action();
  int best_sector = -1;
  double best = kInf;
  for (int s = 0; s < graph.views(); ++s) {
    const int nb = graph.neighbor_in_sector(current, s);
    if (nb < 0) continue;
    const double cost = graph.edge_length(current, nb) + graph.geodesic(nb, target);
    if (cost < best - kTieTolerance) {
      best = cost;
      best_sector = s;
    }
  }
  if (best_sector < 0 || !std::isfinite(best)) throw WorldError("target unreachable");
  return best_sector;
}

std::vector<int> teacher_path(const EnvironmentGraph& graph, int start, int target) {
  std::vector<int> path{start};
  int cur = start;
  while (cur != target) {
    const int a = teacher_action(graph, cur, target);
    cur = graph.neighbor_in_sector(cur, a);
    path.push_back(cur);
    if (static_cast<int>(path.size()) > graph.size()) throw WorldError("teacher path cycles");
  }
  return path;
}

}  // namespace tvc::world
