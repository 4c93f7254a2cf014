#pragma once

#include <functional>
#include <limits>
#include <vector>

#include "tvc/world/world.hpp"

namespace tvc::testing {

/// Exhaustive simple-path enumeration. Returns, for each neighbor of `from`,
/// the shortest total length of a simple path from -> neighbor -> ... -> to.
inline std::vector<double> best_length_via_neighbor(const world::EnvironmentGraph& g, int from, int to) {
  const auto& first = g.edges(from);
  std::vector<double> best(first.size(), std::numeric_limits<double>::infinity());
  std::vector<char> visited(static_cast<std::size_t>(g.size()), 0);
  std::function<void(int, double, std::size_t)> dfs = [&](int node, double len, std::size_t slot) {
    if (len >= best[slot]) return;
    if (node == to) {
      best[slot] = len;
      return;
    }
    for (const auto& e : g.edges(node)) {
      if (visited[static_cast<std::size_t>(e.to)]) continue;
      visited[static_cast<std::size_t>(e.to)] = 1;
      dfs(e.to, len + e.length, slot);
      visited[static_cast<std::size_t>(e.to)] = 0;
    }
  };
  visited[static_cast<std::size_t>(from)] = 1;
  for (std::size_t i = 0; i < first.size(); ++i) {
    visited[static_cast<std::size_t>(first[i].to)] = 1;
    dfs(first[i].to, first[i].length, i);
    visited[static_cast<std::size_t>(first[i].to)] = 0;
  }
  return best;
}

inline double brute_force_shortest(const world::EnvironmentGraph& g, int from, int to) {
  if (from == to) return 0.0;
  double best = std::numeric_limits<double>::infinity();
  for (double v : best_length_via_neighbor(g, from, to)) best = std::min(best, v);
  return best;
}

}  // namespace tvc::testing
