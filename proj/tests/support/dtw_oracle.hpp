#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <span>

#include "tvc/world/world.hpp"

namespace tvc::testing {

/// Minimum alignment cost over every monotone warping path, enumerated
/// explicitly (no dynamic programming table).
inline double brute_force_dtw(const world::EnvironmentGraph& g, std::span<const int> a, std::span<const int> b) {
  double best = std::numeric_limits<double>::infinity();
  std::function<void(std::size_t, std::size_t, double)> walk = [&](std::size_t i, std::size_t j, double acc) {
    acc += g.geodesic(a[i], b[j]);
    if (i + 1 == a.size() && j + 1 == b.size()) {
      best = std::min(best, acc);
      return;
    }
    if (i + 1 < a.size()) walk(i + 1, j, acc);
    if (j + 1 < b.size()) walk(i, j + 1, acc);
    if (i + 1 < a.size() && j + 1 < b.size()) walk(i + 1, j + 1, acc);
  };
  walk(0, 0, 0.0);
  return best;
}

inline double brute_force_ndtw(const world::EnvironmentGraph& g, std::span<const int> a, std::span<const int> b,
                               double d_th) {
  return std::exp(-brute_force_dtw(g, a, b) / (static_cast<double>(b.size()) * d_th));
}

}  // namespace tvc::testing
