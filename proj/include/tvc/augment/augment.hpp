#pragma once

#include <cstdint>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "tvc/util/rng.hpp"
#include "tvc/world/world.hpp"

namespace tvc::augment {

class EmptyPool : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidSpec : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Kind { kViewDrop, kFeatureDropout };

std::string_view kind_name(Kind kind);
Kind parse_kind(std::string_view name);

struct AugmentationSpec {
  Kind kind = Kind::kFeatureDropout;
  double rate = 0.0;  // in [0, 1)
  std::uint64_t seed = 0;

  bool operator==(const AugmentationSpec&) const = default;
};

struct PoolEntry {
  Kind kind;
  double min_rate;
  double max_rate;

  bool operator==(const PoolEntry&) const = default;
};

using Pool = std::vector<PoolEntry>;

/// view_drop rate in [0.3, 0.5], feature_dropout rate in [0.1, 0.4].
Pool default_pool();
void validate_pool(const Pool& pool);

/// Uniform over kinds, uniform rate inside the kind's range, fresh seed.
AugmentationSpec sample_augmentation(const Pool& pool, Rng& rng);

/// view_drop: round(rate * D) feature dimensions, chosen from the augmentation seed
/// only, are zeroed in every sector; survivors are scaled by D / (D - dropped).
/// feature_dropout: elements are zeroed independently with probability rate
/// and survivors scaled by 1 / (1 - rate); the mask depends on the augmentation and
/// the observation contents. The navigability mask is never touched.
world::Observation apply(const AugmentationSpec& spec, const world::Observation& obs);

/// Multiplicative mask (views x feature_dim, row-major) that apply() uses.
std::vector<double> augmentation_mask(const AugmentationSpec& spec, const world::Observation& obs);

}  // namespace tvc::augment
