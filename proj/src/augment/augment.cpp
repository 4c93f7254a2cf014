#include "tvc/augment/augment.hpp"

#include <bit>
#include <cmath>
#include <numeric>
#include <string>

namespace tvc::augment {

namespace {

void check_spec(const AugmentationSpec& spec) {
  if (!(spec.rate >= 0.0 && spec.rate < 1.0)) {
    throw InvalidSpec("augmentation rate must be in [0, 1), got " + std::to_string(spec.rate));
  }
}

std::uint64_t content_hash(const num::Tensor& t) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (double v : t.data) {
    h ^= std::bit_cast<std::uint64_t>(v);
    h *= 0x100000001b3ULL;
    h ^= h >> 29;
  }
  return h;
}

}  // namespace

std::string_view kind_name(Kind kind) {
  return kind == Kind::kViewDrop ? "view_drop" : "feature_dropout";
}

Kind parse_kind(std::string_view name) {
  if (name == "view_drop") return Kind::kViewDrop;
  if (name == "feature_dropout") return Kind::kFeatureDropout;
  throw InvalidSpec("unknown augmentation kind '" + std::string(name) + "'");
}

Pool default_pool() {
  return {{Kind::kViewDrop, 0.3, 0.5}, {Kind::kFeatureDropout, 0.1, 0.4}};
}

void validate_pool(const Pool& pool) {
  if (pool.empty()) throw EmptyPool("augmentation pool is empty");
  for (const auto& e : pool) {
    if (!(e.min_rate >= 0.0 && e.max_rate < 1.0 && e.min_rate <= e.max_rate)) {
      throw InvalidSpec("augmentation rate range must satisfy 0 <= min <= max < 1");
    }
  }
}

AugmentationSpec sample_augmentation(const Pool& pool, Rng& rng) {
  validate_pool(pool);
  const auto& entry = pool[static_cast<std::size_t>(rng.below(pool.size()))];
  AugmentationSpec spec;
  spec.kind = entry.kind;
  spec.rate = entry.min_rate == entry.max_rate ? entry.min_rate : rng.uniform(entry.min_rate, entry.max_rate);
  spec.seed = rng.next();
  return spec;
}

std::vector<double> augmentation_mask(const AugmentationSpec& spec, const world::Observation& obs) {
  check_spec(spec);
  const std::size_t views = obs.features.rows();
  const std::size_t dim = obs.features.cols();
  std::vector<double> mask(views * dim, 1.0);
  if (spec.rate == 0.0) return mask;
  if (spec.kind == Kind::kViewDrop) {
    Rng rng(mix_seed({spec.seed, 0x7669657764ULL}));
    auto dropped = static_cast<std::size_t>(std::llround(spec.rate * static_cast<double>(dim)));
    dropped = std::min(dropped, dim - 1);
    if (dropped == 0) return mask;
    std::vector<std::size_t> order(dim);
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = dim - 1; i > 0; --i) {
      std::swap(order[i], order[static_cast<std::size_t>(rng.below(i + 1))]);
    }
    const double keep_scale = static_cast<double>(dim) / static_cast<double>(dim - dropped);
    std::vector<double> column(dim, keep_scale);
    for (std::size_t i = 0; i < dropped; ++i) column[order[i]] = 0.0;
    for (std::size_t r = 0; r < views; ++r) {
      for (std::size_t c = 0; c < dim; ++c) mask[r * dim + c] = column[c];
    }
  } else {
    Rng rng(mix_seed({spec.seed, content_hash(obs.features)}));
    const double keep_scale = 1.0 / (1.0 - spec.rate);
    for (auto& m : mask) m = rng.uniform() < spec.rate ? 0.0 : keep_scale;
  }
  return mask;
}

world::Observation apply(const AugmentationSpec& spec, const world::Observation& obs) {
  const auto mask = augmentation_mask(spec, obs);
  world::Observation out = obs;
  for (std::size_t i = 0; i < mask.size(); ++i) out.features.data[i] *= mask[i];
  return out;
}

}  // namespace tvc::augment
