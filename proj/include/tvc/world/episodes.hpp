#pragma once

#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "tvc/util/rng.hpp"
#include "tvc/world/world.hpp"

namespace tvc::world {

enum class Split { kTrain, kValSeen, kValUnseen };

std::string_view split_name(Split split);
Split parse_split(std::string_view name);

/// Fixed instruction vocabulary: function words followed by landmark nouns.
class Vocabulary {
 public:
  static const Vocabulary& instance();

  int size() const { return static_cast<int>(words_.size()); }
  int landmark_count() const { return static_cast<int>(words_.size()) - first_landmark_; }
  int landmark_token(int landmark) const;
  /// Landmark index for a token id, or -1 for function words.
  int landmark_of(int token) const;
  int id(std::string_view word) const;
  const std::string& word(int token) const;
  std::string render(std::span<const int> tokens) const;

 private:
  Vocabulary();
  std::vector<std::string> words_;
  int first_landmark_ = 0;
};

struct Episode {
  std::string episode_id;
  std::string scene_id;
  std::vector<int> instruction;
  int start = -1;
  int target = -1;
  std::vector<int> gt_path;
  Split split = Split::kTrain;

  int hops() const { return static_cast<int>(gt_path.size()) - 1; }
};

struct EpisodeConfig {
  int min_hops = 4;
  int max_hops = 7;

  bool operator==(const EpisodeConfig&) const = default;
};

/// Relative turn word for consecutive hops: "left", "right", "straight" or "around".
std::string_view turn_word(const EnvironmentGraph& graph, int from, int via, int to);

/// Builds the templated instruction for a path (see docs/instructions.md).
std::vector<int> make_instruction(const EnvironmentGraph& graph, std::span<const int> path, Rng& rng);

/// Samples `per_scene` episodes in every graph. (scene_id, start, target)
/// triples listed in `exclude` are never produced.
std::vector<Episode> generate_episodes(
    std::span<const EnvironmentGraph* const> graphs, int per_scene, Split split, std::uint64_t seed,
    const EpisodeConfig& config = {},
    const std::set<std::tuple<std::string, int, int>>& exclude = {});

/// Standard split layout: train and val_seen over seen scenes, val_unseen over unseen ones.
struct EpisodeSets {
  std::vector<Episode> train;
  std::vector<Episode> val_seen;
  std::vector<Episode> val_unseen;
};

struct EpisodeCounts {
  int train_per_scene = 40;
  int val_seen_per_scene = 5;
  int val_unseen_per_scene = 20;

  bool operator==(const EpisodeCounts&) const = default;
};

EpisodeSets generate_standard_episodes(const World& world, const EpisodeCounts& counts,
                                       std::uint64_t seed, const EpisodeConfig& config = {});

}  // namespace tvc::world
