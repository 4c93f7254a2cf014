#include "tvc/world/episodes.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace tvc::world {

namespace {

constexpr const char* kFunctionWords[] = {
    "walk", "go", "head", "toward", "to", "the", "then", "turn",
    "left", "right", "straight", "around", "and", "stop", "there",
};

constexpr const char* kLandmarks[] = {
    "sofa",    "table",   "door",     "stairs",  "window",   "lamp",     "plant",    "painting",
    "bed",     "sink",    "fridge",   "oven",    "piano",    "mirror",   "shelf",    "desk",
    "chair",   "rug",     "fireplace", "bathtub", "toilet",  "closet",   "counter",  "statue",
    "clock",   "tv",      "bench",    "fountain", "column",  "archway",  "vase",     "cabinet",
    "hallway", "balcony", "dresser",  "curtain", "railing",  "pillar",   "aquarium", "bookcase",
};

double heading(const EnvironmentGraph& g, int a, int b) {
  const auto& na = g.node(a);
  const auto& nb = g.node(b);
  return std::atan2(nb.y - na.y, nb.x - na.x);
}

}  // namespace

std::string_view split_name(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kValSeen: return "val_seen";
    case Split::kValUnseen: return "val_unseen";
  }
  return "?";
}

Split parse_split(std::string_view name) {
  if (name == "train") return Split::kTrain;
  if (name == "val_seen") return Split::kValSeen;
  if (name == "val_unseen") return Split::kValUnseen;
  throw InvalidConfig("unknown split '" + std::string(name) + "'");
}

Vocabulary::Vocabulary() {
  for (const char* w : kFunctionWords) words_.emplace_back(w);
  first_landmark_ = static_cast<int>(words_.size());
  for (const char* w : kLandmarks) words_.emplace_back(w);
}

const Vocabulary& Vocabulary::instance() {
  static const Vocabulary vocab;
  return vocab;
}

int Vocabulary::landmark_token(int landmark) const {
  if (landmark < 0 || landmark >= landmark_count()) {
    throw WorldError("landmark " + std::to_string(landmark) + " outside vocabulary");
  }
  return first_landmark_ + landmark;
}

int Vocabulary::landmark_of(int token) const {
  return token >= first_landmark_ && token < size() ? token - first_landmark_ : -1;
}

int Vocabulary::id(std::string_view word) const {
  for (std::size_t i = 0; i < words_.size(); ++i) {
    if (words_[i] == word) return static_cast<int>(i);
  }
  throw WorldError("word '" + std::string(word) + "' not in vocabulary");
}

const std::string& Vocabulary::word(int token) const {
  if (token < 0 || token >= size()) throw WorldError("token " + std::to_string(token) + " out of range");
  return words_[static_cast<std::size_t>(token)];
}

std::string Vocabulary::render(std::span<const int> tokens) const {
  std::string out;
  for (int t : tokens) {
    if (!out.empty()) out.push_back(' ');
    out += word(t);
  }
  return out;
}

std::string_view turn_word(const EnvironmentGraph& graph, int from, int via, int to) {
  double delta = heading(graph, via, to) - heading(graph, from, via);
  while (delta > std::numbers::pi) delta -= 2.0 * std::numbers::pi;
  while (delta <= -std::numbers::pi) delta += 2.0 * std::numbers::pi;
  const double quarter = std::numbers::pi / 4.0;
  if (std::abs(delta) < quarter) return "straight";
  if (delta >= quarter && delta < 3.0 * quarter) return "left";
  if (delta <= -quarter && delta > -3.0 * quarter) return "right";
  return "around";
}

std::vector<int> make_instruction(const EnvironmentGraph& graph, std::span<const int> path, Rng& rng) {
  if (path.size() < 2) throw InvalidConfig("instruction needs a path with at least one hop");
  const auto& vocab = Vocabulary::instance();
  auto lm = [&](int node) { return vocab.landmark_token(graph.node(node).landmark); };
  static constexpr const char* kVerbs[] = {"walk", "go", "head"};
  std::vector<int> tokens;
  tokens.push_back(vocab.id(kVerbs[rng.below(3)]));
  tokens.push_back(vocab.id("toward"));
  tokens.push_back(vocab.id("the"));
  tokens.push_back(lm(path[1]));
  for (std::size_t j = 1; j + 1 < path.size(); ++j) {
    tokens.push_back(vocab.id("then"));
    const auto turn = turn_word(graph, path[j - 1], path[j], path[j + 1]);
    tokens.push_back(vocab.id(turn == "straight" ? "go" : "turn"));
    tokens.push_back(vocab.id(turn));
    tokens.push_back(vocab.id("to"));
    tokens.push_back(vocab.id("the"));
    tokens.push_back(lm(path[j + 1]));
  }
  tokens.push_back(vocab.id("and"));
  tokens.push_back(vocab.id("stop"));
  tokens.push_back(vocab.id("there"));
  return tokens;
}

std::vector<Episode> generate_episodes(std::span<const EnvironmentGraph* const> graphs, int per_scene,
                                       Split split, std::uint64_t seed, const EpisodeConfig& config,
                                       const std::set<std::tuple<std::string, int, int>>& exclude) {
  if (per_scene < 1) throw InvalidConfig("per_scene must be >= 1");
  if (config.min_hops < 1 || config.max_hops < config.min_hops) throw InvalidConfig("invalid hop range");
  std::vector<Episode> episodes;
  const auto split_tag = static_cast<std::uint64_t>(split) + 1;
  for (std::size_t gi = 0; gi < graphs.size(); ++gi) {
    const EnvironmentGraph& g = *graphs[gi];
    Rng rng(mix_seed({seed, static_cast<std::uint64_t>(Stream::kWorld), split_tag, hash_string(g.scene_id())}));
    std::set<std::pair<int, int>> used;
    for (int k = 0; k < per_scene; ++k) {
      bool placed = false;
      for (int attempt = 0; attempt < 5000 && !placed; ++attempt) {
        const int start = static_cast<int>(rng.below(static_cast<std::uint64_t>(g.size())));
        const int target = static_cast<int>(rng.below(static_cast<std::uint64_t>(g.size())));
        if (start == target || used.count({start, target}) ||
            exclude.count({g.scene_id(), start, target})) {
          continue;
        }
        auto path = teacher_path(g, start, target);
        const int hops = static_cast<int>(path.size()) - 1;
        if (hops < config.min_hops || hops > config.max_hops) continue;
        Episode ep;
        ep.episode_id = std::string(split_name(split)) + "_" + g.scene_id() + "_" + std::to_string(k);
        ep.scene_id = g.scene_id();
        ep.start = start;
        ep.target = target;
        ep.instruction = make_instruction(g, path, rng);
        ep.gt_path = std::move(path);
        ep.split = split;
        episodes.push_back(std::move(ep));
        used.insert({start, target});
        placed = true;
      }
      if (!placed) {
        throw InvalidConfig("scene " + g.scene_id() + " has too few start/target pairs in hop range");
      }
    }
  }
  return episodes;
}

EpisodeSets generate_standard_episodes(const World& world, const EpisodeCounts& counts,
                                       std::uint64_t seed, const EpisodeConfig& config) {
  std::vector<const EnvironmentGraph*> seen, unseen;
  for (const auto& g : world.scenes) (g.unseen() ? unseen : seen).push_back(&g);
  EpisodeSets sets;
  sets.train = generate_episodes(seen, counts.train_per_scene, Split::kTrain, seed, config);
  std::set<std::tuple<std::string, int, int>> taken;
  for (const auto& ep : sets.train) taken.insert({ep.scene_id, ep.start, ep.target});
  sets.val_seen = generate_episodes(seen, counts.val_seen_per_scene, Split::kValSeen, seed, config, taken);
  sets.val_unseen = generate_episodes(unseen, counts.val_unseen_per_scene, Split::kValUnseen, seed, config);
  return sets;
}

}  // namespace tvc::world
