#include "tvc/world/serialize.hpp"

#include <algorithm>

namespace tvc::world {

using nlohmann::json;

namespace {

void check_format(const json& j, const char* format, int version) {
  if (!j.is_object() || j.value("format", "") != format) {
    throw WorldError(std::string("not a ") + format + " document");
  }
  if (j.at("version").get<int>() != version) {
    throw WorldError(std::string(format) + " version " + std::to_string(j.at("version").get<int>()) +
                     " is not supported");
  }
}

}  // namespace

json config_to_json(const WorldConfig& c) {
  return json{{"seen_scenes", c.seen_scenes},     {"unseen_scenes", c.unseen_scenes},
              {"min_nodes", c.min_nodes},         {"max_nodes", c.max_nodes},
              {"views", c.views},                 {"feature_dim", c.feature_dim},
              {"shift", c.shift},                 {"style_scale", c.style_scale},
              {"noise", c.noise},                 {"node_spacing", c.node_spacing},
              {"extra_edge_prob", c.extra_edge_prob}, {"num_landmarks", c.num_landmarks}};
}

WorldConfig config_from_json(const json& j) {
  WorldConfig c;
  const json defaults = config_to_json(c);
  for (const auto& [key, _] : j.items()) {
    if (!defaults.contains(key)) throw InvalidConfig("unknown world config key '" + key + "'");
  }
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  get("seen_scenes", c.seen_scenes);
  get("unseen_scenes", c.unseen_scenes);
  get("min_nodes", c.min_nodes);
  get("max_nodes", c.max_nodes);
  get("views", c.views);
  get("feature_dim", c.feature_dim);
  get("shift", c.shift);
  get("style_scale", c.style_scale);
  get("noise", c.noise);
  get("node_spacing", c.node_spacing);
  get("extra_edge_prob", c.extra_edge_prob);
  get("num_landmarks", c.num_landmarks);
  return c;
}

json world_to_json(const World& world) {
  json scenes = json::array();
  for (const auto& g : world.scenes) {
    json nodes = json::array();
    for (const auto& vp : g.nodes()) {
      nodes.push_back({{"id", vp.id},
                       {"x", vp.x},
                       {"y", vp.y},
                       {"landmark", vp.landmark},
                       {"landmark_tags", vp.landmark_tags},
                       {"view_features", vp.view_features.data}});
    }
    json edges = json::array();
    for (int v = 0; v < g.size(); ++v) {
      for (const Edge& e : g.edges(v)) {
        if (e.to > v) {
          int back = -1;
          for (const Edge& r : g.edges(e.to)) {
            if (r.to == v) back = r.sector;
          }
          edges.push_back({v, e.to, e.length, e.sector, back});
        }
      }
    }
    scenes.push_back({{"scene_id", g.scene_id()},
                      {"unseen", g.unseen()},
                      {"style", g.style()},
                      {"nodes", std::move(nodes)},
                      {"edges", std::move(edges)}});
  }
  return json{{"format", "tvc-world"},
              {"version", kWorldFormatVersion},
              {"seed", world.seed},
              {"config", config_to_json(world.config)},
              {"landmark_signatures", world.landmark_signatures.data},
              {"scenes", std::move(scenes)}};
}

World world_from_json(const json& j) {
  check_format(j, "tvc-world", kWorldFormatVersion);
  World world;
  world.seed = j.at("seed").get<std::uint64_t>();
  world.config = config_from_json(j.at("config"));
  world.config.validate();
  const auto views = static_cast<std::size_t>(world.config.views);
  const auto dim = static_cast<std::size_t>(world.config.feature_dim);
  world.landmark_signatures =
      num::Tensor({static_cast<std::size_t>(world.config.num_landmarks), dim},
                  j.at("landmark_signatures").get<std::vector<double>>());
  for (const auto& s : j.at("scenes")) {
    std::vector<Viewpoint> nodes;
    for (const auto& n : s.at("nodes")) {
      Viewpoint vp;
      vp.id = n.at("id").get<int>();
      vp.x = n.at("x").get<double>();
      vp.y = n.at("y").get<double>();
      vp.landmark = n.at("landmark").get<int>();
      vp.landmark_tags = n.at("landmark_tags").get<std::vector<int>>();
      vp.view_features = num::Tensor({views, dim}, n.at("view_features").get<std::vector<double>>());
      if (vp.id != static_cast<int>(nodes.size())) throw WorldError("node ids must be dense and ordered");
      nodes.push_back(std::move(vp));
    }
    std::vector<std::vector<Edge>> adjacency(nodes.size());
    for (const auto& e : s.at("edges")) {
      const int a = e.at(0).get<int>(), b = e.at(1).get<int>();
      const double len = e.at(2).get<double>();
      if (a < 0 || b < 0 || a >= static_cast<int>(nodes.size()) || b >= static_cast<int>(nodes.size())) {
        throw WorldError("edge references unknown node");
      }
      adjacency[static_cast<std::size_t>(a)].push_back({b, len, e.at(3).get<int>()});
      adjacency[static_cast<std::size_t>(b)].push_back({a, len, e.at(4).get<int>()});
    }
    for (auto& edges : adjacency) {
      std::sort(edges.begin(), edges.end(), [](const Edge& l, const Edge& r) { return l.sector < r.sector; });
    }
    world.scenes.emplace_back(s.at("scene_id").get<std::string>(), s.at("unseen").get<bool>(),
                              world.config.views, world.config.feature_dim,
                              s.at("style").get<std::vector<double>>(), std::move(nodes),
                              std::move(adjacency));
  }
  return world;
}

json episodes_to_json(const std::vector<Episode>& episodes) {
  const auto& vocab = Vocabulary::instance();
  json list = json::array();
  for (const auto& ep : episodes) {
    list.push_back({{"episode_id", ep.episode_id},
                    {"scene_id", ep.scene_id},
                    {"split", split_name(ep.split)},
                    {"start", ep.start},
                    {"target", ep.target},
                    {"gt_path", ep.gt_path},
                    {"instruction", ep.instruction},
                    {"text", vocab.render(ep.instruction)}});
  }
  return json{{"format", "tvc-episodes"}, {"version", kEpisodeFormatVersion}, {"episodes", std::move(list)}};
}

std::vector<Episode> episodes_from_json(const json& j) {
  check_format(j, "tvc-episodes", kEpisodeFormatVersion);
  std::vector<Episode> out;
  for (const auto& e : j.at("episodes")) {
    Episode ep;
    ep.episode_id = e.at("episode_id").get<std::string>();
    ep.scene_id = e.at("scene_id").get<std::string>();
    ep.split = parse_split(e.at("split").get<std::string>());
    ep.start = e.at("start").get<int>();
    ep.target = e.at("target").get<int>();
    ep.gt_path = e.at("gt_path").get<std::vector<int>>();
    ep.instruction = e.at("instruction").get<std::vector<int>>();
    out.push_back(std::move(ep));
  }
  return out;
}

}  // namespace tvc::world
