#include "tvc/trainer/config.hpp"

#include <sstream>

#include "tvc/util/hash.hpp"
#include "tvc/world/serialize.hpp"

namespace tvc::trainer {

using nlohmann::json;

namespace {

// Reads `obj` key by key so that unknown keys can be reported with their path.
class Reader {
 public:
  Reader(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw ConfigError("config field '" + path_ + "' must be an object");
    for (const auto& [k, v] : obj_.items()) pending_.push_back(k);
  }

  template <typename T>
  void get(const char* key, T& out) {
    auto it = obj_.find(key);
    if (it == obj_.end()) return;
    consume(key);
    try {
      out = it->template get<T>();
    } catch (const json::exception&) {
      throw ConfigError("config field '" + full(key) + "' has the wrong type");
    }
  }

  const json* child(const char* key) {
    auto it = obj_.find(key);
    if (it == obj_.end()) return nullptr;
    consume(key);
    return &*it;
  }

  void require(const char* key) const {
    if (!obj_.contains(key)) throw ConfigError("missing required config field '" + full(key) + "'");
  }

  void finish() const {
    if (!pending_.empty()) throw ConfigError("unknown config field '" + full(pending_.front().c_str()) + "'");
  }

  std::string full(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  void consume(const char* key) { std::erase(pending_, std::string(key)); }

  const json& obj_;
  std::string path_;
  std::vector<std::string> pending_;
};

json pool_to_json(const augment::Pool& pool) {
  json arr = json::array();
  for (const auto& e : pool) {
    arr.push_back({{"kind", augment::kind_name(e.kind)}, {"min_rate", e.min_rate}, {"max_rate", e.max_rate}});
  }
  return arr;
}

augment::Pool pool_from_json(const json& arr) {
  if (!arr.is_array()) throw ConfigError("config field 'augment' must be an array");
  augment::Pool pool;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    Reader r(arr[i], "augment[" + std::to_string(i) + "]");
    std::string kind;
    augment::PoolEntry e{augment::Kind::kFeatureDropout, 0.0, 0.0};
    r.require("kind");
    r.get("kind", kind);
    r.get("min_rate", e.min_rate);
    r.get("max_rate", e.max_rate);
    r.finish();
    try {
      e.kind = augment::parse_kind(kind);
    } catch (const augment::InvalidSpec& ex) {
      throw ConfigError("config field 'augment[" + std::to_string(i) + "].kind': " + ex.what());
    }
    pool.push_back(e);
  }
  return pool;
}

json model_part(const json& full) {
  json j = full;
  j.erase("tta");
  return j;
}

}  // namespace

agent::AgentConfig RunConfig::resolved_agent() const {
  agent::AgentConfig a = agent;
  a.views = world.views;
  a.feature_dim = world.feature_dim;
  a.vocab_size = world::Vocabulary::instance().size();
  return a;
}

void RunConfig::validate() const {
  try {
    world.validate();
    resolved_agent().validate();
    loss.validate();
    augment::validate_pool(pool);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  if (!switches.any()) throw ConfigError("at least one of ml, cl_il, cl_rl must be switched on");
  if (train.iterations < 0) throw ConfigError("train.iterations must be >= 0");
  if (train.batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (!(train.learning_rate > 0.0)) throw ConfigError("train.learning_rate must be positive");
  if (!(train.grad_clip > 0.0)) throw ConfigError("train.grad_clip must be positive");
  if (train.replay_capacity < 1 || train.replay_batch < 1) throw ConfigError("replay sizes must be >= 1");
  if (train.eval_every < 0 || train.eval_episodes < 1) throw ConfigError("invalid validation cadence");
  if (train.checkpoint_every < 0) throw ConfigError("train.checkpoint_every must be >= 0");
  if (tta.iterations < 0) throw ConfigError("tta.iterations must be >= 0");
  if (tta.views < 1) throw ConfigError("tta.views must be >= 1");
  if (!(tta.learning_rate > 0.0)) throw ConfigError("tta.learning_rate must be positive");
  if (episodes.train_per_scene < 1 || episodes.val_seen_per_scene < 1 || episodes.val_unseen_per_scene < 1) {
    throw ConfigError("episode counts must be >= 1");
  }
  if (hops.min_hops < 1 || hops.max_hops < hops.min_hops) throw ConfigError("invalid hop range");
  if (hops.max_hops + 1 > agent.max_steps) throw ConfigError("agent.max_steps must exceed episodes.max_hops");
}

json config_to_json(const RunConfig& c) {
  json agent = agent::agent_config_to_json(c.agent);
  agent.erase("views");
  agent.erase("feature_dim");
  agent.erase("vocab_size");
  return {
      {"version", kConfigVersion},
      {"seed", c.seed},
      {"world_seed", c.world_seed},
      {"world", world::config_to_json(c.world)},
      {"episodes",
       {{"train_per_scene", c.episodes.train_per_scene},
        {"val_seen_per_scene", c.episodes.val_seen_per_scene},
        {"val_unseen_per_scene", c.episodes.val_unseen_per_scene},
        {"min_hops", c.hops.min_hops},
        {"max_hops", c.hops.max_hops}}},
      {"agent", agent},
      {"loss",
       {{"lambda_ml", c.loss.lambda_ml},
        {"lambda_rl", c.loss.lambda_rl},
        {"lambda_cl_il", c.loss.lambda_cl_il},
        {"lambda_cl_rl", c.loss.lambda_cl_rl},
        {"alpha", c.loss.alpha},
        {"gamma", c.loss.gamma}}},
      {"switches", {{"ml", c.switches.ml}, {"cl_il", c.switches.cl_il}, {"cl_rl", c.switches.cl_rl}}},
      {"train",
       {{"iterations", c.train.iterations},
        {"batch_size", c.train.batch_size},
        {"learning_rate", c.train.learning_rate},
        {"grad_clip", c.train.grad_clip},
        {"replay_capacity", c.train.replay_capacity},
        {"replay_batch", c.train.replay_batch},
        {"eval_every", c.train.eval_every},
        {"eval_episodes", c.train.eval_episodes},
        {"checkpoint_every", c.train.checkpoint_every}}},
      {"tta",
       {{"iterations", c.tta.iterations},
        {"views", c.tta.views},
        {"learning_rate", c.tta.learning_rate},
        {"momentum_updates", c.tta.momentum_updates}}},
      {"augment", pool_to_json(c.pool)},
  };
}

RunConfig config_from_json(const json& j) {
  RunConfig c;
  Reader top(j, "");
  top.require("version");
  top.require("seed");
  int version = 0;
  top.get("version", version);
  if (version != kConfigVersion) {
    throw ConfigError("unsupported config version " + std::to_string(version) + " (expected " +
                      std::to_string(kConfigVersion) + ")");
  }
  top.get("seed", c.seed);
  top.get("world_seed", c.world_seed);
  if (const json* w = top.child("world")) {
    try {
      c.world = world::config_from_json(*w);
    } catch (const std::exception& e) {
      throw ConfigError(std::string("config field 'world': ") + e.what());
    }
  }
  if (const json* e = top.child("episodes")) {
    Reader r(*e, "episodes");
    r.get("train_per_scene", c.episodes.train_per_scene);
    r.get("val_seen_per_scene", c.episodes.val_seen_per_scene);
    r.get("val_unseen_per_scene", c.episodes.val_unseen_per_scene);
    r.get("min_hops", c.hops.min_hops);
    r.get("max_hops", c.hops.max_hops);
    r.finish();
  }
  if (const json* a = top.child("agent")) {
    Reader r(*a, "agent");
    r.get("hidden", c.agent.hidden);
    r.get("word_dim", c.agent.word_dim);
    r.get("action_dim", c.agent.action_dim);
    r.get("proj_dim", c.agent.proj_dim);
    r.get("critic_hidden", c.agent.critic_hidden);
    r.get("max_steps", c.agent.max_steps);
    r.get("queue_size", c.agent.queue_size);
    r.get("momentum", c.agent.momentum);
    r.get("bilinear_scale", c.agent.bilinear_scale);
    r.finish();
  }
  if (const json* l = top.child("loss")) {
    Reader r(*l, "loss");
    r.get("lambda_ml", c.loss.lambda_ml);
    r.get("lambda_rl", c.loss.lambda_rl);
    r.get("lambda_cl_il", c.loss.lambda_cl_il);
    r.get("lambda_cl_rl", c.loss.lambda_cl_rl);
    r.get("alpha", c.loss.alpha);
    r.get("gamma", c.loss.gamma);
    r.finish();
  }
  if (const json* s = top.child("switches")) {
    Reader r(*s, "switches");
    r.get("ml", c.switches.ml);
    r.get("cl_il", c.switches.cl_il);
    r.get("cl_rl", c.switches.cl_rl);
    r.finish();
  }
  if (const json* t = top.child("train")) {
    Reader r(*t, "train");
    r.get("iterations", c.train.iterations);
    r.get("batch_size", c.train.batch_size);
    r.get("learning_rate", c.train.learning_rate);
    r.get("grad_clip", c.train.grad_clip);
    r.get("replay_capacity", c.train.replay_capacity);
    r.get("replay_batch", c.train.replay_batch);
    r.get("eval_every", c.train.eval_every);
    r.get("eval_episodes", c.train.eval_episodes);
    r.get("checkpoint_every", c.train.checkpoint_every);
    r.finish();
  }
  if (const json* t = top.child("tta")) {
    Reader r(*t, "tta");
    r.get("iterations", c.tta.iterations);
    r.get("views", c.tta.views);
    r.get("learning_rate", c.tta.learning_rate);
    r.get("momentum_updates", c.tta.momentum_updates);
    r.finish();
  }
  if (const json* p = top.child("augment")) c.pool = pool_from_json(*p);
  top.finish();
  c.validate();
  return c;
}

RunConfig parse_config(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    const std::size_t upto = std::min<std::size_t>(e.byte, text.size());
    const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(upto), '\n');
    throw ConfigError("config syntax error at line " + std::to_string(line) + ": " + e.what());
  }
  return config_from_json(doc);
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' must be key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::parse_error&) {
    value = raw;
  }
  json* node = &doc;
  std::stringstream ss(key);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    if (!node->is_object()) throw ConfigError("override path '" + key + "' crosses a non-object");
    node = &(*node)[parts[i]];
    if (node->is_null()) *node = json::object();
  }
  (*node)[parts.back()] = value;
}

std::string config_hash(const RunConfig& c) { return sha256_hex(config_to_json(c).dump()); }

std::string model_hash(const RunConfig& c) { return sha256_hex(model_part(config_to_json(c)).dump()); }

objectives::Switches parse_switches(const std::string& list) {
  objectives::Switches s{false, false, false};
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item == "ml") s.ml = true;
    else if (item == "cl_il") s.cl_il = true;
    else if (item == "cl_rl") s.cl_rl = true;
    else if (!item.empty()) throw ConfigError("unknown switch '" + item + "' (expected ml, cl_il, cl_rl)");
  }
  if (!s.any()) throw ConfigError("switch list '" + list + "' enables nothing");
  return s;
}

std::string switches_name(const objectives::Switches& s) {
  std::string out;
  auto add = [&](bool on, const char* name) {
    if (!on) return;
    if (!out.empty()) out += ",";
    out += name;
  };
  add(s.ml, "ml");
  add(s.cl_il, "cl_il");
  add(s.cl_rl, "cl_rl");
  return out;
}

}  // namespace tvc::trainer
