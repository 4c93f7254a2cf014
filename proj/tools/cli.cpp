#include "tvc/cli/cli.hpp"

#include <chrono>
#include <ctime>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "tvc/evalkit/reproduce.hpp"
#include "tvc/trainer/trainer.hpp"
#include "tvc/util/hash.hpp"
#include "tvc/world/serialize.hpp"

namespace tvc::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json load_json(const fs::path& path) {
  if (!fs::exists(path)) throw ArtifactMismatch("missing file " + path.string());
  try {
    return json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ArtifactMismatch("unreadable JSON in " + path.string() + ": " + e.what());
  }
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      out.push_back(std::stoull(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::logic_error&) {
      throw trainer::ConfigError("invalid seed '" + item + "'");
    }
  }
  if (out.empty()) throw trainer::ConfigError("empty seed list");
  return out;
}

std::vector<double> parse_double_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::logic_error&) {
      throw trainer::ConfigError("invalid number '" + item + "'");
    }
  }
  if (out.empty()) throw trainer::ConfigError("empty list");
  return out;
}

/// Config file plus --set overrides; overrides win.
trainer::RunConfig load_config(const fs::path& path, const std::vector<std::string>& overrides) {
  if (!fs::exists(path)) throw trainer::ConfigError("config file not found: " + path.string());
  trainer::RunConfig cfg = trainer::parse_config(read_file(path));
  if (!overrides.empty()) {
    json doc = trainer::config_to_json(cfg);
    for (const auto& o : overrides) trainer::apply_override(doc, o);
    cfg = trainer::config_from_json(doc);
  }
  cfg.validate();
  return cfg;
}

struct LoadedWorld {
  world::World world;
  world::EpisodeSets episodes;
  std::string hash;
};

LoadedWorld load_world(const fs::path& dir, Manifest* manifest) {
  if (fs::exists(dir / "manifest.json")) verify_manifest(dir / "manifest.json");
  LoadedWorld w;
  w.world = world::world_from_json(load_json(dir / "world.json"));
  const json eps = load_json(dir / "episodes.json");
  w.episodes.train = world::episodes_from_json(eps.at("train"));
  w.episodes.val_seen = world::episodes_from_json(eps.at("val_seen"));
  w.episodes.val_unseen = world::episodes_from_json(eps.at("val_unseen"));
  w.hash = trainer::world_hash(w.world);
  if (manifest) {
    manifest->add_input(dir / "world.json");
    manifest->add_input(dir / "episodes.json");
  }
  return w;
}

void check_world_matches(const trainer::RunConfig& cfg, const world::World& w) {
  if (!(cfg.world == w.config) || cfg.world_seed != w.seed) {
    throw ArtifactMismatch("world files were generated from a different world config or seed");
  }
}

json episodes_document(const world::EpisodeSets& e) {
  return {{"format", "tvc-episodes"},
          {"version", world::kEpisodeFormatVersion},
          {"train", world::episodes_to_json(e.train)},
          {"val_seen", world::episodes_to_json(e.val_seen)},
          {"val_unseen", world::episodes_to_json(e.val_unseen)}};
}

void write_world(const trainer::RunConfig& cfg, const fs::path& out, Manifest& manifest, LoadedWorld* keep) {
  world::World w = world::build_world(cfg.world, cfg.world_seed);
  auto eps = world::generate_standard_episodes(w, cfg.episodes, cfg.world_seed, cfg.hops);
  manifest.write_output(out / "world.json", world::world_to_json(w).dump() + "\n");
  manifest.write_output(out / "episodes.json", episodes_document(eps).dump() + "\n");
  manifest.write_output(out / "config.json", dump(trainer::config_to_json(cfg)));
  if (keep) {
    keep->hash = trainer::world_hash(w);
    keep->world = std::move(w);
    keep->episodes = std::move(eps);
  }
}

std::string checkpoint_name(const objectives::Switches& sw, std::uint64_t seed) {
  std::string name = trainer::switches_name(sw);
  for (auto& c : name) {
    if (c == ',') c = '+';
  }
  return name + "-seed" + std::to_string(seed) + ".json";
}

/// Trains one model, writing its log and final checkpoint under `dir`.
/// Reuses an existing checkpoint whose config and world match.
agent::AgentParams train_into(const trainer::RunConfig& cfg, const LoadedWorld& w, const fs::path& ckpt_path,
                              const fs::path& log_path, Manifest& manifest, bool verbose) {
  if (fs::exists(ckpt_path)) {
    auto loaded = trainer::checkpoint_from_json(load_json(ckpt_path));
    if (trainer::model_hash(loaded.config) == trainer::model_hash(cfg) && loaded.world_hash == w.hash &&
        loaded.state.iteration == cfg.train.iterations) {
      manifest.add_input(ckpt_path);
      return loaded.state.params;
    }
  }
  trainer::TrainState state = trainer::init_train_state(cfg);
  std::string log;
  trainer::TrainHooks hooks;
  hooks.on_log = [&](const json& rec) {
    log += rec.dump() + "\n";
    if (verbose && rec.contains("val_unseen")) std::cerr << rec.dump() << "\n";
  };
  trainer::train_joint(state, cfg, w.world, w.episodes, hooks);
  manifest.write_output(log_path, log);
  manifest.write_output(ckpt_path, trainer::checkpoint_to_json(state, cfg, w.hash).dump() + "\n");
  return state.params;
}

// ---- commands ----------------------------------------------------------------

struct WorldArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::vector<std::string> set;
};

int cmd_world(const WorldArgs& a) {
  auto cfg = load_config(a.config, a.set);
  if (a.seed) cfg.world_seed = *a.seed;
  Manifest manifest("world", trainer::config_to_json(cfg), cfg.world_seed);
  manifest.add_input(a.config);
  write_world(cfg, a.out, manifest, nullptr);
  manifest.save(a.out);
  std::cout << "world written to " << a.out << "\n";
  return kOk;
}

struct TrainArgs {
  std::string config;
  std::string world;
  std::string out;
  std::string switches;
  std::optional<std::uint64_t> seed;
  std::string resume;
  std::vector<std::string> set;
  bool quiet = false;
};

int cmd_train(const TrainArgs& a) {
  const fs::path config_path = a.config.empty() ? fs::path(a.world) / "config.json" : fs::path(a.config);
  auto cfg = load_config(config_path, a.set);
  if (!a.switches.empty()) cfg.switches = trainer::parse_switches(a.switches);
  if (a.seed) cfg.seed = *a.seed;
  cfg.validate();

  Manifest manifest("train", trainer::config_to_json(cfg), cfg.seed);
  manifest.add_input(config_path);
  const LoadedWorld w = load_world(a.world, &manifest);
  check_world_matches(cfg, w.world);

  const fs::path out = a.out;
  fs::create_directories(out);
  trainer::TrainState state;
  std::string log;
  if (!a.resume.empty()) {
    auto loaded = trainer::checkpoint_from_json(load_json(a.resume));
    manifest.add_input(a.resume);
    if (loaded.world_hash != w.hash) throw ArtifactMismatch("checkpoint was trained on a different world");
    auto resumed = cfg;
    resumed.train.iterations = loaded.config.train.iterations;
    if (trainer::model_hash(resumed) != trainer::model_hash(loaded.config)) {
      throw ArtifactMismatch("checkpoint config differs from the requested run beyond the iteration count");
    }
    if (loaded.state.iteration > cfg.train.iterations) {
      throw trainer::ConfigError("checkpoint is already past train.iterations");
    }
    state = std::move(loaded.state);
    state.replay = trainer::ReplayBuffer(static_cast<std::size_t>(cfg.train.replay_capacity));
    // Keep the log lines of the iterations the checkpoint already covers.
    if (fs::exists(out / "train_log.jsonl")) {
      std::stringstream old(read_file(out / "train_log.jsonl"));
      std::string line;
      for (int i = 0; i < state.iteration && std::getline(old, line); ++i) log += line + "\n";
    }
  } else {
    state = trainer::init_train_state(cfg);
  }

  trainer::TrainHooks hooks;
  hooks.on_log = [&](const json& rec) {
    log += rec.dump() + "\n";
    if (!a.quiet && (rec.contains("val_unseen") || rec.at("iteration").get<int>() % 50 == 0)) {
      std::cerr << rec.dump() << "\n";
    }
  };
  hooks.on_checkpoint = [&](const trainer::TrainState& s) {
    const auto path = out / ("checkpoint-" + std::to_string(s.iteration) + ".json");
    manifest.write_output(path, trainer::checkpoint_to_json(s, cfg, w.hash).dump() + "\n");
    write_file(out / "train_log.jsonl", log);
  };
  try {
    trainer::train_joint(state, cfg, w.world, w.episodes, hooks);
  } catch (const trainer::DivergenceDetected&) {
    write_file(out / "train_log.jsonl", log);
    throw;
  }
  manifest.write_output(out / "train_log.jsonl", log);
  manifest.write_output(out / "checkpoint.json", trainer::checkpoint_to_json(state, cfg, w.hash).dump() + "\n");
  manifest.save(out);
  std::cout << "checkpoint written to " << (out / "checkpoint.json").string() << "\n";
  return kOk;
}

struct EvalArgs {
  std::vector<std::string> checkpoints;
  std::string world;
  std::string out;
  std::vector<std::string> splits{"val_seen", "val_unseen"};
  std::string variant = "tta";
  std::optional<int> tta_iters;
  std::string seeds;
  std::vector<std::string> set;
};

int cmd_eval(const EvalArgs& a) {
  const auto variant = evalkit::parse_variant(a.variant);
  Manifest manifest("eval", json::object(), 0);
  const LoadedWorld w = load_world(a.world, &manifest);

  std::vector<trainer::LoadedCheckpoint> loaded;
  for (const auto& path : a.checkpoints) {
    loaded.push_back(trainer::checkpoint_from_json(load_json(path)));
    manifest.add_input(path);
    if (loaded.back().world_hash != w.hash) throw ArtifactMismatch(path + " was trained on a different world");
  }
  std::vector<std::uint64_t> seeds;
  if (a.seeds.empty()) {
    for (const auto& l : loaded) seeds.push_back(l.config.seed);
  } else {
    seeds = parse_seed_list(a.seeds);
  }
  if (loaded.size() != 1 && seeds.size() != loaded.size()) {
    throw trainer::ConfigError("--seeds must list one seed per checkpoint");
  }

  std::vector<evalkit::SeedModel> models;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    const auto& l = loaded[loaded.size() == 1 ? 0 : i];
    trainer::RunConfig cfg = l.config;
    if (!a.set.empty()) {
      json doc = trainer::config_to_json(cfg);
      for (const auto& o : a.set) trainer::apply_override(doc, o);
      cfg = trainer::config_from_json(doc);
      if (trainer::model_hash(cfg) != trainer::model_hash(l.config)) {
        throw trainer::ConfigError("--set at evaluation may only change tta.* keys");
      }
    }
    if (a.tta_iters) cfg.tta.iterations = *a.tta_iters;
    cfg.validate();
    models.push_back({seeds[i], &l.state.params, cfg});
  }
  std::map<std::string, std::vector<world::Episode>> splits = evalkit::select_splits(w.episodes, a.splits);

  const auto report = evalkit::run_benchmark(models, w.world, splits, variant);
  const fs::path out = a.out;
  fs::create_directories(out);
  manifest.write_output(out / "metrics.json", dump(evalkit::report_to_json(report, true)));
  manifest.write_output(out / "metrics.txt", evalkit::report_to_table(report));
  manifest.write_output(out / "trajectories.jsonl", evalkit::trajectory_log(report, w.world, splits));
  if (variant == evalkit::Variant::kTta) {
    for (const auto& s : a.splits) {
      manifest.write_output(out / ("entropy_" + s + ".json"), dump(evalkit::entropy_series(report, s)));
    }
  }
  manifest.save(out);
  std::cout << evalkit::report_to_table(report);
  return kOk;
}

struct AblateArgs {
  std::string config;
  std::string world;
  std::string out;
  std::string grid = "full";
  std::string seeds = "1,2,3,4,5";
  std::vector<std::string> splits{"val_seen", "val_unseen"};
  std::vector<std::string> set;
};

int cmd_ablate(const AblateArgs& a) {
  const fs::path config_path = a.config.empty() ? fs::path(a.world) / "config.json" : fs::path(a.config);
  const auto cfg = load_config(config_path, a.set);
  const auto grid = evalkit::parse_grid(a.grid);
  const auto seeds = parse_seed_list(a.seeds);
  Manifest manifest("ablate", trainer::config_to_json(cfg), seeds.front());
  manifest.add_input(config_path);
  const LoadedWorld w = load_world(a.world, &manifest);
  check_world_matches(cfg, w.world);
  const fs::path out = a.out;
  fs::create_directories(out / "checkpoints");

  evalkit::AblationHooks hooks;
  hooks.train = [&](const trainer::RunConfig& c) {
    const auto name = checkpoint_name(c.switches, c.seed);
    const auto stem = name.substr(0, name.size() - 5);
    std::cerr << "training " << stem << "\n";
    return train_into(c, w, out / "checkpoints" / name, out / "checkpoints" / (stem + ".log.jsonl"), manifest,
                      false);
  };
  const auto table = evalkit::run_ablation(cfg, grid, seeds, w.world, w.episodes, a.splits, hooks);
  manifest.write_output(out / "ablation.json", dump(evalkit::ablation_to_json(table)));
  manifest.write_output(out / "ablation.txt", evalkit::ablation_to_table(table));
  manifest.save(out);
  std::cout << evalkit::ablation_to_table(table);
  return kOk;
}

struct ExportArgs {
  std::string kind;
  std::string trajectories;
  std::string world;
  std::string split = "val_unseen";
  std::vector<std::string> checkpoints;
  std::string shifts = "0,0.25,0.5,0.75,1";
  std::string variant = "nnc";
  std::string out;
};

std::vector<json> read_jsonl(const fs::path& path) {
  if (!fs::exists(path)) throw ArtifactMismatch("missing file " + path.string());
  std::vector<json> rows;
  std::stringstream ss(read_file(path));
  std::string line;
  while (std::getline(ss, line)) {
    if (!line.empty()) rows.push_back(json::parse(line));
  }
  return rows;
}

int cmd_export(const ExportArgs& a) {
  Manifest manifest("export " + a.kind, json::object(), 0);
  json doc;
  if (a.kind == "entropy") {
    manifest.add_input(a.trajectories);
    std::vector<double> sum;
    std::size_t n = 0, decreased = 0;
    json curves = json::array();
    for (const auto& r : read_jsonl(a.trajectories)) {
      if (r.at("split") != a.split || !r.contains("entropy_curve")) continue;
      const auto c = r.at("entropy_curve").get<std::vector<double>>();
      if (c.empty()) continue;
      if (sum.size() < c.size()) sum.resize(c.size(), 0.0);
      for (std::size_t i = 0; i < c.size(); ++i) sum[i] += c[i];
      ++n;
      if (c.size() >= 2 && c.back() < c.front()) ++decreased;
      curves.push_back({{"seed", r.at("seed")}, {"episode_id", r.at("trajectory").at("episode_id")}, {"entropy", c}});
    }
    if (n == 0) throw trainer::ConfigError("no entropy curves for split " + a.split + " (evaluate with --variant tta)");
    std::vector<int> steps;
    for (std::size_t i = 0; i < sum.size(); ++i) {
      steps.push_back(static_cast<int>(i));
      sum[i] /= static_cast<double>(n);
    }
    doc = {{"format", "tvc-entropy-series"}, {"version", 1},     {"split", a.split},     {"step", steps},
           {"mean_entropy", sum},            {"episodes", curves}, {"decreased", decreased}, {"total", n}};
  } else if (a.kind == "birdview") {
    manifest.add_input(a.trajectories);
    const LoadedWorld w = load_world(a.world, &manifest);
    std::map<std::string, json> scenes;
    json episodes = json::array();
    for (const auto& r : read_jsonl(a.trajectories)) {
      if (r.at("split") != a.split) continue;
      const std::string scene_id = r.at("trajectory").at("scene_id");
      if (!scenes.count(scene_id)) {
        const auto& g = w.world.scene(scene_id);
        json nodes = json::array(), edges = json::array();
        for (const auto& v : g.nodes()) nodes.push_back({v.x, v.y});
        for (int i = 0; i < g.size(); ++i) {
          for (const auto& e : g.edges(i)) {
            if (i < e.to) edges.push_back({i, e.to});
          }
        }
        scenes[scene_id] = {{"nodes", nodes}, {"edges", edges}};
      }
      episodes.push_back({{"seed", r.at("seed")},
                          {"variant", r.at("variant")},
                          {"episode_id", r.at("trajectory").at("episode_id")},
                          {"scene_id", scene_id},
                          {"agent", r.at("coords")},
                          {"ground_truth", r.at("gt_coords")},
                          {"success", r.at("metrics").at("sr")}});
    }
    doc = {{"format", "tvc-birdview"}, {"version", 1}, {"split", a.split}, {"scenes", scenes}, {"episodes", episodes}};
  } else if (a.kind == "shift") {
    const auto variant = evalkit::parse_variant(a.variant);
    std::vector<trainer::LoadedCheckpoint> loaded;
    std::vector<evalkit::SeedModel> models;
    for (const auto& path : a.checkpoints) {
      loaded.push_back(trainer::checkpoint_from_json(load_json(path)));
      manifest.add_input(path);
    }
    for (const auto& l : loaded) models.push_back({l.config.seed, &l.state.params, l.config});
    const auto points = evalkit::shift_sweep(models, parse_double_list(a.shifts), variant);
    doc = evalkit::shift_sweep_to_json(points, variant);
  } else {
    throw trainer::ConfigError("unknown export kind '" + a.kind + "' (expected entropy, birdview, shift)");
  }
  const fs::path out = a.out;
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  manifest.write_output(out, dump(doc));
  manifest.save(out.has_parent_path() ? out.parent_path() : fs::path("."));
  std::cout << "wrote " << out.string() << "\n";
  return kOk;
}

struct BenchArgs {
  std::string config;
  std::string out;
  std::string seeds = "1,2,3,4,5";
  std::string shifts = "0,0.25,0.5,0.75,1";
  std::vector<std::string> set;
};

int cmd_bench(const BenchArgs& a) {
  const auto cfg = load_config(a.config, a.set);
  const auto seeds = parse_seed_list(a.seeds);
  const fs::path out = a.out;
  fs::create_directories(out / "world");
  fs::create_directories(out / "checkpoints");
  Manifest manifest("bench", trainer::config_to_json(cfg), seeds.front());
  manifest.add_input(a.config);

  LoadedWorld w;
  write_world(cfg, out / "world", manifest, &w);

  evalkit::ReproductionOptions opts;
  opts.seeds = seeds;
  opts.progress = [](const std::string& msg) { std::cerr << msg << "\n"; };
  opts.train = [&](const trainer::RunConfig& c) {
    const auto name = checkpoint_name(c.switches, c.seed);
    const auto stem = name.substr(0, name.size() - 5);
    return train_into(c, w, out / "checkpoints" / name, out / "checkpoints" / (stem + ".log.jsonl"), manifest,
                      false);
  };
  const auto rep = evalkit::reproduce(cfg, w.world, w.episodes, opts);
  const auto splits = evalkit::select_splits(w.episodes, opts.splits);

  manifest.write_output(out / "reproduction.json", dump(evalkit::reproduction_to_json(rep)));
  manifest.write_output(out / "summary.txt", evalkit::reproduction_table(rep));
  for (const auto* r : {&rep.base, &rep.nnc, &rep.tta}) {
    const std::string v(evalkit::variant_name(r->variant));
    manifest.write_output(out / ("metrics_" + v + ".json"), dump(evalkit::report_to_json(*r, true)));
    manifest.write_output(out / ("trajectories_" + v + ".jsonl"), evalkit::trajectory_log(*r, w.world, splits));
  }
  manifest.write_output(out / "entropy_val_unseen.json", dump(evalkit::entropy_series(rep.tta, "val_unseen")));

  if (!a.shifts.empty()) {
    const auto shifts = parse_double_list(a.shifts);
    std::vector<agent::AgentParams> keep;
    keep.reserve(2 * seeds.size());
    json sweeps = json::object();
    for (auto variant : {evalkit::Variant::kBase, evalkit::Variant::kNnc}) {
      const objectives::Switches sw =
          variant == evalkit::Variant::kBase ? objectives::Switches{true, false, false} : objectives::Switches{};
      std::vector<evalkit::SeedModel> models;
      for (auto seed : seeds) {
        auto c = cfg;
        c.seed = seed;
        c.switches = sw;
        keep.push_back(opts.train(c));
        models.push_back({seed, &keep.back(), c});
      }
      sweeps[std::string(evalkit::variant_name(variant))] =
          evalkit::shift_sweep_to_json(evalkit::shift_sweep(models, shifts, variant), variant);
    }
    manifest.write_output(out / "shift_sweep.json", dump(sweeps));
  }
  manifest.save(out);
  std::cout << evalkit::reproduction_table(rep);
  const auto d = evalkit::entropy_descent(rep.tta, "val_unseen");
  std::cout << "entropy decreased on " << d.decreased << "/" << d.episodes << " adapted val_unseen episodes\n";
  return kOk;
}

int guarded(const std::function<int()>& body) {
  try {
    return body();
  } catch (const trainer::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const world::InvalidConfig& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const trainer::DivergenceDetected& e) {
    std::cerr << "divergence: " << e.what() << "\n";
    return kDivergence;
  } catch (const trainer::CheckpointMismatch& e) {
    std::cerr << "artifact mismatch: " << e.what() << "\n";
    return kArtifactMismatch;
  } catch (const ArtifactMismatch& e) {
    std::cerr << "artifact mismatch: " << e.what() << "\n";
    return kArtifactMismatch;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
}

}  // namespace

Manifest::Manifest(std::string command, json config, std::uint64_t seed) {
  doc_ = {{"format", "tvc-manifest"},
          {"version", 1},
          {"command", std::move(command)},
          {"config", std::move(config)},
          {"seed", seed},
          {"started", utc_now()},
          {"inputs", json::array()},
          {"outputs", json::array()}};
}

void Manifest::add_input(const fs::path& path) {
  doc_["inputs"].push_back({{"path", fs::absolute(path).lexically_normal().string()}, {"sha256", sha256_file(path)}});
}

void Manifest::write_output(const fs::path& path, const std::string& bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_file(path, bytes);
  auto& outs = doc_["outputs"];
  const std::string name = fs::absolute(path).lexically_normal().string();
  for (auto& o : outs) {
    if (o.at("path") == name) {
      o["sha256"] = sha256_hex(bytes);
      o["bytes"] = bytes.size();
      o["written"] = utc_now();
      return;
    }
  }
  outs.push_back({{"path", name}, {"sha256", sha256_hex(bytes)}, {"bytes", bytes.size()}, {"written", utc_now()}});
}

void Manifest::save(const fs::path& dir) {
  doc_["finished"] = utc_now();
  fs::create_directories(dir);
  write_file(dir / "manifest.json", dump(doc_));
}

void verify_manifest(const fs::path& manifest_path) {
  const json doc = load_json(manifest_path);
  if (doc.value("format", "") != "tvc-manifest") throw ArtifactMismatch(manifest_path.string() + " is not a manifest");
  for (const auto& o : doc.at("outputs")) {
    const fs::path p = o.at("path").get<std::string>();
    if (!fs::exists(p)) throw ArtifactMismatch("manifest output missing: " + p.string());
    if (sha256_file(p) != o.at("sha256").get<std::string>()) {
      throw ArtifactMismatch("manifest output changed since it was written: " + p.string());
    }
  }
}

int run(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  for (const auto& s : args) argv.push_back(s.c_str());
  return run(static_cast<int>(argv.size()), argv.data());
}

int run(int argc, const char* const* argv) {
  CLI::App app{"tvc: contrastive test-time adaptation for instruction-following navigation"};
  app.require_subcommand(1);

  WorldArgs wa;
  auto* world_cmd = app.add_subcommand("world", "Generate scenes and episode splits");
  world_cmd->add_option("--config", wa.config, "Run config file")->required();
  world_cmd->add_option("--seed", wa.seed, "World seed (overrides world_seed)");
  world_cmd->add_option("--out", wa.out, "Output directory")->required();
  world_cmd->add_option("--set", wa.set, "Config override key=value");

  TrainArgs ta;
  auto* train_cmd = app.add_subcommand("train", "Train one model");
  train_cmd->add_option("--config", ta.config, "Run config file (default: the world directory's config)");
  train_cmd->add_option("--world", ta.world, "World directory")->required();
  train_cmd->add_option("--out", ta.out, "Output directory")->required();
  train_cmd->add_option("--switches", ta.switches, "Active terms, e.g. ml,cl_il,cl_rl");
  train_cmd->add_option("--seed", ta.seed, "Training seed");
  train_cmd->add_option("--resume", ta.resume, "Continue from a checkpoint");
  train_cmd->add_option("--set", ta.set, "Config override key=value");
  train_cmd->add_flag("--quiet", ta.quiet, "Suppress progress output");

  EvalArgs ea;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate checkpoints");
  eval_cmd->add_option("--checkpoint", ea.checkpoints, "Checkpoint file (repeat for several seeds)")->required();
  eval_cmd->add_option("--world", ea.world, "World directory")->required();
  eval_cmd->add_option("--out", ea.out, "Output directory")->required();
  eval_cmd->add_option("--split", ea.splits, "Split(s) to evaluate")->delimiter(',');
  eval_cmd->add_option("--variant", ea.variant, "base, nnc or tta");
  eval_cmd->add_option("--tta-iters", ea.tta_iters, "Adaptation steps per episode");
  eval_cmd->add_option("--seeds", ea.seeds, "Comma-separated evaluation seeds");
  eval_cmd->add_option("--set", ea.set, "Adaptation override, e.g. tta.learning_rate=1e-3");

  AblateArgs aa;
  auto* ablate_cmd = app.add_subcommand("ablate", "Train and evaluate a grid of loss switches");
  ablate_cmd->add_option("--config", aa.config, "Run config file (default: the world directory's config)");
  ablate_cmd->add_option("--world", aa.world, "World directory")->required();
  ablate_cmd->add_option("--out", aa.out, "Output directory")->required();
  ablate_cmd->add_option("--grid", aa.grid, "full, or rows like ml+cl_il,cl_il+cl_rl");
  ablate_cmd->add_option("--seeds", aa.seeds, "Comma-separated training seeds");
  ablate_cmd->add_option("--split", aa.splits, "Split(s) to evaluate")->delimiter(',');
  ablate_cmd->add_option("--set", aa.set, "Config override key=value");

  ExportArgs xa;
  auto* export_cmd = app.add_subcommand("export", "Export plot data series");
  export_cmd->add_option("kind", xa.kind, "entropy, birdview or shift")->required();
  export_cmd->add_option("--trajectories", xa.trajectories, "trajectories.jsonl from eval");
  export_cmd->add_option("--world", xa.world, "World directory (birdview)");
  export_cmd->add_option("--split", xa.split, "Split to export");
  export_cmd->add_option("--checkpoint", xa.checkpoints, "Checkpoint file(s) (shift)");
  export_cmd->add_option("--shifts", xa.shifts, "Comma-separated style offsets (shift)");
  export_cmd->add_option("--variant", xa.variant, "Variant for the shift sweep");
  export_cmd->add_option("--out", xa.out, "Output file")->required();

  BenchArgs ba;
  auto* bench_cmd = app.add_subcommand("bench", "Full reproduction: world, training, evaluation, ablation");
  bench_cmd->add_option("--config", ba.config, "Run config file")->required();
  bench_cmd->add_option("--out", ba.out, "Output directory")->required();
  bench_cmd->add_option("--seeds", ba.seeds, "Comma-separated training seeds");
  bench_cmd->add_option("--shifts", ba.shifts, "Style offsets for the shift sweep (empty to skip)");
  bench_cmd->add_option("--set", ba.set, "Config override key=value");

  std::string manifest_path;
  auto* verify_cmd = app.add_subcommand("verify", "Check a manifest's outputs against their hashes");
  verify_cmd->add_option("manifest", manifest_path, "manifest.json")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  if (*world_cmd) return guarded([&] { return cmd_world(wa); });
  if (*train_cmd) return guarded([&] { return cmd_train(ta); });
  if (*eval_cmd) return guarded([&] { return cmd_eval(ea); });
  if (*ablate_cmd) return guarded([&] { return cmd_ablate(aa); });
  if (*export_cmd) return guarded([&] { return cmd_export(xa); });
  if (*bench_cmd) return guarded([&] { return cmd_bench(ba); });
  if (*verify_cmd) {
    return guarded([&] {
      verify_manifest(manifest_path);
      std::cout << "manifest ok\n";
      return static_cast<int>(kOk);
    });
  }
  return kFailure;
}

}  // namespace tvc::cli
