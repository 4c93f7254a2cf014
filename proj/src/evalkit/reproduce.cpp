#include "tvc/evalkit/reproduce.hpp"

#include <algorithm>
#include <chrono>
#include <sstream>

namespace tvc::evalkit {

using nlohmann::json;

namespace {

std::string elapsed_since(std::chrono::steady_clock::time_point t0) {
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::ostringstream os;
  os.precision(1);
  os << std::fixed << s << "s";
  return os.str();
}

SplitSummary seed_summary(const MetricsReport& r, const std::string& split) { return r.summary.at(split); }

}  // namespace

MetricsReport merge_reports(const std::vector<MetricsReport>& parts) {
  if (parts.empty()) throw trainer::ConfigError("nothing to merge");
  MetricsReport out;
  out.variant = parts.front().variant;
  out.config_hash = parts.front().config_hash;
  out.splits = parts.front().splits;
  for (const auto& p : parts) {
    if (p.variant != out.variant || p.splits != out.splits) {
      throw trainer::CheckpointMismatch("reports of different variants or splits cannot be merged");
    }
    out.seeds.insert(out.seeds.end(), p.seeds.begin(), p.seeds.end());
    out.per_seed.insert(out.per_seed.end(), p.per_seed.begin(), p.per_seed.end());
  }
  for (const auto& name : out.splits) {
    std::vector<Aggregate> aggs;
    for (const auto& s : out.per_seed) aggs.push_back(s.aggregates.at(name));
    out.summary[name] = summarize(aggs);
  }
  return out;
}

Reproduction reproduce(const trainer::RunConfig& config, const world::World& world,
                       const world::EpisodeSets& episodes, const ReproductionOptions& options) {
  if (options.seeds.empty()) throw trainer::ConfigError("reproduction needs at least one seed");
  const objectives::Switches full{true, true, true};
  const objectives::Switches ml_only{true, false, false};
  auto grid = options.grid;
  if (std::find(grid.begin(), grid.end(), full) == grid.end()) grid.insert(grid.begin(), full);

  const auto t0 = std::chrono::steady_clock::now();
  auto say = [&](const std::string& msg) {
    if (options.progress) options.progress("[" + elapsed_since(t0) + "] " + msg);
  };

  std::map<std::pair<std::string, std::uint64_t>, agent::AgentParams> cache;
  auto model_for = [&](const trainer::RunConfig& cfg) -> const agent::AgentParams& {
    const auto key = std::make_pair(trainer::switches_name(cfg.switches), cfg.seed);
    auto it = cache.find(key);
    if (it == cache.end()) {
      agent::AgentParams p = options.train ? options.train(cfg) : train_model(cfg, world, episodes);
      it = cache.emplace(key, std::move(p)).first;
      say("trained " + key.first + " seed " + std::to_string(cfg.seed));
    }
    return it->second;
  };
  auto config_for = [&](objectives::Switches sw, std::uint64_t seed) {
    trainer::RunConfig c = config;
    c.seed = seed;
    c.switches = sw;
    c.validate();
    return c;
  };

  const auto splits = select_splits(episodes, options.splits);
  Reproduction out;
  std::vector<MetricsReport> base_parts, nnc_parts, tta_parts;
  for (auto seed : options.seeds) {
    const auto base_cfg = config_for(ml_only, seed);
    const auto full_cfg = config_for(full, seed);
    base_parts.push_back(run_benchmark({{seed, &model_for(base_cfg), base_cfg}}, world, splits, Variant::kBase));
    say("base seed " + std::to_string(seed));
    nnc_parts.push_back(run_benchmark({{seed, &model_for(full_cfg), full_cfg}}, world, splits, Variant::kNnc));
    say("nnc seed " + std::to_string(seed));
  }

  AblationHooks hooks;
  hooks.train = [&](const trainer::RunConfig& c) { return model_for(c); };
  hooks.on_report = [&](const objectives::Switches& sw, std::uint64_t seed, const MetricsReport& rep) {
    if (sw == full) tta_parts.push_back(rep);
    say("adapted " + trainer::switches_name(sw) + " seed " + std::to_string(seed));
  };
  out.ablation = run_ablation(config, grid, options.seeds, world, episodes, options.splits, hooks);
  out.base = merge_reports(base_parts);
  out.nnc = merge_reports(nnc_parts);
  out.tta = merge_reports(tta_parts);
  out.tta.config_hash = out.nnc.config_hash;
  return out;
}

EntropyDescent entropy_descent(const MetricsReport& report, const std::string& split) {
  EntropyDescent d;
  for (const auto& s : report.per_seed) {
    auto it = s.episodes.find(split);
    if (it == s.episodes.end()) continue;
    for (const auto& o : it->second) {
      if (o.entropy_curve.size() < 2) continue;
      ++d.episodes;
      if (o.entropy_curve.back() < o.entropy_curve.front()) ++d.decreased;
    }
  }
  return d;
}

json entropy_series(const MetricsReport& report, const std::string& split) {
  std::vector<double> sum;
  std::size_t n = 0;
  json curves = json::array();
  for (const auto& s : report.per_seed) {
    auto it = s.episodes.find(split);
    if (it == s.episodes.end()) continue;
    for (const auto& o : it->second) {
      if (o.entropy_curve.empty()) continue;
      if (sum.size() < o.entropy_curve.size()) sum.resize(o.entropy_curve.size(), 0.0);
      for (std::size_t i = 0; i < o.entropy_curve.size(); ++i) sum[i] += o.entropy_curve[i];
      ++n;
      curves.push_back({{"seed", s.seed}, {"episode_id", o.trajectory.episode_id}, {"entropy", o.entropy_curve}});
    }
  }
  std::vector<int> steps(sum.size());
  for (std::size_t i = 0; i < sum.size(); ++i) {
    steps[i] = static_cast<int>(i);
    sum[i] /= static_cast<double>(n);
  }
  const auto d = entropy_descent(report, split);
  return {{"format", "tvc-entropy-series"}, {"version", 1},           {"split", split},
          {"step", steps},                  {"mean_entropy", sum},     {"episodes", curves},
          {"decreased", d.decreased},       {"total", d.episodes}};
}

std::vector<ShiftPoint> shift_sweep(const std::vector<SeedModel>& models, const std::vector<double>& shifts,
                                    Variant variant) {
  if (models.empty()) throw trainer::ConfigError("shift sweep needs at least one model");
  std::vector<ShiftPoint> out;
  for (double shift : shifts) {
    trainer::RunConfig cfg = models.front().config;
    cfg.world.shift = shift;
    cfg.validate();
    const world::World w = world::build_world(cfg.world, cfg.world_seed);
    const auto eps = world::generate_standard_episodes(w, cfg.episodes, cfg.world_seed, cfg.hops);
    const auto splits = select_splits(eps, {"val_seen", "val_unseen"});
    std::vector<SeedModel> shifted = models;
    for (auto& m : shifted) m.config.world.shift = shift;
    const auto rep = run_benchmark(shifted, w, splits, variant);
    out.push_back({shift, seed_summary(rep, "val_unseen"), seed_summary(rep, "val_seen")});
  }
  return out;
}

json shift_sweep_to_json(const std::vector<ShiftPoint>& points, Variant variant) {
  json shift = json::array(), sr = json::array(), sr_std = json::array(), seen = json::array();
  for (const auto& p : points) {
    shift.push_back(p.shift);
    sr.push_back(p.unseen.mean.sr);
    sr_std.push_back(p.unseen.stddev.sr);
    seen.push_back(p.seen.mean.sr);
  }
  return {{"format", "tvc-shift-sweep"}, {"version", 1},           {"variant", variant_name(variant)},
          {"shift", shift},              {"val_unseen_sr", sr},     {"val_unseen_sr_std", sr_std},
          {"val_seen_sr", seen}};
}

std::string reproduction_table(const Reproduction& r) {
  std::string out;
  out += report_to_table(r.base) + "\n" + report_to_table(r.nnc) + "\n" + report_to_table(r.tta) + "\n";
  out += ablation_to_table(r.ablation);
  return out;
}

json reproduction_to_json(const Reproduction& r) {
  return {{"format", "tvc-reproduction"},
          {"version", 1},
          {"base", report_to_json(r.base, false)},
          {"nnc", report_to_json(r.nnc, false)},
          {"tta", report_to_json(r.tta, false)},
          {"ablation", ablation_to_json(r.ablation)}};
}

}  // namespace tvc::evalkit
