#include "tvc/evalkit/benchmark.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "tvc/trainer/rollout.hpp"
#include "tvc/trainer/tta.hpp"

namespace tvc::evalkit {

using nlohmann::json;

namespace {

constexpr double Aggregate::*kFields[] = {&Aggregate::tl,   &Aggregate::ne,   &Aggregate::sr,  &Aggregate::spl,
                                          &Aggregate::cls,  &Aggregate::ndtw, &Aggregate::sdtw};

bool uses_contrast(const objectives::Switches& s) { return s.cl_il || s.cl_rl; }

std::string fixed(double v, int prec) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(prec) << v;
  return os.str();
}

// Joins cells with padding so every column lines up.
std::string render_table(const std::vector<std::vector<std::string>>& cells) {
  std::vector<std::size_t> width;
  for (const auto& row : cells) {
    if (width.size() < row.size()) width.resize(row.size(), 0);
    for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());
  }
  std::string out;
  for (const auto& row : cells) {
    std::string line;
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) line += "  ";
      line += row[i] + std::string(width[i] - row[i].size(), ' ');
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out += line + "\n";
  }
  return out;
}

json summary_to_json(const SplitSummary& s) {
  return {{"mean", aggregate_to_json(s.mean)}, {"std", aggregate_to_json(s.stddev)}};
}

}  // namespace

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::kBase: return "base";
    case Variant::kNnc: return "nnc";
    case Variant::kTta: return "tta";
  }
  return "?";
}

Variant parse_variant(std::string_view name) {
  if (name == "base") return Variant::kBase;
  if (name == "nnc") return Variant::kNnc;
  if (name == "tta") return Variant::kTta;
  throw trainer::ConfigError("unknown variant '" + std::string(name) + "' (expected base, nnc, tta)");
}

std::vector<EpisodeOutcome> evaluate_episodes(const agent::AgentParams& params, const trainer::RunConfig& config,
                                              const world::World& world,
                                              const std::vector<world::Episode>& episodes, Variant variant,
                                              std::uint64_t seed) {
  agent::AgentParams frozen = params;
  std::vector<EpisodeOutcome> out;
  out.reserve(episodes.size());
  for (const auto& ep : episodes) {
    const auto& graph = world.scene(ep.scene_id);
    EpisodeOutcome o;
    if (variant == Variant::kTta) {
      auto res = trainer::adapt_test_time(params, graph, ep, config, seed);
      o.trajectory = std::move(res.record);
      o.entropy_curve = std::move(res.entropy_curve);
    } else {
      o.trajectory = trainer::greedy_episode(frozen, graph, ep);
    }
    o.row = compute_metrics(o.trajectory, ep, graph, graph.success_radius());
    out.push_back(std::move(o));
  }
  return out;
}

SplitSummary summarize(const std::vector<Aggregate>& per_seed) {
  SplitSummary s;
  if (per_seed.empty()) return s;
  const double n = static_cast<double>(per_seed.size());
  s.mean.episodes = per_seed.front().episodes;
  s.stddev.episodes = per_seed.front().episodes;
  for (auto f : kFields) {
    double m = 0.0;
    for (const auto& a : per_seed) m += a.*f;
    m /= n;
    double v = 0.0;
    for (const auto& a : per_seed) v += (a.*f - m) * (a.*f - m);
    s.mean.*f = m;
    s.stddev.*f = std::sqrt(v / n);
  }
  return s;
}

MetricsReport run_benchmark(const std::vector<SeedModel>& models, const world::World& world,
                            const std::map<std::string, std::vector<world::Episode>>& splits, Variant variant) {
  if (models.empty()) throw trainer::ConfigError("benchmark needs at least one model");
  MetricsReport report;
  report.variant = variant;
  report.config_hash = trainer::model_hash(models.front().config);
  for (const auto& [name, eps] : splits) report.splits.push_back(name);
  for (const auto& m : models) {
    if (m.params == nullptr) throw trainer::ConfigError("benchmark model without parameters");
    const bool contrast = uses_contrast(m.config.switches);
    if (variant == Variant::kBase && contrast) {
      throw trainer::CheckpointMismatch("base variant needs a model trained without contrastive terms");
    }
    if (variant != Variant::kBase && !contrast) {
      throw trainer::CheckpointMismatch(std::string(variant_name(variant)) +
                                        " variant needs a model trained with contrastive terms");
    }
    report.seeds.push_back(m.seed);
    SeedResult sr;
    sr.seed = m.seed;
    for (const auto& [name, eps] : splits) {
      auto outcomes = evaluate_episodes(*m.params, m.config, world, eps, variant, m.seed);
      std::vector<MetricRow> rows;
      for (const auto& o : outcomes) rows.push_back(o.row);
      sr.aggregates[name] = aggregate(rows);
      sr.episodes[name] = std::move(outcomes);
    }
    report.per_seed.push_back(std::move(sr));
  }
  for (const auto& name : report.splits) {
    std::vector<Aggregate> aggs;
    for (const auto& s : report.per_seed) aggs.push_back(s.aggregates.at(name));
    report.summary[name] = summarize(aggs);
  }
  return report;
}

json report_to_json(const MetricsReport& report, bool include_episodes) {
  json j;
  j["format"] = "tvc-metrics";
  j["version"] = 1;
  j["variant"] = variant_name(report.variant);
  j["config_hash"] = report.config_hash;
  j["seeds"] = report.seeds;
  j["splits"] = report.splits;
  json summary = json::object();
  for (const auto& [name, s] : report.summary) summary[name] = summary_to_json(s);
  j["summary"] = summary;
  json per_seed = json::array();
  for (const auto& s : report.per_seed) {
    json e{{"seed", s.seed}};
    json aggs = json::object();
    for (const auto& [name, a] : s.aggregates) aggs[name] = aggregate_to_json(a);
    e["aggregates"] = aggs;
    if (include_episodes) {
      json rows = json::object();
      for (const auto& [name, outs] : s.episodes) {
        json arr = json::array();
        for (const auto& o : outs) arr.push_back(row_to_json(o.row));
        rows[name] = arr;
      }
      e["episodes"] = rows;
    }
    per_seed.push_back(e);
  }
  j["per_seed"] = per_seed;
  return j;
}

std::string report_to_table(const MetricsReport& report) {
  std::vector<std::vector<std::string>> cells{
      {"Variant", "Split", "TL", "NE", "SR", "SPL", "CLS", "nDTW", "sDTW"}};
  for (const auto& name : report.splits) {
    const auto& s = report.summary.at(name);
    std::vector<std::string> row{std::string(variant_name(report.variant)), name};
    for (auto f : kFields) {
      const bool pct = f != &Aggregate::tl && f != &Aggregate::ne;
      const double scale = pct ? 100.0 : 1.0;
      row.push_back(fixed(s.mean.*f * scale, 2) + " +/- " + fixed(s.stddev.*f * scale, 2));
    }
    cells.push_back(std::move(row));
  }
  std::string out = "seeds:";
  for (auto s : report.seeds) out += " " + std::to_string(s);
  out += "  (SR, SPL, CLS, nDTW, sDTW in %)\n";
  return out + render_table(cells);
}

std::string trajectory_log(const MetricsReport& report, const world::World& world,
                           const std::map<std::string, std::vector<world::Episode>>& splits) {
  std::string out;
  for (const auto& s : report.per_seed) {
    for (const auto& [name, outs] : s.episodes) {
      const auto& eps = splits.at(name);
      for (std::size_t i = 0; i < outs.size(); ++i) {
        const auto& o = outs[i];
        const auto& graph = world.scene(o.trajectory.scene_id);
        json coords = json::array();
        for (int n : o.trajectory.nodes) coords.push_back({graph.node(n).x, graph.node(n).y});
        json gt = json::array();
        for (int n : eps[i].gt_path) gt.push_back({graph.node(n).x, graph.node(n).y});
        json rec{{"variant", variant_name(report.variant)},
                 {"seed", s.seed},
                 {"split", name},
                 {"trajectory", trajectory_to_json(o.trajectory)},
                 {"coords", coords},
                 {"gt_path", eps[i].gt_path},
                 {"gt_coords", gt},
                 {"metrics", row_to_json(o.row)}};
        if (!o.entropy_curve.empty()) rec["entropy_curve"] = o.entropy_curve;
        out += rec.dump() + "\n";
      }
    }
  }
  return out;
}

std::vector<objectives::Switches> parse_grid(const std::string& spec) {
  std::vector<objectives::Switches> grid;
  if (spec == "full") {
    for (int mask = 1; mask < 8; ++mask) grid.push_back({(mask & 1) != 0, (mask & 2) != 0, (mask & 4) != 0});
    return grid;
  }
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::string list = item;
    std::replace(list.begin(), list.end(), '+', ',');
    grid.push_back(trainer::parse_switches(list));
  }
  if (grid.empty()) throw trainer::ConfigError("ablation grid is empty");
  return grid;
}

std::map<std::string, std::vector<world::Episode>> select_splits(const world::EpisodeSets& episodes,
                                                                 const std::vector<std::string>& names) {
  std::map<std::string, std::vector<world::Episode>> out;
  for (const auto& n : names) {
    switch (world::parse_split(n)) {
      case world::Split::kTrain: out[n] = episodes.train; break;
      case world::Split::kValSeen: out[n] = episodes.val_seen; break;
      case world::Split::kValUnseen: out[n] = episodes.val_unseen; break;
    }
  }
  return out;
}

agent::AgentParams train_model(const trainer::RunConfig& config, const world::World& world,
                               const world::EpisodeSets& episodes) {
  trainer::TrainState state = trainer::init_train_state(config);
  trainer::train_joint(state, config, world, episodes);
  return state.params;
}

AblationTable run_ablation(const trainer::RunConfig& base, const std::vector<objectives::Switches>& grid,
                           const std::vector<std::uint64_t>& seeds, const world::World& world,
                           const world::EpisodeSets& episodes, const std::vector<std::string>& eval_splits,
                           const AblationHooks& hooks) {
  if (grid.empty()) throw trainer::ConfigError("ablation grid is empty");
  if (seeds.empty()) throw trainer::ConfigError("ablation needs at least one seed");
  const auto splits = select_splits(episodes, eval_splits);
  AblationTable table;
  table.seeds = seeds;
  for (const auto& [name, eps] : splits) table.splits.push_back(name);
  for (const auto& sw : grid) {
    if (!sw.any()) throw trainer::ConfigError("ablation row with every term switched off");
    AblationRow row;
    row.switches = sw;
    for (auto seed : seeds) {
      trainer::RunConfig cfg = base;
      cfg.seed = seed;
      cfg.switches = sw;
      cfg.validate();
      agent::AgentParams params = hooks.train ? hooks.train(cfg) : train_model(cfg, world, episodes);
      MetricsReport rep;
      rep.variant = Variant::kTta;
      rep.config_hash = trainer::model_hash(cfg);
      rep.seeds = {seed};
      SeedResult sr;
      sr.seed = seed;
      for (const auto& [name, eps] : splits) {
        auto outs = evaluate_episodes(params, cfg, world, eps, Variant::kTta, seed);
        std::vector<MetricRow> rows;
        for (const auto& o : outs) rows.push_back(o.row);
        sr.aggregates[name] = aggregate(rows);
        row.per_seed[name].push_back(sr.aggregates[name]);
        sr.episodes[name] = std::move(outs);
        rep.splits.push_back(name);
      }
      rep.per_seed.push_back(std::move(sr));
      for (const auto& name : rep.splits) rep.summary[name] = summarize({rep.per_seed[0].aggregates.at(name)});
      if (hooks.on_report) hooks.on_report(sw, seed, rep);
    }
    for (const auto& [name, aggs] : row.per_seed) row.summary[name] = summarize(aggs);
    table.rows.push_back(std::move(row));
  }
  return table;
}

json ablation_to_json(const AblationTable& table) {
  json rows = json::array();
  for (const auto& r : table.rows) {
    json summary = json::object();
    json per_seed = json::object();
    for (const auto& [name, s] : r.summary) summary[name] = summary_to_json(s);
    for (const auto& [name, aggs] : r.per_seed) {
      json arr = json::array();
      for (const auto& a : aggs) arr.push_back(aggregate_to_json(a));
      per_seed[name] = arr;
    }
    rows.push_back({{"switches", {{"ml", r.switches.ml}, {"cl_il", r.switches.cl_il}, {"cl_rl", r.switches.cl_rl}}},
                    {"name", trainer::switches_name(r.switches)},
                    {"summary", summary},
                    {"per_seed", per_seed}});
  }
  return {{"format", "tvc-ablation"}, {"version", 1}, {"seeds", table.seeds}, {"splits", table.splits}, {"rows", rows}};
}

std::string ablation_to_table(const AblationTable& table) {
  std::vector<std::string> header{"#", "ML", "CL_IL", "CL_RL"};
  for (const auto& s : table.splits) {
    for (const char* m : {"TL", "NE", "SR", "SPL"}) header.push_back(s + ":" + m);
  }
  std::vector<std::vector<std::string>> cells{header};
  int idx = 1;
  for (const auto& r : table.rows) {
    std::vector<std::string> row{std::to_string(idx++), r.switches.ml ? "x" : "", r.switches.cl_il ? "x" : "",
                                 r.switches.cl_rl ? "x" : ""};
    for (const auto& s : table.splits) {
      const auto& m = r.summary.at(s).mean;
      row.push_back(fixed(m.tl, 2));
      row.push_back(fixed(m.ne, 2));
      row.push_back(fixed(m.sr * 100.0, 2));
      row.push_back(fixed(m.spl * 100.0, 2));
    }
    cells.push_back(std::move(row));
  }
  std::string out = "seeds:";
  for (auto s : table.seeds) out += " " + std::to_string(s);
  out += "  (test-time adapted; SR, SPL in %; seed means)\n";
  return out + render_table(cells);
}

}  // namespace tvc::evalkit
