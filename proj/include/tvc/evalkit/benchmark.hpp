#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "tvc/agent/agent.hpp"
#include "tvc/evalkit/metrics.hpp"
#include "tvc/trainer/config.hpp"
#include "tvc/trainer/trainer.hpp"
#include "tvc/world/episodes.hpp"

namespace tvc::evalkit {

enum class Variant { kBase, kNnc, kTta };

std::string_view variant_name(Variant v);
Variant parse_variant(std::string_view name);

struct EpisodeOutcome {
  TrajectoryRecord trajectory;
  MetricRow row;
  std::vector<double> entropy_curve;  // adapted runs only
};

/// Runs one model over `episodes`: greedy for base/nnc, adapted for tta.
std::vector<EpisodeOutcome> evaluate_episodes(const agent::AgentParams& params, const trainer::RunConfig& config,
                                              const world::World& world,
                                              const std::vector<world::Episode>& episodes, Variant variant,
                                              std::uint64_t seed);

/// One trained model and the seed used for its adaptation stream.
struct SeedModel {
  std::uint64_t seed = 0;
  const agent::AgentParams* params = nullptr;
  trainer::RunConfig config;
};

struct SplitSummary {
  Aggregate mean;
  Aggregate stddev;  // population std over seeds
};

struct SeedResult {
  std::uint64_t seed = 0;
  std::map<std::string, Aggregate> aggregates;                  // by split
  std::map<std::string, std::vector<EpisodeOutcome>> episodes;  // by split
};

struct MetricsReport {
  Variant variant = Variant::kNnc;
  std::string config_hash;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> splits;
  std::vector<SeedResult> per_seed;
  std::map<std::string, SplitSummary> summary;
};

/// Evaluates every model on the same episode sets. base requires models
/// trained without contrastive terms and nnc/tta require models trained with
/// them; violations throw trainer::CheckpointMismatch.
MetricsReport run_benchmark(const std::vector<SeedModel>& models, const world::World& world,
                            const std::map<std::string, std::vector<world::Episode>>& splits, Variant variant);

SplitSummary summarize(const std::vector<Aggregate>& per_seed);

nlohmann::json report_to_json(const MetricsReport& report, bool include_episodes = true);
/// Aligned-column table: one row per split with mean and std.
std::string report_to_table(const MetricsReport& report);

/// Line-delimited per-episode records with node coordinates for plotting.
std::string trajectory_log(const MetricsReport& report, const world::World& world,
                           const std::map<std::string, std::vector<world::Episode>>& splits);

// ---- ablation ----------------------------------------------------------------

/// Parses "full" (all seven combinations) or a comma list of '+'-joined
/// switch names, e.g. "ml+cl_il,cl_il+cl_rl".
std::vector<objectives::Switches> parse_grid(const std::string& spec);

struct AblationRow {
  objectives::Switches switches;
  std::map<std::string, SplitSummary> summary;                  // by split
  std::map<std::string, std::vector<Aggregate>> per_seed;       // by split, in seed order
};

struct AblationTable {
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> splits;
  std::vector<AblationRow> rows;
};

struct AblationHooks {
  /// Supplies the trained model for (switches, seed); lets callers cache or persist checkpoints.
  std::function<agent::AgentParams(const trainer::RunConfig&)> train;
  std::function<void(const objectives::Switches&, std::uint64_t seed, const MetricsReport&)> on_report;
};

/// Trains one model per switch combination and seed, evaluates each with
/// test-time adaptation, and tabulates seed means.
AblationTable run_ablation(const trainer::RunConfig& base, const std::vector<objectives::Switches>& grid,
                           const std::vector<std::uint64_t>& seeds, const world::World& world,
                           const world::EpisodeSets& episodes, const std::vector<std::string>& eval_splits,
                           const AblationHooks& hooks = {});

nlohmann::json ablation_to_json(const AblationTable& table);
std::string ablation_to_table(const AblationTable& table);

/// Named evaluation splits ("train", "val_seen", "val_unseen").
std::map<std::string, std::vector<world::Episode>> select_splits(const world::EpisodeSets& episodes,
                                                                 const std::vector<std::string>& names);

/// Default trainer used when no hook is supplied.
agent::AgentParams train_model(const trainer::RunConfig& config, const world::World& world,
                               const world::EpisodeSets& episodes);

}  // namespace tvc::evalkit
