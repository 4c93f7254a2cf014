#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "tvc/evalkit/benchmark.hpp"

namespace tvc::evalkit {

/// Supplies a trained model for a fully specified config.
using TrainFn = std::function<agent::AgentParams(const trainer::RunConfig&)>;

struct ReproductionOptions {
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::vector<std::string> splits{"val_seen", "val_unseen"};
  /// Ablation rows; the full model is added when missing.
  std::vector<objectives::Switches> grid{
      {true, true, true}, {true, false, true}, {true, true, false}, {false, true, true}};
  TrainFn train;                                   // defaults to train_model
  std::function<void(const std::string&)> progress;  // one line per finished stage
};

struct Reproduction {
  MetricsReport base;  // ML-only model, greedy
  MetricsReport nnc;   // full model, greedy
  MetricsReport tta;   // full model, adapted per episode
  AblationTable ablation;
};

Reproduction reproduce(const trainer::RunConfig& config, const world::World& world,
                       const world::EpisodeSets& episodes, const ReproductionOptions& options);

/// Concatenates single-seed reports of one variant and recomputes the summary.
MetricsReport merge_reports(const std::vector<MetricsReport>& parts);

/// Fraction of episodes whose entropy curve ends strictly below where it started.
struct EntropyDescent {
  std::size_t episodes = 0;
  std::size_t decreased = 0;
  double fraction() const { return episodes ? double(decreased) / double(episodes) : 0.0; }
};
EntropyDescent entropy_descent(const MetricsReport& report, const std::string& split);

/// Mean entropy per adaptation step over all episodes of `split`, plus the per-episode curves.
nlohmann::json entropy_series(const MetricsReport& report, const std::string& split);

struct ShiftPoint {
  double shift = 0.0;
  SplitSummary unseen;
  SplitSummary seen;
};

/// Re-evaluates trained models on worlds rebuilt with other unseen-style offsets.
/// Seen scenes do not depend on the offset, so the models stay in-distribution there.
std::vector<ShiftPoint> shift_sweep(const std::vector<SeedModel>& models, const std::vector<double>& shifts,
                                    Variant variant);
nlohmann::json shift_sweep_to_json(const std::vector<ShiftPoint>& points, Variant variant);

std::string reproduction_table(const Reproduction& r);
nlohmann::json reproduction_to_json(const Reproduction& r);

}  // namespace tvc::evalkit
