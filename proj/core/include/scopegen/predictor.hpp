#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <vector>

#include "scopegen/filters.hpp"
#include "scopegen/model.hpp"
#include "scopegen/nonconformity.hpp"
#include "scopegen/types.hpp"

namespace scopegen {

/// One lambda per calibrated stage (generation first, then each non-dedup filter).
struct Thresholds {
  std::vector<double> lambdas;
  bool rejected = false;
};

struct PredictPipeline {
  std::shared_ptr<const GenerativeModel> generator;
  UpdateRule generation_rule = UpdateRule::sum();
  std::vector<FilterSpec> filters;
  Thresholds thresholds;
  /// Safety bound on the generation loop.
  std::size_t hard_cap = 200;

  /// Generation stage plus every filter, dedup included.
  std::size_t stage_count() const { return 1 + filters.size(); }
  /// Stages that own a lambda.
  std::size_t calibrated_stage_count() const;
  /// Index into thresholds.lambdas for pipeline stage `stage`, or nullopt for dedup.
  std::optional<std::size_t> lambda_index(std::size_t stage) const;
};

struct StageTrace {
  PredictionSet set;
  /// nu after every update, including the one that broke the loop.
  std::vector<double> nus;
  bool threshold_reached = false;
  /// Filter stage ran out of candidates (C_(s) = C_(s-1)).
  bool exhausted = false;
  bool cap_hit = false;
};

struct PredictionTrace {
  std::vector<StageTrace> stages;
  bool entire_space = false;

  const PredictionSet& final_set() const;
};

/// Seed of the candidate stream for draw j of a condition.
Seed draw_seed(Seed instance_seed, std::size_t draw);
/// Seed of the greedy sampler at pipeline stage s > 0.
Seed stage_seed(Seed instance_seed, std::size_t stage);

/// Runs the sequential prediction through `through_stage` (default: all stages).
/// Only the lambdas of the executed stages need to be present.
PredictionTrace predict_trace(const Condition& condition, const PredictPipeline& pipeline,
                              Seed seed, std::optional<std::size_t> through_stage = std::nullopt);

/// Final-stage prediction set, or the entire-space sentinel after rejection.
PredictionSet predict(const Condition& condition, const PredictPipeline& pipeline, Seed seed);

/// {1, ..., j} where j is the number of candidates accepted at `stage`.
std::vector<std::size_t> predict_integer_set(const Condition& condition, std::size_t stage,
                                             const PredictPipeline& pipeline, Seed seed);

}  // namespace scopegen
