#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "scopegen/conformal.hpp"
#include "scopegen/filters.hpp"
#include "scopegen/model.hpp"
#include "scopegen/nonconformity.hpp"
#include "scopegen/oracle.hpp"
#include "scopegen/predictor.hpp"
#include "scopegen/types.hpp"

namespace scopegen {

/// Disjoint contiguous folds [begin, end) covering 0..n, one per calibrated stage.
struct CalibrationSplit {
  std::vector<std::pair<std::size_t, std::size_t>> folds;

  std::size_t fold_size(std::size_t k) const { return folds[k].second - folds[k].first; }
  /// Cumulative boundaries n_(0), n_(1), ...
  std::vector<std::size_t> boundaries() const;
};

/// Largest-remainder split of n items by `proportions` (normalized internally).
/// Throws InvalidInput if any fold would be empty.
CalibrationSplit split_data(std::size_t n, std::span<const double> proportions);
CalibrationSplit split_data(std::size_t n, std::size_t stage_count);

struct GenerationBudget {
  std::size_t max = 20;
};

/// Outcome of one calibration instance at one stage.
struct InstanceAudit {
  std::uint64_t condition_id = 0;
  std::size_t queries = 0;
  /// +inf when no admissible candidate was found.
  double nu = kInfinity;
  /// Filter stages only: the previous set was inadmissible, no score recorded.
  bool skipped = false;
  bool failed = false;
};

struct StageCalibration {
  ConformalThreshold threshold;
  std::vector<InstanceAudit> instances;
  /// Number of instances contributing a score (Alg. 3's m; fold size for generation).
  std::size_t m_effective = 0;

  std::size_t query_count() const;
};

/// Draw until the first admissible candidate or `budget.max` draws. Oracle
/// calls per instance equal the 1-based index of the first admissible draw.
StageCalibration calibrate_generation(std::span<const Example> fold,
                                      const GenerativeModel& generator,
                                      const UpdateRule& rule, GenerationBudget budget,
                                      AdmissionOracle& oracle, double alpha, Seed seed,
                                      std::size_t workers = 1);

/// Calibrates pipeline stage `stage` (> 0). `previous` must carry lambdas for
/// every calibrated stage before it. Instances whose previous set is
/// inadmissible contribute no score; m = 0 rejects the stage.
StageCalibration calibrate_filter(std::span<const Example> fold, const PredictPipeline& previous,
                                  std::size_t stage, AdmissionOracle& oracle, double alpha,
                                  Seed seed, std::size_t workers = 1);

struct CalibrationConfig {
  UpdateRule generation_rule = UpdateRule::sum();
  std::vector<FilterSpec> filters;
  double alpha = 0.3;
  /// Generation-stage weighting M; 0 splits the risk uniformly.
  int emphasis = 5;
  /// Fold proportions per calibrated stage; empty means equal.
  std::vector<double> proportions;
  GenerationBudget budget;
  Seed seed = 0;
  std::size_t workers = 1;
  /// Prediction-time hard cap as a multiple of budget.max.
  std::size_t hard_cap_multiplier = 10;
};

struct CalibrationResult {
  std::vector<double> lambdas;
  RiskLevels risk;
  bool rejected = false;
  /// Calibrated-stage index (0 = generation) of the first rejecting stage.
  std::optional<std::size_t> rejected_stage;
  std::size_t query_count = 0;
  /// Oracle calls per calibration instance, in data order.
  std::vector<std::size_t> per_instance_queries;
  /// Alg. 3's m for each calibrated filter stage.
  std::vector<std::size_t> m_effective;
  CalibrationSplit split;

  Thresholds thresholds() const { return {lambdas, rejected}; }
  bool operator==(const CalibrationResult& other) const;
};

/// Splits data, allocates risk and calibrates each stage on its own fold in
/// pipeline order. Stages after a rejection are not run; their lambda is +inf.
CalibrationResult calibrate(std::span<const Example> data,
                            std::shared_ptr<const GenerativeModel> generator,
                            AdmissionOracle& oracle, const CalibrationConfig& config);

PredictPipeline make_pipeline(std::shared_ptr<const GenerativeModel> generator,
                              const CalibrationConfig& config, const CalibrationResult& result);

/// Seed used for calibration instance `condition_id` under a run seed.
Seed instance_seed(Seed run_seed, std::uint64_t condition_id);

}  // namespace scopegen
