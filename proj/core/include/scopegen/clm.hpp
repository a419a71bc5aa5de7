#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "scopegen/calibrator.hpp"
#include "scopegen/filters.hpp"
#include "scopegen/model.hpp"
#include "scopegen/oracle.hpp"
#include "scopegen/types.hpp"

namespace scopegen {

/// Learn-then-test levels: P[P(A=1 | D_cal) >= 1 - beta1] >= 1 - beta2.
struct ClmRiskPair {
  double beta1 = 0.0;
  double beta2 = 0.0;
};

/// Ten beta2 values equidistant in [alpha/15, alpha/5] with
/// beta1 = (alpha - beta2)/(1 - beta2), so beta1 + beta2 - beta1 beta2 = alpha.
/// `printed_variant` uses beta1 = (1 - alpha - beta2)/(1 - beta2) instead.
std::vector<ClmRiskPair> beta_grid(double alpha, bool printed_variant = false);

/// (1 - beta1)(1 - beta2) <= 1 - alpha + 1e-12.
bool ltt_bound_check(const ClmRiskPair& pair, double alpha);

/// P(Bin(n, p) <= k), summed exactly in log space.
double binomial_lower_tail(std::size_t n, double p, std::size_t k);

enum class StopScore { count, sum, max };

/// One point of the three-dimensional CLM grid. A candidate is skipped if its
/// quality is below `quality_threshold` or its similarity to an accepted
/// item exceeds `similarity_threshold`; sampling stops once the set score
/// reaches `stop_threshold`.
struct ClmConfig {
  double similarity_threshold = 1.0;
  double quality_threshold = 0.0;
  double stop_threshold = kInfinity;

  bool operator==(const ClmConfig&) const = default;
};

struct ClmGrid {
  std::vector<double> similarity;
  std::vector<double> quality;
  std::vector<double> stop;

  /// Cartesian product, similarity-major.
  std::vector<ClmConfig> configs() const;
  std::size_t size() const { return similarity.size() * quality.size() * stop.size(); }
};

/// Every draw of one calibration instance with its verdict.
struct ClmInstance {
  std::uint64_t condition_id = 0;
  std::vector<Output> draws;
  std::vector<bool> admissible;
};

struct ClmOptions {
  /// Points per grid dimension when `grid` is not supplied.
  std::size_t grid_points = 5;
  std::optional<ClmGrid> grid;
  StopScore stop = StopScore::sum;
  SimilarityFn similarity;
  GenerationBudget budget;
  Seed seed = 0;
  /// Fraction of instances used for the Pareto ordering (split A).
  double split_fraction = 0.5;
};

struct ClmResult {
  bool rejected = true;
  std::optional<ClmConfig> selected;
  ClmRiskPair pair;
  ClmGrid grid;
  /// Frontier configs (indices into grid.configs()) in testing order.
  std::vector<std::size_t> sequence;
  /// Number of nulls rejected along the sequence.
  std::size_t rejections = 0;
  std::size_t query_count = 0;
  std::vector<std::size_t> per_instance_queries;
  std::size_t max = 0;
};

/// Indices of the draws kept under `config`, in draw order.
std::vector<std::size_t> clm_select(std::span<const Output> draws, const ClmConfig& config,
                                    StopScore stop, const SimilarityFn& similarity);

/// Draws exactly budget.max candidates per instance and queries every one.
std::vector<ClmInstance> clm_collect(std::span<const Example> data,
                                     const GenerativeModel& generator, AdmissionOracle& oracle,
                                     GenerationBudget budget, Seed seed, std::size_t workers = 1);

/// Data-driven grid: quantiles of the observed quality and stop scores plus a
/// disabled endpoint in every dimension.
ClmGrid default_grid(std::span<const ClmInstance> instances, std::size_t points, StopScore stop);

/// Non-dominated configs ordered by ascending risk, ties by ascending size.
std::vector<std::size_t> pareto_sequence(std::span<const double> risks,
                                         std::span<const double> sizes);

/// Walks `sequence` rejecting H0: risk > beta1 while p <= beta2. Returns the
/// number of rejected nulls; the last rejected config is sequence[r-1].
std::size_t fixed_sequence_walk(std::span<const std::size_t> sequence,
                                std::span<const std::size_t> inadmissible_counts,
                                std::size_t n, const ClmRiskPair& pair);

/// Pareto ordering on split A, fixed-sequence testing on split B.
ClmResult clm_fit(std::span<const ClmInstance> instances, const ClmOptions& options,
                  const ClmRiskPair& pair);

ClmResult clm_calibrate(std::span<const Example> data, const GenerativeModel& generator,
                        AdmissionOracle& oracle, const ClmOptions& options,
                        const ClmRiskPair& pair);

/// clm_calibrate with budget.max = 10.
ClmResult clm_reduced_max(std::span<const Example> data, const GenerativeModel& generator,
                          AdmissionOracle& oracle, ClmOptions options, const ClmRiskPair& pair);

/// Grid search over beta_grid(alpha) on shared draws. Picks the non-rejected
/// pair whose config has the lowest empirical admissibility on all data.
ClmResult clm_calibrate_best(std::span<const Example> data, const GenerativeModel& generator,
                             AdmissionOracle& oracle, const ClmOptions& options, double alpha);

/// Prediction with a calibrated CLM config; entire space if rejected.
PredictionSet clm_predict(const Condition& condition, const GenerativeModel& generator,
                          const ClmResult& result, const ClmOptions& options, Seed seed);

}  // namespace scopegen
