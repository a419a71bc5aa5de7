#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "scopegen/calibrator.hpp"
#include "scopegen/nonconformity.hpp"
#include "scopegen/types.hpp"
#include "scopegen/world.hpp"

namespace scopegen {

enum class Method { scope_gen, scope_gen_gen_only, scope_gen_flipped, clm, clm_reduced_max };

std::string_view to_string(Method method);
Method method_from_string(std::string_view text);
std::string_view to_string(UpdateKind kind);
UpdateKind update_kind_from_string(std::string_view text);

struct ExperimentConfig {
  Method method = Method::scope_gen;
  double alpha = 0.3;
  UpdateKind nonconformity = UpdateKind::sum;
  double gamma = kDefaultSumGamma;
  std::size_t n_calibration = 600;
  std::size_t n_test = 300;
  std::size_t trials = 1;
  std::size_t max = 20;
  std::optional<Seed> seed;
  WorldParams world;
  std::string output;
  int emphasis = 5;
  std::size_t workers = 1;
  std::size_t clm_grid_points = 5;
  /// When false, time_seconds is written as 0 so reruns are byte-identical.
  bool record_time = true;

  /// Throws InvalidInput if a probability is outside (0,1), trials is 0, etc.
  void validate() const;
};

ExperimentConfig parse_config(std::string_view json_text);
ExperimentConfig load_config(const std::filesystem::path& path);
std::string to_json(const ExperimentConfig& config);

/// World, data and seeds of one trial, all derived from the run seed.
struct TrialSetup {
  std::shared_ptr<SyntheticWorld> world;
  std::vector<Example> calibration;
  std::vector<Example> test;
  Seed calibration_seed = 0;
  Seed test_seed = 0;
};

TrialSetup prepare_trial(const ExperimentConfig& config, std::size_t trial);

bool is_clm(Method method);

/// Calibration settings for the scope-gen family on `world`.
CalibrationConfig scope_gen_config(const ExperimentConfig& config, const SyntheticWorld& world,
                                   Seed seed);

struct MetricsRow {
  std::string method;
  std::size_t trial = 0;
  double queries_mean = 0.0;
  double time_seconds = 0.0;
  /// NaN for rejected calibrations (excluded from set-size means).
  double set_size_mean = 0.0;
  double frac_reject = 0.0;
  double admissibility_empirical = 0.0;
};

inline constexpr std::string_view kCsvHeader =
    "method,trial,queries_mean,time_seconds,set_size_mean,frac_reject,admissibility_empirical";

/// One trial: fresh calibration and test conditions from the world, then
/// calibrate `config.method` and evaluate on the test conditions.
MetricsRow run_trial(const ExperimentConfig& config, std::size_t trial);

/// Runs config.trials trials (concurrently up to config.workers).
std::vector<MetricsRow> run_experiment(const ExperimentConfig& config);

/// CSV with kCsvHeader plus `<path>.json` holding the resolved config.
void emit_results(std::span<const MetricsRow> rows, const std::filesystem::path& path,
                  const ExperimentConfig& config);
std::string to_csv(std::span<const MetricsRow> rows);
std::vector<MetricsRow> parse_csv(std::string_view text);
std::vector<MetricsRow> read_results(const std::filesystem::path& path);

/// Mean over rows, skipping NaN entries.
struct MetricsSummary {
  double queries_mean = 0.0;
  double time_seconds = 0.0;
  double set_size_mean = 0.0;
  double frac_reject = 0.0;
  double admissibility_empirical = 0.0;
};
MetricsSummary summarize(std::span<const MetricsRow> rows);

}  // namespace scopegen
