#include "scopegen/calibrator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "parallel.hpp"
#include "scopegen/errors.hpp"

namespace scopegen {

std::vector<std::size_t> CalibrationSplit::boundaries() const {
  std::vector<std::size_t> out;
  for (const auto& f : folds) out.push_back(f.second);
  return out;
}

CalibrationSplit split_data(std::size_t n, std::span<const double> proportions) {
  if (proportions.empty()) throw InvalidInput("split_data: no proportions");
  const double total = std::accumulate(proportions.begin(), proportions.end(), 0.0);
  for (double p : proportions) {
    if (!(p > 0.0) || !std::isfinite(p)) {
      throw InvalidInput("split_data: proportions must be positive and finite");
    }
  }
  if (n < proportions.size()) {
    throw InvalidInput(
        fmt::format("split_data: cannot split {} items into {} folds", n, proportions.size()));
  }

  // Largest remainder: floor every quota, then hand the leftover items to the
  // largest fractional parts, earlier folds first on ties.
  const std::size_t k = proportions.size();
  std::vector<std::size_t> sizes(k);
  std::vector<double> fraction(k);
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < k; ++i) {
    const double quota = static_cast<double>(n) * proportions[i] / total;
    sizes[i] = static_cast<std::size_t>(std::floor(quota + 1e-9));
    fraction[i] = quota - static_cast<double>(sizes[i]);
    assigned += sizes[i];
  }
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return fraction[a] > fraction[b]; });
  for (std::size_t i = 0; assigned < n; ++i, ++assigned) ++sizes[order[i % k]];

  CalibrationSplit split;
  std::size_t begin = 0;
  for (std::size_t i = 0; i < k; ++i) {
    if (sizes[i] == 0) throw InvalidInput(fmt::format("split_data: fold {} would be empty", i));
    split.folds.emplace_back(begin, begin + sizes[i]);
    begin += sizes[i];
  }
  return split;
}

CalibrationSplit split_data(std::size_t n, std::size_t stage_count) {
  const std::vector<double> equal(stage_count, 1.0);
  return split_data(n, equal);
}

std::size_t StageCalibration::query_count() const {
  std::size_t total = 0;
  for (const auto& a : instances) total += a.queries;
  return total;
}

Seed instance_seed(Seed run_seed, std::uint64_t condition_id) {
  return mix_seed(run_seed, condition_id);
}

namespace {

std::vector<double> finite_scores(const std::vector<InstanceAudit>& audits, bool include_inf) {
  std::vector<double> out;
  for (const auto& a : audits) {
    if (a.skipped) continue;
    if (!include_inf && std::isinf(a.nu)) continue;
    out.push_back(a.nu);
  }
  return out;
}

}  // namespace

StageCalibration calibrate_generation(std::span<const Example> fold,
                                      const GenerativeModel& generator,
                                      const UpdateRule& rule, GenerationBudget budget,
                                      AdmissionOracle& oracle, double alpha, Seed seed,
                                      std::size_t workers) {
  if (fold.empty()) throw InvalidInput("calibrate_generation: empty fold");
  if (budget.max == 0) throw InvalidInput("calibrate_generation: budget.max must be >= 1");
  if (!rule.is_generation()) throw InvalidInput("calibrate_generation: not a generation rule");
  rule.validate();

  StageCalibration out;
  out.instances.resize(fold.size());
  detail::parallel_for(fold.size(), workers, [&](std::size_t i) {
    const Example& example = fold[i];
    const Seed s = instance_seed(seed, example.condition.id);
    InstanceAudit& audit = out.instances[i];
    audit.condition_id = example.condition.id;
    NonConformityState state;
    while (state.step < budget.max) {
      Output y;
      try {
        y = generator.sample(example.condition, draw_seed(s, state.step));
      } catch (const std::exception& e) {
        spdlog::warn("generator failed on condition {}: {}", example.condition.id, e.what());
        audit.failed = true;
        break;
      }
      y.id = state.step;
      state = update_generation(state, y, rule);
      const bool admissible =
          oracle.query({example.condition, y, example.reference, 0, audit.queries});
      ++audit.queries;
      if (admissible) {
        audit.nu = state.nu;
        break;
      }
    }
  });

  const auto scores = finite_scores(out.instances, true);
  out.m_effective = scores.size();
  out.threshold = conformal_quantile(std::span<const double>(scores), alpha);
  return out;
}

StageCalibration calibrate_filter(std::span<const Example> fold, const PredictPipeline& previous,
                                  std::size_t stage, AdmissionOracle& oracle, double alpha,
                                  Seed seed, std::size_t workers) {
  if (fold.empty()) throw InvalidInput("calibrate_filter: empty fold");
  if (stage == 0 || stage >= previous.stage_count()) {
    throw InvalidInput(fmt::format("calibrate_filter: invalid filter stage {}", stage));
  }
  if (previous.thresholds.rejected) {
    throw InvalidInput("calibrate_filter: previous stages were rejected");
  }
  const FilterSpec& filter = previous.filters[stage - 1];
  if (!filter.calibrated()) throw InvalidInput("calibrate_filter: dedup has no threshold");
  filter.rule.validate();

  StageCalibration out;
  out.instances.resize(fold.size());
  detail::parallel_for(fold.size(), workers, [&](std::size_t i) {
    const Example& example = fold[i];
    const Seed s = instance_seed(seed, example.condition.id);
    InstanceAudit& audit = out.instances[i];
    audit.condition_id = example.condition.id;
    audit.skipped = true;

    PredictionTrace trace;
    try {
      trace = predict_trace(example.condition, previous, s, stage - 1);
    } catch (const GeneratorError& e) {
      spdlog::warn("generator failed on condition {}: {}", example.condition.id, e.what());
      audit.failed = true;
      return;
    }
    const PredictionSet& source = trace.stages.back().set;

    GreedySampler sampler(source, filter, stage_seed(s, stage));
    std::vector<Output> current;
    NonConformityState state;
    while (!sampler.exhausted()) {
      const Output& y = source.items[sampler.next()];
      current.push_back(y);
      state = apply_update(state, y, current, filter.rule);
      const bool admissible =
          oracle.query({example.condition, y, example.reference, stage, audit.queries});
      ++audit.queries;
      if (admissible) {
        audit.nu = state.nu;
        audit.skipped = false;
        break;
      }
    }
  });

  const auto scores = finite_scores(out.instances, false);
  out.m_effective = scores.size();
  if (scores.empty()) {
    spdlog::warn("filter stage {}: every previous set was inadmissible", stage);
    out.threshold = ConformalThreshold{};
    out.threshold.rank = conformal_rank(0, alpha);
    return out;
  }
  out.threshold = conformal_quantile(std::span<const double>(scores), alpha);
  return out;
}

bool CalibrationResult::operator==(const CalibrationResult& other) const {
  auto folds_equal = split.folds == other.split.folds;
  return lambdas == other.lambdas && risk.per_stage == other.risk.per_stage &&
         rejected == other.rejected && rejected_stage == other.rejected_stage &&
         query_count == other.query_count &&
         per_instance_queries == other.per_instance_queries &&
         m_effective == other.m_effective && folds_equal;
}

PredictPipeline make_pipeline(std::shared_ptr<const GenerativeModel> generator,
                              const CalibrationConfig& config, const CalibrationResult& result) {
  PredictPipeline pipeline;
  pipeline.generator = std::move(generator);
  pipeline.generation_rule = config.generation_rule;
  pipeline.filters = config.filters;
  pipeline.thresholds = result.thresholds();
  pipeline.hard_cap = std::max<std::size_t>(1, config.hard_cap_multiplier * config.budget.max);
  return pipeline;
}

CalibrationResult calibrate(std::span<const Example> data,
                            std::shared_ptr<const GenerativeModel> generator,
                            AdmissionOracle& oracle, const CalibrationConfig& config) {
  if (!generator) throw InvalidInput("calibrate: no generator");
  if (data.empty()) throw InvalidInput("calibrate: no calibration data");

  CalibrationResult result;
  PredictPipeline pipeline = make_pipeline(generator, config, result);
  const std::size_t k = pipeline.calibrated_stage_count();

  if (!config.proportions.empty() && config.proportions.size() != k) {
    throw InvalidInput(fmt::format("calibrate: {} proportions for {} calibrated stages",
                                   config.proportions.size(), k));
  }
  result.split = config.proportions.empty() ? split_data(data.size(), k)
                                            : split_data(data.size(), config.proportions);
  result.risk = config.emphasis == 0 ? allocate_risk_uniform(config.alpha, k)
                                     : allocate_risk(config.alpha, k, config.emphasis);
  result.per_instance_queries.assign(data.size(), 0);

  auto fold_span = [&](std::size_t f) {
    const auto [begin, end] = result.split.folds[f];
    return data.subspan(begin, end - begin);
  };
  auto record = [&](std::size_t f, const StageCalibration& stage) {
    const std::size_t begin = result.split.folds[f].first;
    for (std::size_t i = 0; i < stage.instances.size(); ++i) {
      result.per_instance_queries[begin + i] = stage.instances[i].queries;
    }
    result.query_count += stage.query_count();
    result.lambdas.push_back(stage.threshold.lambda);
    if (stage.threshold.rejected && !result.rejected) {
      result.rejected = true;
      result.rejected_stage = f;
    }
  };

  const auto generation =
      calibrate_generation(fold_span(0), *generator, config.generation_rule, config.budget,
                           oracle, result.risk.per_stage[0], config.seed, config.workers);
  record(0, generation);

  std::size_t fold = 1;
  for (std::size_t s = 1; s < pipeline.stage_count() && !result.rejected; ++s) {
    if (!pipeline.filters[s - 1].calibrated()) continue;
    pipeline.thresholds.lambdas = result.lambdas;
    const auto stage = calibrate_filter(fold_span(fold), pipeline, s, oracle,
                                        result.risk.per_stage[fold], config.seed, config.workers);
    result.m_effective.push_back(stage.m_effective);
    record(fold, stage);
    ++fold;
  }
  while (result.lambdas.size() < k) result.lambdas.push_back(kInfinity);
  return result;
}

}  // namespace scopegen
