#include "scopegen/predictor.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "scopegen/errors.hpp"

namespace scopegen {

std::size_t PredictPipeline::calibrated_stage_count() const {
  std::size_t k = 1;
  for (const auto& f : filters) k += f.calibrated() ? 1 : 0;
  return k;
}

std::optional<std::size_t> PredictPipeline::lambda_index(std::size_t stage) const {
  if (stage == 0) return 0;
  if (stage > filters.size()) throw InvalidInput(fmt::format("no pipeline stage {}", stage));
  if (!filters[stage - 1].calibrated()) return std::nullopt;
  std::size_t index = 1;
  for (std::size_t s = 1; s < stage; ++s) index += filters[s - 1].calibrated() ? 1 : 0;
  return index;
}

const PredictionSet& PredictionTrace::final_set() const {
  static const PredictionSet kWholeSpace = PredictionSet::whole_space();
  if (entire_space || stages.empty()) return kWholeSpace;
  return stages.back().set;
}

Seed draw_seed(Seed instance_seed, std::size_t draw) { return mix_seed(instance_seed, draw); }

Seed stage_seed(Seed instance_seed, std::size_t stage) {
  return mix_seed(instance_seed ^ 0x5ca1ab1e0ddba11ULL, stage);
}

namespace {

double lambda_for(const PredictPipeline& pipeline, std::size_t index) {
  if (index >= pipeline.thresholds.lambdas.size()) {
    throw InvalidInput(fmt::format("pipeline has no threshold for calibrated stage {}", index));
  }
  return pipeline.thresholds.lambdas[index];
}

StageTrace run_generation(const Condition& condition, const PredictPipeline& pipeline,
                          Seed seed) {
  const double lambda = lambda_for(pipeline, 0);
  StageTrace trace;
  trace.set.source_stage = 0;
  NonConformityState state;
  while (true) {
    if (state.step >= pipeline.hard_cap) {
      trace.cap_hit = true;
      spdlog::info("generation for condition {} hit the hard cap of {}", condition.id,
                   pipeline.hard_cap);
      break;
    }
    Output y = pipeline.generator->sample(condition, draw_seed(seed, state.step));
    y.id = state.step;
    state = update_generation(state, y, pipeline.generation_rule);
    trace.nus.push_back(state.nu);
    if (state.nu > lambda) {
      trace.threshold_reached = true;
      break;
    }
    trace.set.items.push_back(std::move(y));
  }
  return trace;
}

StageTrace run_filter(const PredictionSet& previous, const FilterSpec& filter, double lambda,
                      std::size_t stage, Seed seed) {
  StageTrace trace;
  trace.set.source_stage = stage;
  GreedySampler sampler(previous, filter, stage_seed(seed, stage));
  NonConformityState state;
  while (true) {
    if (sampler.exhausted()) {
      trace.exhausted = true;
      break;
    }
    const Output& y = previous.items[sampler.next()];
    trace.set.items.push_back(y);
    state = apply_update(state, y, trace.set.items, filter.rule);
    trace.nus.push_back(state.nu);
    if (state.nu > lambda) {
      trace.set.items.pop_back();
      trace.threshold_reached = true;
      break;
    }
  }
  return trace;
}

}  // namespace

PredictionTrace predict_trace(const Condition& condition, const PredictPipeline& pipeline,
                              Seed seed, std::optional<std::size_t> through_stage) {
  if (!pipeline.generator) throw InvalidInput("predict: pipeline has no generator");
  const std::size_t last = through_stage.value_or(pipeline.stage_count() - 1);
  if (last >= pipeline.stage_count()) {
    throw InvalidInput(fmt::format("predict: stage {} out of range", last));
  }

  PredictionTrace trace;
  if (pipeline.thresholds.rejected) {
    trace.entire_space = true;
    return trace;
  }
  pipeline.generation_rule.validate();
  trace.stages.push_back(run_generation(condition, pipeline, seed));
  for (std::size_t s = 1; s <= last; ++s) {
    const FilterSpec& filter = pipeline.filters[s - 1];
    const PredictionSet& previous = trace.stages.back().set;
    if (!filter.calibrated()) {
      StageTrace stage;
      stage.set = dedup(previous, filter.equivalent);
      stage.set.source_stage = s;
      trace.stages.push_back(std::move(stage));
      continue;
    }
    filter.rule.validate();
    const double lambda = lambda_for(pipeline, *pipeline.lambda_index(s));
    trace.stages.push_back(run_filter(previous, filter, lambda, s, seed));
  }
  return trace;
}

PredictionSet predict(const Condition& condition, const PredictPipeline& pipeline, Seed seed) {
  return predict_trace(condition, pipeline, seed).final_set();
}

std::vector<std::size_t> predict_integer_set(const Condition& condition, std::size_t stage,
                                             const PredictPipeline& pipeline, Seed seed) {
  const auto trace = predict_trace(condition, pipeline, seed, stage);
  if (trace.entire_space) throw InvalidInput("predict_integer_set: calibration was rejected");
  std::vector<std::size_t> out(trace.stages[stage].set.size());
  for (std::size_t l = 0; l < out.size(); ++l) out[l] = l + 1;
  return out;
}

}  // namespace scopegen
