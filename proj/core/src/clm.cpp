#include "scopegen/clm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "parallel.hpp"
#include "scopegen/errors.hpp"
#include "scopegen/predictor.hpp"

namespace scopegen {

std::vector<ClmRiskPair> beta_grid(double alpha, bool printed_variant) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidInput("beta_grid: alpha must lie in (0, 1)");
  const double lo = alpha / 15.0;
  const double hi = alpha / 5.0;
  std::vector<ClmRiskPair> out;
  out.reserve(10);
  for (int i = 0; i < 10; ++i) {
    ClmRiskPair pair;
    pair.beta2 = lo + i * (hi - lo) / 9.0;
    pair.beta1 = printed_variant ? (1.0 - alpha - pair.beta2) / (1.0 - pair.beta2)
                                 : (alpha - pair.beta2) / (1.0 - pair.beta2);
    out.push_back(pair);
  }
  return out;
}

bool ltt_bound_check(const ClmRiskPair& pair, double alpha) {
  return (1.0 - pair.beta1) * (1.0 - pair.beta2) <= 1.0 - alpha + 1e-12;
}

double binomial_lower_tail(std::size_t n, double p, std::size_t k) {
  if (!(p >= 0.0 && p <= 1.0)) throw InvalidInput("binomial_lower_tail: p outside [0, 1]");
  if (k >= n) return 1.0;
  if (p == 0.0) return 1.0;
  if (p == 1.0) return 0.0;
  const double nn = static_cast<double>(n);
  const double log_p = std::log(p);
  const double log_q = std::log1p(-p);
  std::vector<double> terms;
  terms.reserve(k + 1);
  for (std::size_t i = 0; i <= k; ++i) {
    const double ii = static_cast<double>(i);
    terms.push_back(std::lgamma(nn + 1.0) - std::lgamma(ii + 1.0) - std::lgamma(nn - ii + 1.0) +
                    ii * log_p + (nn - ii) * log_q);
  }
  const double peak = *std::max_element(terms.begin(), terms.end());
  double sum = 0.0;
  for (double t : terms) sum += std::exp(t - peak);
  return std::clamp(std::exp(peak + std::log(sum)), 0.0, 1.0);
}

std::vector<ClmConfig> ClmGrid::configs() const {
  std::vector<ClmConfig> out;
  out.reserve(size());
  for (double s : similarity) {
    for (double q : quality) {
      for (double t : stop) out.push_back({s, q, t});
    }
  }
  return out;
}

std::vector<std::size_t> clm_select(std::span<const Output> draws, const ClmConfig& config,
                                    StopScore stop, const SimilarityFn& similarity) {
  std::vector<std::size_t> kept;
  double score = 0.0;
  for (std::size_t k = 0; k < draws.size(); ++k) {
    const Output& y = draws[k];
    if (y.quality < config.quality_threshold) continue;
    const bool redundant = std::any_of(kept.begin(), kept.end(), [&](std::size_t j) {
      const double sim = similarity ? similarity(y, draws[j]) : (same_payload(y, draws[j]) ? 1.0 : 0.0);
      return sim > config.similarity_threshold;
    });
    if (redundant) continue;
    kept.push_back(k);
    switch (stop) {
      case StopScore::count:
        score = static_cast<double>(kept.size());
        break;
      case StopScore::sum:
        score += y.quality;
        break;
      case StopScore::max:
        score = std::max(score, y.quality);
        break;
    }
    if (score >= config.stop_threshold) break;
  }
  return kept;
}

std::vector<ClmInstance> clm_collect(std::span<const Example> data,
                                     const GenerativeModel& generator, AdmissionOracle& oracle,
                                     GenerationBudget budget, Seed seed, std::size_t workers) {
  if (budget.max == 0) throw InvalidInput("clm_collect: budget.max must be >= 1");
  std::vector<ClmInstance> out(data.size());
  detail::parallel_for(data.size(), workers, [&](std::size_t i) {
    const Example& example = data[i];
    const Seed s = instance_seed(seed, example.condition.id);
    ClmInstance& instance = out[i];
    instance.condition_id = example.condition.id;
    for (std::size_t j = 0; j < budget.max; ++j) {
      Output y = generator.sample(example.condition, draw_seed(s, j));
      y.id = j;
      instance.admissible.push_back(
          oracle.query({example.condition, y, example.reference, 0, j}));
      instance.draws.push_back(std::move(y));
    }
  });
  return out;
}

namespace {

std::vector<double> quantile_points(std::vector<double> values, std::size_t points) {
  std::vector<double> out;
  if (values.empty() || points < 2) return out;
  std::sort(values.begin(), values.end());
  for (std::size_t i = 1; i < points; ++i) {
    const double level = static_cast<double>(i) / static_cast<double>(points);
    const auto idx = static_cast<std::size_t>(level * static_cast<double>(values.size() - 1));
    out.push_back(values[idx]);
  }
  return out;
}

void sort_unique(std::vector<double>& v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
}

struct GridEvaluation {
  std::vector<ClmConfig> configs;
  std::vector<double> risk_a;
  std::vector<double> size_a;
  std::vector<std::size_t> inadmissible_b;
  std::size_t n_b = 0;
};

struct SetOutcome {
  std::size_t size = 0;
  bool admissible = false;
};

SetOutcome evaluate(const ClmInstance& instance, const ClmConfig& config, const ClmOptions& options) {
  const auto kept = clm_select(instance.draws, config, options.stop, options.similarity);
  SetOutcome out;
  out.size = kept.size();
  out.admissible = std::any_of(kept.begin(), kept.end(),
                               [&](std::size_t k) { return instance.admissible[k]; });
  return out;
}

std::size_t split_point(std::size_t n, double fraction) {
  if (n < 2) throw InvalidInput("clm: need at least two instances for the A/B split");
  if (!(fraction > 0.0 && fraction < 1.0)) throw InvalidInput("clm: split fraction outside (0, 1)");
  const auto a = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  return std::clamp<std::size_t>(a, 1, n - 1);
}

GridEvaluation evaluate_grid(std::span<const ClmInstance> instances, const ClmOptions& options,
                             ClmGrid& grid) {
  const std::size_t n_a = split_point(instances.size(), options.split_fraction);
  const auto split_a = instances.first(n_a);
  const auto split_b = instances.subspan(n_a);
  grid = options.grid ? *options.grid : default_grid(split_a, options.grid_points, options.stop);
  if (grid.size() == 0) throw InvalidInput("clm: empty configuration grid");

  GridEvaluation eval;
  eval.configs = grid.configs();
  eval.n_b = split_b.size();
  for (const auto& config : eval.configs) {
    std::size_t misses = 0;
    double total_size = 0.0;
    for (const auto& instance : split_a) {
      const auto outcome = evaluate(instance, config, options);
      misses += outcome.admissible ? 0 : 1;
      total_size += static_cast<double>(outcome.size);
    }
    eval.risk_a.push_back(static_cast<double>(misses) / static_cast<double>(n_a));
    eval.size_a.push_back(total_size / static_cast<double>(n_a));
    std::size_t misses_b = 0;
    for (const auto& instance : split_b) misses_b += evaluate(instance, config, options).admissible ? 0 : 1;
    eval.inadmissible_b.push_back(misses_b);
  }
  return eval;
}

ClmResult walk(const GridEvaluation& eval, const ClmGrid& grid, std::span<const ClmInstance> instances,
               const ClmOptions& options, const ClmRiskPair& pair) {
  ClmResult result;
  result.pair = pair;
  result.grid = grid;
  result.max = options.budget.max;
  result.sequence = pareto_sequence(eval.risk_a, eval.size_a);
  result.rejections = fixed_sequence_walk(result.sequence, eval.inadmissible_b, eval.n_b, pair);
  result.rejected = result.rejections == 0;
  if (!result.rejected) result.selected = eval.configs[result.sequence[result.rejections - 1]];
  for (const auto& instance : instances) {
    result.per_instance_queries.push_back(instance.admissible.size());
    result.query_count += instance.admissible.size();
  }
  return result;
}

}  // namespace

ClmGrid default_grid(std::span<const ClmInstance> instances, std::size_t points, StopScore stop) {
  if (points == 0) throw InvalidInput("default_grid: need at least one point per dimension");
  ClmGrid grid;

  for (std::size_t i = 0; i < points; ++i) {
    grid.similarity.push_back(points == 1 ? 1.0
                                          : 0.5 + 0.5 * static_cast<double>(i) /
                                                      static_cast<double>(points - 1));
  }

  std::vector<double> qualities;
  std::vector<double> prefix_scores;
  for (const auto& instance : instances) {
    double score = 0.0;
    for (std::size_t k = 0; k < instance.draws.size(); ++k) {
      const double q = instance.draws[k].quality;
      qualities.push_back(q);
      switch (stop) {
        case StopScore::count:
          score = static_cast<double>(k + 1);
          break;
        case StopScore::sum:
          score += q;
          break;
        case StopScore::max:
          score = std::max(score, q);
          break;
      }
      prefix_scores.push_back(score);
    }
  }
  grid.quality = quantile_points(qualities, points);
  grid.quality.insert(grid.quality.begin(), 0.0);
  grid.stop = quantile_points(prefix_scores, points);
  grid.stop.push_back(kInfinity);
  sort_unique(grid.similarity);
  sort_unique(grid.quality);
  sort_unique(grid.stop);
  return grid;
}

std::vector<std::size_t> pareto_sequence(std::span<const double> risks,
                                         std::span<const double> sizes) {
  if (risks.size() != sizes.size()) throw InvalidInput("pareto_sequence: length mismatch");
  std::vector<std::size_t> order(risks.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (risks[a] != risks[b]) return risks[a] < risks[b];
    return sizes[a] < sizes[b];
  });
  // Ascending risk: a config is on the frontier iff it is strictly smaller
  // than everything with lower or equal risk.
  std::vector<std::size_t> frontier;
  double smallest = kInfinity;
  for (std::size_t idx : order) {
    if (sizes[idx] < smallest) {
      frontier.push_back(idx);
      smallest = sizes[idx];
    }
  }
  return frontier;
}

std::size_t fixed_sequence_walk(std::span<const std::size_t> sequence,
                                std::span<const std::size_t> inadmissible_counts, std::size_t n,
                                const ClmRiskPair& pair) {
  std::size_t rejected = 0;
  for (std::size_t idx : sequence) {
    const double p = binomial_lower_tail(n, pair.beta1, inadmissible_counts[idx]);
    if (p > pair.beta2) break;
    ++rejected;
  }
  return rejected;
}

ClmResult clm_fit(std::span<const ClmInstance> instances, const ClmOptions& options,
                  const ClmRiskPair& pair) {
  ClmGrid grid;
  const auto eval = evaluate_grid(instances, options, grid);
  return walk(eval, grid, instances, options, pair);
}

ClmResult clm_calibrate(std::span<const Example> data, const GenerativeModel& generator,
                        AdmissionOracle& oracle, const ClmOptions& options,
                        const ClmRiskPair& pair) {
  if (data.empty()) throw InvalidInput("clm_calibrate: empty calibration data");
  const auto instances = clm_collect(data, generator, oracle, options.budget, options.seed);
  return clm_fit(instances, options, pair);
}

ClmResult clm_reduced_max(std::span<const Example> data, const GenerativeModel& generator,
                          AdmissionOracle& oracle, ClmOptions options, const ClmRiskPair& pair) {
  options.budget.max = 10;
  return clm_calibrate(data, generator, oracle, options, pair);
}

ClmResult clm_calibrate_best(std::span<const Example> data, const GenerativeModel& generator,
                             AdmissionOracle& oracle, const ClmOptions& options, double alpha) {
  if (data.empty()) throw InvalidInput("clm_calibrate_best: empty calibration data");
  const auto instances = clm_collect(data, generator, oracle, options.budget, options.seed);
  ClmGrid grid;
  const auto eval = evaluate_grid(instances, options, grid);

  std::optional<ClmResult> best;
  double best_admissibility = kInfinity;
  double best_size = kInfinity;
  for (const auto& pair : beta_grid(alpha)) {
    auto result = walk(eval, grid, instances, options, pair);
    if (result.rejected) {
      if (!best) best = std::move(result);
      continue;
    }
    std::size_t hits = 0;
    double size = 0.0;
    for (const auto& instance : instances) {
      const auto outcome = evaluate(instance, *result.selected, options);
      hits += outcome.admissible ? 1 : 0;
      size += static_cast<double>(outcome.size);
    }
    const double admissibility = static_cast<double>(hits) / static_cast<double>(instances.size());
    size /= static_cast<double>(instances.size());
    const bool better = !best || best->rejected || admissibility < best_admissibility ||
                        (admissibility == best_admissibility && size < best_size);
    if (better) {
      best = std::move(result);
      best_admissibility = admissibility;
      best_size = size;
    }
  }
  return *best;
}

PredictionSet clm_predict(const Condition& condition, const GenerativeModel& generator,
                          const ClmResult& result, const ClmOptions& options, Seed seed) {
  if (result.rejected || !result.selected) return PredictionSet::whole_space();
  std::vector<Output> draws;
  draws.reserve(result.max);
  for (std::size_t j = 0; j < result.max; ++j) {
    Output y = generator.sample(condition, draw_seed(seed, j));
    y.id = j;
    draws.push_back(std::move(y));
  }
  PredictionSet set;
  for (std::size_t k : clm_select(draws, *result.selected, options.stop, options.similarity)) {
    set.items.push_back(draws[k]);
  }
  return set;
}

}  // namespace scopegen
