#include "scopegen/world.hpp"

#include <cmath>
#include <cstdlib>
#include <mutex>
#include <random>

#include <fmt/format.h>

#include "scopegen/errors.hpp"
#include "scopegen/oracle.hpp"

namespace scopegen {

Output synthetic_sample(const SyntheticInstance& instance, Seed seed) {
  std::mt19937_64 rng(seed);
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  const double others = static_cast<double>(instance.vocab - 1);
  Output y;
  if (u < instance.p_success) {
    y.token = instance.y_true;
    y.quality = instance.p_success;
  } else {
    const auto k = std::uniform_int_distribution<std::int64_t>(0, instance.vocab - 2)(rng);
    y.token = k < instance.y_true ? k : k + 1;
    y.quality = (1.0 - instance.p_success) / others;
  }
  return y;
}

double closed_form_admissibility(const SyntheticInstance& instance, std::size_t draws) {
  return 1.0 - std::pow(1.0 - instance.p_success, static_cast<double>(draws));
}

double expected_admissibility(const WorldParams& params, std::size_t draws) {
  const double j = static_cast<double>(draws);
  const double width = params.p_hi - params.p_lo;
  if (width <= 0.0) return 1.0 - std::pow(1.0 - params.p_lo, j);
  const double miss = (std::pow(1.0 - params.p_lo, j + 1.0) - std::pow(1.0 - params.p_hi, j + 1.0)) /
                      ((j + 1.0) * width);
  return 1.0 - miss;
}

SyntheticWorld::SyntheticWorld(WorldParams params) : params_(params) {
  if (!(params.p_lo >= 0.0 && params.p_lo <= params.p_hi && params.p_hi <= 1.0)) {
    throw InvalidInput(
        fmt::format("world: need 0 <= p_lo <= p_hi <= 1, got [{}, {}]", params.p_lo, params.p_hi));
  }
  if (params.vocab < 2) throw InvalidInput("world: vocabulary needs at least two tokens");
}

Example SyntheticWorld::add(const SyntheticInstance& instance) {
  if (instance.vocab != params_.vocab) {
    throw InvalidInput("world: instance vocabulary differs from the world's");
  }
  {
    std::unique_lock lock(mutex_);
    instances_[instance.id] = instance;
  }
  Example example;
  example.condition.id = instance.id;
  example.condition.text = fmt::format("synthetic:{}", instance.id);
  Output truth;
  truth.token = instance.y_true;
  truth.quality = instance.p_success;
  example.reference.aliases.push_back(truth);
  return example;
}

std::vector<Example> SyntheticWorld::draw(std::size_t n, Seed seed, std::uint64_t first_id) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> p(params_.p_lo, params_.p_hi);
  std::uniform_int_distribution<std::int64_t> token(0, params_.vocab - 1);
  std::vector<Example> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    SyntheticInstance instance;
    instance.id = first_id + i;
    instance.p_success = p(rng);
    instance.y_true = token(rng);
    instance.vocab = params_.vocab;
    out.push_back(add(instance));
  }
  return out;
}

const SyntheticInstance& SyntheticWorld::instance(std::uint64_t id) const {
  std::shared_lock lock(mutex_);
  const auto it = instances_.find(id);
  if (it == instances_.end()) throw InvalidInput(fmt::format("world: unknown condition {}", id));
  return it->second;
}

Output SyntheticWorld::sample(const Condition& condition, Seed seed) const {
  return synthetic_sample(instance(condition.id), seed);
}

double SyntheticWorld::distance(const Output& a, const Output& b) const {
  return static_cast<double>(std::llabs(a.token - b.token)) /
         static_cast<double>(params_.vocab - 1);
}

DistanceFn SyntheticWorld::distance_fn() const {
  const double scale = static_cast<double>(params_.vocab - 1);
  return [scale](const Output& a, const Output& b) {
    return static_cast<double>(std::llabs(a.token - b.token)) / scale;
  };
}

bool SyntheticWorld::is_admissible(const Example& example, const PredictionSet& set) const {
  if (set.entire_space) return true;
  for (const auto& y : set.items) {
    if (admit_exact(y, example.reference)) return true;
  }
  return false;
}

}  // namespace scopegen
