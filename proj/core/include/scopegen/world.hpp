#pragma once

#include <cstddef>
#include <cstdint>
#include <shared_mutex>
#include <unordered_map>
#include <vector>

#include "scopegen/filters.hpp"
#include "scopegen/model.hpp"
#include "scopegen/types.hpp"

namespace scopegen {

struct WorldParams {
  double p_lo = 0.15;
  double p_hi = 0.9;
  std::int64_t vocab = 50;
};

/// A condition with a hidden chance that a draw is admissible.
struct SyntheticInstance {
  std::uint64_t id = 0;
  double p_success = 0.5;
  std::int64_t y_true = 0;
  std::int64_t vocab = 2;
};

/// y_true with probability p_success, else uniform over the other V-1
/// tokens. quality = p_success on y_true, (1 - p_success)/(V - 1) elsewhere.
Output synthetic_sample(const SyntheticInstance& instance, Seed seed);

/// 1 - (1 - p_success)^j.
double closed_form_admissibility(const SyntheticInstance& instance, std::size_t draws);

/// E[1 - (1 - p)^j] for p ~ Uniform(p_lo, p_hi).
double expected_admissibility(const WorldParams& params, std::size_t draws);

/// Token world with closed-form admissibility. Conditions refer to instances
/// by id; instances must be registered (via draw/add) before sampling.
class SyntheticWorld final : public GenerativeModel {
 public:
  explicit SyntheticWorld(WorldParams params = {});

  /// Draws n fresh instances with ids first_id, first_id + 1, ...
  std::vector<Example> draw(std::size_t n, Seed seed, std::uint64_t first_id = 0);
  Example add(const SyntheticInstance& instance);

  const SyntheticInstance& instance(std::uint64_t id) const;
  const WorldParams& params() const { return params_; }

  Output sample(const Condition& condition, Seed seed) const override;

  /// |a - b| / (V - 1), in [0, 1].
  double distance(const Output& a, const Output& b) const;
  double similarity(const Output& a, const Output& b) const { return 1.0 - distance(a, b); }
  DistanceFn distance_fn() const;
  bool is_admissible(const Example& example, const PredictionSet& set) const;

 private:
  WorldParams params_;
  mutable std::shared_mutex mutex_;
  std::unordered_map<std::uint64_t, SyntheticInstance> instances_;
};

}  // namespace scopegen
