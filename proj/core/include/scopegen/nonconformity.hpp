#pragma once

#include <cstddef>
#include <functional>
#include <span>

#include "scopegen/types.hpp"

namespace scopegen {

enum class UpdateKind { count, sum, max, diversity, quality };

using QualityFn = std::function<double(const Output&)>;
using DistanceFn = std::function<double(const Output&, const Output&)>;

inline constexpr double kDefaultSumGamma = 0.5;
inline constexpr double kDefaultMaxGamma = 0.3;
inline constexpr double kQualityFloor = 1e-9;

/// Parameters of one non-conformity update function.
struct UpdateRule {
  UpdateKind kind = UpdateKind::count;
  /// Size regularization for sum/max; must be > 0 there.
  double gamma = 0.0;
  /// Quality estimate q(y) > 0. Empty means "read Output::quality".
  QualityFn quality;
  DistanceFn distance;
  /// Upper bound on |d|; the first diversity pick scores -d_max.
  double d_max = 1.0;
  /// When set, a negative distance is a contract violation.
  bool nonnegative_distance = true;
  /// Clamp q(y) <= 0 up to kQualityFloor with a warning instead of throwing.
  bool clamp_quality = false;

  static UpdateRule count();
  static UpdateRule sum(double gamma = kDefaultSumGamma, QualityFn quality = {});
  static UpdateRule max(double gamma = kDefaultMaxGamma, QualityFn quality = {});
  static UpdateRule diversity(DistanceFn distance, double d_max = 1.0,
                              bool nonnegative_distance = true);
  static UpdateRule quality_filter(QualityFn quality = {});

  bool is_generation() const {
    return kind == UpdateKind::count || kind == UpdateKind::sum || kind == UpdateKind::max;
  }
  /// Throws InvalidInput when the invariants for `kind` do not hold.
  void validate() const;
};

/// Running score nu and the number of updates applied so far (j).
struct NonConformityState {
  double nu = 0.0;
  std::size_t step = 0;
};

/// q(y) after the rule's positivity policy.
double evaluate_quality(const UpdateRule& rule, const Output& output);

/// count: nu' = j + 1; sum: nu + q(y) + gamma j; max: max(nu, q(y)) + gamma j.
NonConformityState update_generation(NonConformityState state, const Output& candidate,
                                     const UpdateRule& rule);

/// `current_set` already contains `candidate` (matched by id). The first pick
/// scores -d_max, later picks -min d(candidate, y') over the rest of the set.
NonConformityState update_diversity(NonConformityState state, const Output& candidate,
                                    std::span<const Output> current_set, const UpdateRule& rule);

/// nu' = -q(candidate).
NonConformityState update_quality(NonConformityState state, const Output& candidate,
                                  const UpdateRule& rule);

/// Dispatches on rule.kind.
NonConformityState apply_update(NonConformityState state, const Output& candidate,
                                std::span<const Output> current_set, const UpdateRule& rule);

}  // namespace scopegen
