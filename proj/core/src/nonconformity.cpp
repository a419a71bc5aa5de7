#include "scopegen/nonconformity.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "scopegen/errors.hpp"

namespace scopegen {

UpdateRule UpdateRule::count() { return UpdateRule{}; }

UpdateRule UpdateRule::sum(double gamma, QualityFn quality) {
  UpdateRule rule;
  rule.kind = UpdateKind::sum;
  rule.gamma = gamma;
  rule.quality = std::move(quality);
  return rule;
}

UpdateRule UpdateRule::max(double gamma, QualityFn quality) {
  UpdateRule rule;
  rule.kind = UpdateKind::max;
  rule.gamma = gamma;
  rule.quality = std::move(quality);
  return rule;
}

UpdateRule UpdateRule::diversity(DistanceFn distance, double d_max, bool nonnegative_distance) {
  UpdateRule rule;
  rule.kind = UpdateKind::diversity;
  rule.distance = std::move(distance);
  rule.d_max = d_max;
  rule.nonnegative_distance = nonnegative_distance;
  return rule;
}

UpdateRule UpdateRule::quality_filter(QualityFn quality) {
  UpdateRule rule;
  rule.kind = UpdateKind::quality;
  rule.quality = std::move(quality);
  return rule;
}

void UpdateRule::validate() const {
  if ((kind == UpdateKind::sum || kind == UpdateKind::max) && !(gamma > 0.0)) {
    throw InvalidInput(fmt::format("sum/max update needs gamma > 0, got {}", gamma));
  }
  if (kind == UpdateKind::diversity) {
    if (!distance) throw InvalidInput("diversity update needs a distance function");
    if (!(d_max > 0.0) || !std::isfinite(d_max)) {
      throw InvalidInput(fmt::format("diversity update needs finite d_max > 0, got {}", d_max));
    }
  }
}

double evaluate_quality(const UpdateRule& rule, const Output& output) {
  const double q = rule.quality ? rule.quality(output) : output.quality;
  if (!std::isfinite(q)) {
    throw ContractViolation(fmt::format("quality of candidate {} is not finite", output.id));
  }
  if (q > 0.0) return q;
  if (!rule.clamp_quality) {
    throw ContractViolation(
        fmt::format("quality of candidate {} must be > 0, got {}", output.id, q));
  }
  spdlog::warn("quality {} of candidate {} clamped to {}", q, output.id, kQualityFloor);
  return kQualityFloor;
}

NonConformityState update_generation(NonConformityState state, const Output& candidate,
                                     const UpdateRule& rule) {
  const double j = static_cast<double>(state.step);
  switch (rule.kind) {
    case UpdateKind::count:
      state.nu = j + 1.0;
      break;
    case UpdateKind::sum:
      state.nu = state.nu + evaluate_quality(rule, candidate) + rule.gamma * j;
      break;
    case UpdateKind::max:
      state.nu = std::max(state.nu, evaluate_quality(rule, candidate)) + rule.gamma * j;
      break;
    default:
      throw InvalidInput("update_generation: rule is not a generation rule");
  }
  ++state.step;
  return state;
}

NonConformityState update_diversity(NonConformityState state, const Output& candidate,
                                    std::span<const Output> current_set, const UpdateRule& rule) {
  if (rule.kind != UpdateKind::diversity || !rule.distance) {
    throw InvalidInput("update_diversity: rule is not a diversity rule");
  }
  // The first pick is detected by step rather than nu == 0: a later pick may
  // legitimately score 0 (duplicate under a nonnegative metric).
  if (state.step == 0) {
    state.nu = -rule.d_max;
    ++state.step;
    return state;
  }
  double closest = kInfinity;
  for (const auto& other : current_set) {
    if (other.id == candidate.id) continue;
    const double d = rule.distance(candidate, other);
    if (std::isnan(d)) throw ContractViolation("distance returned NaN");
    if (rule.nonnegative_distance && d < 0.0) {
      throw ContractViolation(fmt::format("nonnegative distance returned {}", d));
    }
    closest = std::min(closest, d);
  }
  state.nu = std::isinf(closest) ? -rule.d_max : -closest;
  ++state.step;
  return state;
}

NonConformityState update_quality(NonConformityState state, const Output& candidate,
                                  const UpdateRule& rule) {
  state.nu = -evaluate_quality(rule, candidate);
  ++state.step;
  return state;
}

NonConformityState apply_update(NonConformityState state, const Output& candidate,
                                std::span<const Output> current_set, const UpdateRule& rule) {
  switch (rule.kind) {
    case UpdateKind::count:
    case UpdateKind::sum:
    case UpdateKind::max:
      return update_generation(state, candidate, rule);
    case UpdateKind::diversity:
      return update_diversity(state, candidate, current_set, rule);
    case UpdateKind::quality:
      return update_quality(state, candidate, rule);
  }
  throw InvalidInput("apply_update: unknown rule kind");
}

}  // namespace scopegen
