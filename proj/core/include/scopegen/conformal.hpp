#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "scopegen/types.hpp"

namespace scopegen {

/// A calibration score; +inf encodes "no admissible outcome within budget".
struct ScoreSample {
  double value = 0.0;
  std::uint64_t instance_id = 0;
};

/// Result of the split-conformal quantile. `rejected` is set when the rank
/// exceeds n or lands on an infinite score; lambda is then +inf.
struct ConformalThreshold {
  double lambda = kInfinity;
  std::size_t rank = 0;
  std::size_t n = 0;
  bool rejected = true;
};

/// Rank ceil((1 - alpha)(n + 1)) of the conformal quantile.
std::size_t conformal_rank(std::size_t n, double alpha);

/// k-th order statistic of the multiset of scores with k = conformal_rank.
/// Throws InvalidInput on an empty list, alpha outside (0, 1), NaN or -inf.
ConformalThreshold conformal_quantile(std::span<const double> scores, double alpha);
ConformalThreshold conformal_quantile(std::span<const ScoreSample> scores, double alpha);

/// Per-stage risk levels whose complements multiply to 1 - alpha_total.
struct RiskLevels {
  double alpha_total = 0.0;
  std::vector<double> per_stage;
  /// Generation-stage weighting M; 0 means risk is split uniformly.
  int emphasis = 0;

  std::size_t stage_count() const { return per_stage.size(); }
  /// 1 - prod(1 - alpha_s).
  double combined() const;
};

/// Generation stage gets 1-(1-a)^((M-1)/M); the K-1 filter stages share the
/// rest equally. K = 1 puts all risk on the single stage.
RiskLevels allocate_risk(double alpha_total, std::size_t stage_count, int emphasis);

/// alpha_s = 1-(1-a)^(1/K) for every stage.
RiskLevels allocate_risk_uniform(double alpha_total, std::size_t stage_count);

}  // namespace scopegen
