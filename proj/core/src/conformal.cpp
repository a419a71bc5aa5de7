#include "scopegen/conformal.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include <fmt/format.h>

#include "scopegen/errors.hpp"

namespace scopegen {
namespace {

void check_alpha(double alpha, const char* what) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw InvalidInput(fmt::format("{}: alpha must lie in (0, 1), got {}", what, alpha));
  }
}

}  // namespace

std::size_t conformal_rank(std::size_t n, double alpha) {
  check_alpha(alpha, "conformal_rank");
  // The product is exact for the usual decimal alphas up to one ulp; the
  // slack keeps 0.8 * 10 from rounding up to rank 9.
  const double raw = (1.0 - alpha) * static_cast<double>(n + 1);
  return static_cast<std::size_t>(std::ceil(raw - 1e-9));
}

ConformalThreshold conformal_quantile(std::span<const double> scores, double alpha) {
  if (scores.empty()) throw InvalidInput("conformal_quantile: empty score list");
  check_alpha(alpha, "conformal_quantile");
  for (double s : scores) {
    if (std::isnan(s)) throw InvalidInput("conformal_quantile: NaN score");
    if (s == -kInfinity) throw InvalidInput("conformal_quantile: -inf score");
  }

  ConformalThreshold out;
  out.n = scores.size();
  out.rank = conformal_rank(out.n, alpha);
  if (out.rank > out.n) {
    out.lambda = kInfinity;
    out.rejected = true;
    return out;
  }
  std::vector<double> sorted(scores.begin(), scores.end());
  auto kth = sorted.begin() + static_cast<std::ptrdiff_t>(out.rank - 1);
  std::nth_element(sorted.begin(), kth, sorted.end());
  out.lambda = *kth;
  out.rejected = std::isinf(out.lambda);
  return out;
}

ConformalThreshold conformal_quantile(std::span<const ScoreSample> scores, double alpha) {
  std::vector<double> values;
  values.reserve(scores.size());
  for (const auto& s : scores) values.push_back(s.value);
  return conformal_quantile(std::span<const double>(values), alpha);
}

double RiskLevels::combined() const {
  double keep = 1.0;
  for (double a : per_stage) keep *= (1.0 - a);
  return 1.0 - keep;
}

namespace {

// 1 - (1 - alpha)^exponent without cancellation for small alpha.
double complement_power(double alpha, double exponent) {
  return -std::expm1(exponent * std::log1p(-alpha));
}

}  // namespace

RiskLevels allocate_risk(double alpha_total, std::size_t stage_count, int emphasis) {
  check_alpha(alpha_total, "allocate_risk");
  if (stage_count == 0) throw InvalidInput("allocate_risk: need at least one stage");
  if (emphasis < 2) throw InvalidInput("allocate_risk: emphasis M must be >= 2");

  RiskLevels levels;
  levels.alpha_total = alpha_total;
  levels.emphasis = emphasis;
  if (stage_count == 1) {
    levels.per_stage = {alpha_total};
    return levels;
  }
  const double m = static_cast<double>(emphasis);
  const double filters = static_cast<double>(stage_count - 1);
  levels.per_stage.push_back(complement_power(alpha_total, (m - 1.0) / m));
  for (std::size_t s = 1; s < stage_count; ++s) {
    levels.per_stage.push_back(complement_power(alpha_total, 1.0 / (m * filters)));
  }
  return levels;
}

RiskLevels allocate_risk_uniform(double alpha_total, std::size_t stage_count) {
  check_alpha(alpha_total, "allocate_risk_uniform");
  if (stage_count == 0) throw InvalidInput("allocate_risk_uniform: need at least one stage");
  RiskLevels levels;
  levels.alpha_total = alpha_total;
  levels.emphasis = 0;
  levels.per_stage.assign(stage_count,
                          complement_power(alpha_total, 1.0 / static_cast<double>(stage_count)));
  return levels;
}

}  // namespace scopegen
