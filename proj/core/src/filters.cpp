#include "scopegen/filters.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "scopegen/errors.hpp"

namespace scopegen {

FilterSpec FilterSpec::diversity(DistanceFn distance, double d_max, bool nonnegative_distance) {
  FilterSpec spec;
  spec.kind = FilterKind::diversity;
  spec.rule = UpdateRule::diversity(std::move(distance), d_max, nonnegative_distance);
  return spec;
}

FilterSpec FilterSpec::quality(QualityFn quality) {
  FilterSpec spec;
  spec.kind = FilterKind::quality;
  spec.rule = UpdateRule::quality_filter(std::move(quality));
  return spec;
}

FilterSpec FilterSpec::dedup(Equivalence equivalent) {
  FilterSpec spec;
  spec.kind = FilterKind::dedup;
  spec.equivalent = std::move(equivalent);
  return spec;
}

PredictionSet PredictionSet::whole_space() {
  PredictionSet set;
  set.entire_space = true;
  return set;
}

bool PredictionSet::contains(std::uint64_t id) const {
  return std::any_of(items.begin(), items.end(), [id](const Output& o) { return o.id == id; });
}

namespace {

std::vector<std::size_t> remaining_positions(const PredictionSet& current,
                                             const PredictionSet& previous) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < previous.items.size(); ++i) {
    if (!current.contains(previous.items[i].id)) out.push_back(i);
  }
  if (out.empty()) throw NoCandidates("sub_sample: previous set has no candidates left");
  return out;
}

std::size_t uniform_index(std::size_t n, Seed seed) {
  std::mt19937_64 rng(seed);
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

}  // namespace

Output sub_sample_diversity(const PredictionSet& current, const PredictionSet& previous,
                            const DistanceFn& distance, Seed seed) {
  const auto left = remaining_positions(current, previous);
  if (current.empty()) return previous.items[left[uniform_index(left.size(), seed)]];

  std::size_t best = left.front();
  double best_score = -kInfinity;
  for (std::size_t pos : left) {
    double closest = kInfinity;
    for (const auto& chosen : current.items) {
      closest = std::min(closest, distance(previous.items[pos], chosen));
    }
    if (closest > best_score) {
      best_score = closest;
      best = pos;
    }
  }
  return previous.items[best];
}

Output sub_sample_quality(const PredictionSet& current, const PredictionSet& previous,
                          const QualityFn& quality) {
  const auto left = remaining_positions(current, previous);
  auto q = [&](const Output& o) { return quality ? quality(o) : o.quality; };
  std::size_t best = left.front();
  double best_q = q(previous.items[best]);
  for (std::size_t pos : left) {
    const double value = q(previous.items[pos]);
    if (value > best_q) {
      best_q = value;
      best = pos;
    }
  }
  return previous.items[best];
}

PredictionSet dedup(const PredictionSet& previous, const Equivalence& equivalent) {
  PredictionSet out;
  out.source_stage = previous.source_stage;
  out.entire_space = previous.entire_space;
  for (const auto& item : previous.items) {
    const bool seen = std::any_of(out.items.begin(), out.items.end(), [&](const Output& kept) {
      return equivalent ? equivalent(kept, item) : same_payload(kept, item);
    });
    if (!seen) out.items.push_back(item);
  }
  return out;
}

GreedySampler::GreedySampler(const PredictionSet& source, const FilterSpec& filter, Seed seed)
    : source_(source.items),
      filter_(filter),
      seed_(seed),
      taken_(source.items.size(), false),
      min_distance_(source.items.size(), kInfinity) {
  if (filter.kind == FilterKind::dedup) {
    throw InvalidInput("GreedySampler: dedup is not a greedy filter");
  }
  if (filter.kind == FilterKind::quality) {
    quality_.reserve(source_.size());
    for (const auto& o : source_) {
      quality_.push_back(filter.rule.quality ? filter.rule.quality(o) : o.quality);
    }
  }
}

std::size_t GreedySampler::next() {
  if (exhausted()) throw NoCandidates("GreedySampler: no candidates left");

  std::size_t pick = source_.size();
  if (filter_.kind == FilterKind::diversity && picked_ == 0) {
    pick = uniform_index(source_.size(), seed_);
  } else {
    const auto& score = filter_.kind == FilterKind::diversity ? min_distance_ : quality_;
    double best = -kInfinity;
    for (std::size_t i = 0; i < source_.size(); ++i) {
      if (taken_[i]) continue;
      if (pick == source_.size() || score[i] > best) {
        best = score[i];
        pick = i;
      }
    }
  }

  taken_[pick] = true;
  ++picked_;
  if (filter_.kind == FilterKind::diversity) {
    for (std::size_t i = 0; i < source_.size(); ++i) {
      if (taken_[i]) continue;
      min_distance_[i] =
          std::min(min_distance_[i], filter_.rule.distance(source_[i], source_[pick]));
    }
  }
  return pick;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::istringstream in{std::string(text)};
  for (std::string token; in >> token;) tokens.push_back(std::move(token));
  return tokens;
}

double lcs_similarity(std::span<const std::string> a, std::span<const std::string> b) {
  if (a.empty() || b.empty()) return 0.0;
  std::vector<std::size_t> row(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diagonal = 0;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = a[i - 1] == b[j - 1] ? diagonal + 1 : std::max(row[j], row[j - 1]);
      diagonal = up;
    }
  }
  const double lcs = static_cast<double>(row[b.size()]);
  if (lcs == 0.0) return 0.0;
  const double recall = lcs / static_cast<double>(a.size());
  const double precision = lcs / static_cast<double>(b.size());
  return 2.0 * recall * precision / (recall + precision);
}

double lcs_similarity(std::string_view a, std::string_view b) {
  const auto ta = tokenize(a);
  const auto tb = tokenize(b);
  return lcs_similarity(std::span<const std::string>(ta), std::span<const std::string>(tb));
}

DistanceFn negated_lcs_distance() {
  return [](const Output& a, const Output& b) { return -lcs_similarity(a.text, b.text); };
}

DistanceFn bounded_distance(DistanceFn distance) {
  return [d = std::move(distance)](const Output& a, const Output& b) {
    return -1.0 / (1.0 + d(a, b));
  };
}

}  // namespace scopegen
