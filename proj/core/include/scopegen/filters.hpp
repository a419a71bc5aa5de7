#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "scopegen/nonconformity.hpp"
#include "scopegen/types.hpp"

namespace scopegen {

enum class FilterKind { diversity, quality, dedup };

using Equivalence = std::function<bool(const Output&, const Output&)>;

/// One filter stage of the pipeline. Dedup stages carry no threshold and
/// consume no calibration data.
struct FilterSpec {
  FilterKind kind = FilterKind::quality;
  UpdateRule rule;
  Equivalence equivalent;

  static FilterSpec diversity(DistanceFn distance, double d_max = 1.0,
                              bool nonnegative_distance = true);
  static FilterSpec quality(QualityFn quality = {});
  static FilterSpec dedup(Equivalence equivalent = {});

  bool calibrated() const { return kind != FilterKind::dedup; }
};

/// Ordered candidates for one condition; insertion order is greedy order.
/// `entire_space` marks the sentinel returned after a rejected calibration.
struct PredictionSet {
  std::vector<Output> items;
  std::size_t source_stage = 0;
  bool entire_space = false;

  static PredictionSet whole_space();

  std::size_t size() const { return items.size(); }
  bool empty() const { return items.empty(); }
  bool contains(std::uint64_t id) const;
};

/// Farthest-point pick from previous \ current. Empty `current` draws
/// uniformly with `seed`. Ties go to the earliest position in `previous`.
Output sub_sample_diversity(const PredictionSet& current, const PredictionSet& previous,
                            const DistanceFn& distance, Seed seed);

/// argmax q over previous \ current, ties to the earliest position.
Output sub_sample_quality(const PredictionSet& current, const PredictionSet& previous,
                          const QualityFn& quality);

/// Keeps the first member of each equivalence class, preserving order.
PredictionSet dedup(const PredictionSet& previous, const Equivalence& equivalent = {});

/// Incremental greedy ordering over a fixed source set. Caches the running
/// min-distance of every unpicked element so each pick is O(n).
class GreedySampler {
 public:
  GreedySampler(const PredictionSet& source, const FilterSpec& filter, Seed seed);

  bool exhausted() const { return picked_ == source_.size(); }
  std::size_t picked() const { return picked_; }
  /// Index into the source set of the next pick. Throws NoCandidates when exhausted.
  std::size_t next();

 private:
  std::span<const Output> source_;
  const FilterSpec& filter_;
  Seed seed_;
  std::vector<bool> taken_;
  std::vector<double> min_distance_;
  std::vector<double> quality_;
  std::size_t picked_ = 0;
};

std::vector<std::string> tokenize(std::string_view text);

/// LCS F-measure: F = 2RP/(R+P) with R = LCS/|a|, P = LCS/|b|; 0 if either is empty.
double lcs_similarity(std::span<const std::string> a, std::span<const std::string> b);
double lcs_similarity(std::string_view a, std::string_view b);

/// -lcs_similarity over Output::text; use with d_max = 1 and nonnegative = false.
DistanceFn negated_lcs_distance();

/// d~ = -1/(1+d) for an unbounded nonnegative metric d.
DistanceFn bounded_distance(DistanceFn distance);

}  // namespace scopegen
