#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

namespace scopegen {

using Seed = std::uint64_t;

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// One generated candidate. `id` is the identity of the draw within its
/// condition (the generation index); two draws may carry equal payloads.
struct Output {
  std::uint64_t id = 0;
  std::int64_t token = 0;
  std::string text;
  double quality = 1.0;
};

struct Condition {
  std::uint64_t id = 0;
  std::string text;
};

/// Ground truth for a condition; any alias counts as a match.
struct Reference {
  std::vector<Output> aliases;
};

/// One calibration or test pair (x, y^t).
struct Example {
  Condition condition;
  Reference reference;
};

/// Human-readable payload of an output: its text if set, otherwise the token.
std::string payload(const Output& output);

/// Payload equality (text if either side carries text, token otherwise).
bool same_payload(const Output& a, const Output& b);

/// SplitMix64 finalizer used to derive independent streams from one seed.
Seed mix_seed(Seed base, std::uint64_t stream);

}  // namespace scopegen
