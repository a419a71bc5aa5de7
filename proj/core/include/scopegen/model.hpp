#pragma once

#include "scopegen/types.hpp"

namespace scopegen {

/// Black-box conditional generator G. Draws with distinct seeds must be
/// i.i.d. given the condition. Implementations fill Output::quality with
/// q(y) > 0; the caller assigns Output::id. `sample` is called concurrently.
class GenerativeModel {
 public:
  virtual ~GenerativeModel() = default;
  virtual Output sample(const Condition& condition, Seed seed) const = 0;
};

}  // namespace scopegen
