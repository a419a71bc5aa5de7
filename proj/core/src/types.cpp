#include "scopegen/types.hpp"

namespace scopegen {

std::string payload(const Output& output) {
  if (!output.text.empty()) return output.text;
  return std::to_string(output.token);
}

bool same_payload(const Output& a, const Output& b) {
  if (!a.text.empty() || !b.text.empty()) return a.text == b.text;
  return a.token == b.token;
}

Seed mix_seed(Seed base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace scopegen
