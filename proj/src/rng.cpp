#include "adebias/rng.hpp"

namespace adebias {

std::uint64_t Rng::derive(std::uint64_t seed, std::string_view label, std::uint64_t index) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto mix = [&h](std::uint64_t byte) {
    h ^= byte & 0xff;
    h *= 0x100000001b3ull;
  };
  for (int i = 0; i < 8; ++i) mix(seed >> (8 * i));
  for (char c : label) mix(static_cast<std::uint64_t>(c));
  for (int i = 0; i < 8; ++i) mix(index >> (8 * i));
  return h;
}

}  // namespace adebias
