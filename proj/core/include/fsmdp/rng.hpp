#pragma once

#include <cstdint>

namespace fsmdp {

// Counter-based random streams. Every draw is a pure function of
// (key, counters), so simulation results do not depend on call order or
// on how work is split across threads.

inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t counter_hash(std::uint64_t k, std::uint64_t a,
                                  std::uint64_t b = 0, std::uint64_t c = 0) {
  std::uint64_t z = mix64(k ^ 0xd1b54a32d192ed03ULL);
  z = mix64(z ^ a);
  z = mix64(z ^ (b + 0x8cb92ba72f3d8dd7ULL));
  z = mix64(z ^ (c + 0x2545f4914f6cdd1dULL));
  return z;
}

inline double to_unit_interval(std::uint64_t h) {
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

// A keyed stream; uniform(a,b,c) is deterministic in (key, a, b, c).
struct RandomStream {
  std::uint64_t key = 0;

  static RandomStream from(std::uint64_t seed, std::uint64_t tag0,
                           std::uint64_t tag1 = 0) {
    return RandomStream{counter_hash(seed, tag0, tag1, 0x5151ULL)};
  }

  double uniform(std::uint64_t a, std::uint64_t b = 0,
                 std::uint64_t c = 0) const {
    return to_unit_interval(counter_hash(key, a, b, c));
  }

  std::uint64_t bits(std::uint64_t a, std::uint64_t b = 0,
                     std::uint64_t c = 0) const {
    return counter_hash(key, a, b, c);
  }
};

}  // namespace fsmdp
