#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace modhail {

// splitmix64 finalizer; good enough to decorrelate derived seeds.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Derives the seed of a named stream from one master seed, so that the
// arrival process, the scenario draw and so on stay independent and a run
// can be reproduced stream by stream.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view stream,
                                 std::uint64_t index = 0) {
  std::uint64_t h = mix64(master);
  for (char ch : stream)
    h = mix64(h ^ static_cast<std::uint64_t>(static_cast<unsigned char>(ch)));
  return mix64(h ^ mix64(index));
}

inline std::mt19937_64 make_engine(std::uint64_t master, std::string_view stream,
                                   std::uint64_t index = 0) {
  return std::mt19937_64(derive_seed(master, stream, index));
}

}  // namespace modhail
