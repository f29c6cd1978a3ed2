#ifndef GRAINFIELD_RNG_HPP_
#define GRAINFIELD_RNG_HPP_

#include <cstdint>
#include <initializer_list>
#include <random>

namespace grainfield {

using Engine = std::mt19937_64;

// SplitMix64 finalizer; used only to derive stream seeds.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Seed of the stream addressed by (master, path...), e.g.
// derive_seed(master, {lambda_index, replication}).
inline std::uint64_t derive_seed(std::uint64_t master,
                                 std::initializer_list<std::uint64_t> path) {
  std::uint64_t s = mix64(master);
  for (std::uint64_t p : path) s = mix64(s ^ mix64(p + 0x632be59bd9b4e019ULL));
  return s;
}

inline Engine make_engine(std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32)};
  return Engine(seq);
}

// Uniform on the open interval (0, 1); one engine draw.
inline double uniform01(Engine& eng) {
  return (static_cast<double>(eng() >> 11) + 0.5) * 0x1.0p-53;
}

}  // namespace grainfield

#endif  // GRAINFIELD_RNG_HPP_
