#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace vasim {

using Rng = std::mt19937_64;

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Derives an independent stream seed from a base seed and a path of stream
// ids (trial index, tree index, purpose tag, ...). Order matters.
constexpr std::uint64_t derive_seed(std::uint64_t seed,
                                    std::initializer_list<std::uint64_t> path) noexcept {
  std::uint64_t h = mix64(seed);
  for (auto id : path) h = mix64(h ^ mix64(id + 0x632be59bd9b4e019ULL));
  return h;
}

inline Rng make_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> path = {}) {
  return Rng{derive_seed(seed, path)};
}

// Stream tags, so that unrelated consumers of one seed never share a stream.
namespace stream {
inline constexpr std::uint64_t kTrace = 0x7472616365ULL;
inline constexpr std::uint64_t kLabel = 0x6c6162656cULL;
inline constexpr std::uint64_t kTrial = 0x747269616cULL;
inline constexpr std::uint64_t kCalibrate = 0x63616c6962ULL;
inline constexpr std::uint64_t kBootstrap = 0x626f6f74ULL;
inline constexpr std::uint64_t kSplit = 0x73706c6974ULL;
inline constexpr std::uint64_t kFold = 0x666f6c64ULL;
inline constexpr std::uint64_t kMotion = 0x6d6f74696f6eULL;
inline constexpr std::uint64_t kDataset = 0x64617461ULL;
inline constexpr std::uint64_t kDefense = 0x646566ULL;
inline constexpr std::uint64_t kOpportunity = 0x6f7070ULL;
}  // namespace stream

inline double uniform01(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

inline bool bernoulli(Rng& rng, double p) { return uniform01(rng) < p; }

}  // namespace vasim
