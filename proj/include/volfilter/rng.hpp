#pragma once

#include <cstdint>
#include <limits>
#include <random>

namespace volfilter {

// Stream tags keep the substreams of different consumers apart.
enum class StreamTag : std::uint64_t {
  Path = 1,
  Particle = 2,
  ParticlePrior = 3,
  Resample = 4,
  Test = 99,
};

inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Starting counter of the substream addressed by (seed, tag, a, b).
inline std::uint64_t stream_key(std::uint64_t seed, StreamTag tag, std::uint64_t a,
                                std::uint64_t b = 0) {
  std::uint64_t h = mix64(seed ^ 0x6a09e667f3bcc909ULL);
  h = mix64(h ^ static_cast<std::uint64_t>(tag));
  h = mix64(h ^ a);
  return mix64(h ^ (b + 0x9e3779b97f4a7c15ULL));
}

// SplitMix64: the output is a bijective hash of an incrementing counter, so a
// substream is fully determined by its starting key and the number of draws.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit SplitMix64(std::uint64_t key = 0) : state_(key) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix64(state_);
  }

 private:
  std::uint64_t state_;
};

// Standard-normal substream.
class NormalStream {
 public:
  NormalStream() = default;
  explicit NormalStream(std::uint64_t key) : engine_(key) {}
  NormalStream(std::uint64_t seed, StreamTag tag, std::uint64_t a, std::uint64_t b = 0)
      : engine_(stream_key(seed, tag, a, b)) {}

  double normal() { return normal_(engine_); }
  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }

 private:
  SplitMix64 engine_;
  std::normal_distribution<double> normal_;
};

}  // namespace volfilter
