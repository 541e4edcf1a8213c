#pragma once

#include <cstdint>

namespace qmcflux {

/// SplitMix64 finalizer (Steele, Lea & Flood 2014).
constexpr std::uint64_t splitmix64_mix(std::uint64_t x) noexcept
{
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Counter-based SplitMix64 stream.
///
/// A stream is identified by (seed, stream index). The i-th draw of a stream is
///   mix(key + (i + 1) * golden),   key = mix(seed ^ mix(stream + 1)),
/// so any draw can be recomputed without replaying earlier ones, and distinct
/// shift indices get independent streams from one experiment seed.
class CounterRng {
public:
  CounterRng(std::uint64_t seed, std::uint64_t stream) noexcept
      : key_(splitmix64_mix(seed ^ splitmix64_mix(stream + 1))) {}

  std::uint64_t bits(std::uint64_t counter) const noexcept
  {
    return splitmix64_mix(key_ + (counter + 1) * 0x9E3779B97F4A7C15ull);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform(std::uint64_t counter) const noexcept
  {
    return static_cast<double>(bits(counter) >> 11) * 0x1.0p-53;
  }

private:
  std::uint64_t key_;
};

} // namespace qmcflux
