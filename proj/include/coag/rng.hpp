#pragma once

#include <cstdint>
#include <random>

namespace coag {

// One splitmix64 round; advances state and returns the mixed word.
std::uint64_t splitmix64(std::uint64_t& state);

// Engine seed for a derived stream. Documented mixing: two splitmix64 rounds
// over master xor golden*(index+1), so streams for distinct indices are
// decorrelated and the derivation is reproducible from the two integers alone.
std::uint64_t stream_seed(std::uint64_t master, std::uint64_t stream_index);

// Seedable 64-bit generator with explicit draw primitives. The inverse
// transforms live here (not std::*_distribution) so a fixed seed pins the
// exact draw sequence regardless of standard-library internals.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : engine_(seed) {}

  static RngStream for_replica(std::uint64_t master, std::uint64_t replica) {
    return RngStream(stream_seed(master, replica));
  }

  std::uint64_t raw() { return engine_(); }

  // [0,1) with 53 random bits.
  double uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Exponential holding time; rate > 0.
  double exponential(double rate);

  // Unbiased integer in [0, bound), bound >= 1, by rejection.
  std::uint64_t uniform_below(std::uint64_t bound);

 private:
  std::mt19937_64 engine_;
};

}  // namespace coag
