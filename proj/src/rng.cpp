#include "coag/rng.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace coag {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

std::uint64_t stream_seed(std::uint64_t master, std::uint64_t stream_index) {
  std::uint64_t s = master ^ (0x9e3779b97f4a7c15ull * (stream_index + 1));
  splitmix64(s);
  return splitmix64(s);
}

double RngStream::exponential(double rate) {
  if (!(rate > 0.0)) throw std::domain_error("exponential: rate must be positive");
  // -log1p(-u) is exact near u = 0 and avoids log(0) since u < 1.
  return -std::log1p(-uniform01()) / rate;
}

std::uint64_t RngStream::uniform_below(std::uint64_t bound) {
  if (bound == 0) throw std::domain_error("uniform_below: empty range");
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % bound;
}

}  // namespace coag
