#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

#include "latefuse/hash.hpp"

namespace latefuse {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// One master seed, one stream per purpose ("shuffle", "dropout", "init",
// "synth", ...). Adding a consumer with a new purpose name never perturbs
// the draws seen by existing streams.
inline std::uint64_t stream_seed(std::uint64_t master, std::string_view purpose,
                                 std::uint64_t index = 0) {
  return splitmix64(splitmix64(master ^ fnv1a64(purpose)) + index);
}

class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : gen_(seed) {}
  RngStream(std::uint64_t master, std::string_view purpose, std::uint64_t index = 0)
      : gen_(stream_seed(master, purpose, index)) {}

  std::uint64_t bits() { return gen_(); }

  // Uniform in [0, 1), 53 mantissa bits.
  double uniform() { return static_cast<double>(bits() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n); n > 0. Multiply-shift, no modulo bias worth
  // caring about at these stream lengths.
  std::size_t below(std::size_t n) {
    return static_cast<std::size_t>(
        (static_cast<unsigned __int128>(bits()) * static_cast<unsigned __int128>(n)) >> 64);
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace latefuse
