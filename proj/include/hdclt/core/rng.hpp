#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <limits>
#include <string_view>

namespace hdclt {

// Counter-based stream derivation.
//
// Every random quantity in the library is drawn from a generator keyed by
// (root seed, experiment id, replicate r, row i). The key is folded through
// splitmix64 so that neighbouring counters give unrelated xoshiro256** states.
// Nothing depends on which worker thread evaluates a given (r, i), which is
// what makes results independent of the worker count.

inline constexpr std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// FNV-1a; used to turn experiment names into stable ids.
inline constexpr std::uint64_t experiment_id(std::string_view name) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (char c : name) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

inline constexpr std::uint64_t stream_key(std::uint64_t seed, std::uint64_t experiment,
                                          std::uint64_t replicate, std::uint64_t row) {
  std::uint64_t s = seed;
  std::uint64_t h = splitmix64(s);
  for (std::uint64_t word : {experiment, replicate, row}) {
    s = h ^ word;
    h = splitmix64(s);
  }
  return h;
}

// xoshiro256** (Blackman & Vigna). Satisfies UniformRandomBitGenerator.
class Xoshiro256 {
 public:
  using result_type = std::uint64_t;

  explicit Xoshiro256(std::uint64_t key) {
    std::uint64_t s = key;
    for (auto& word : state_) word = splitmix64(s);
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    const std::uint64_t result = std::rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = std::rotl(state_[3], 45);
    return result;
  }

 private:
  std::array<std::uint64_t, 4> state_{};
};

inline Xoshiro256 make_stream(std::uint64_t seed, std::uint64_t experiment,
                              std::uint64_t replicate, std::uint64_t row = 0) {
  return Xoshiro256(stream_key(seed, experiment, replicate, row));
}

// Uniform on the open interval (0, 1) with 53 random bits.
template <class Rng>
double uniform_open(Rng& rng) {
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

}  // namespace hdclt
