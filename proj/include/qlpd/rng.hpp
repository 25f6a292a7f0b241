#ifndef QLPD_RNG_HPP
#define QLPD_RNG_HPP

#include <array>
#include <cstdint>

namespace qlpd::rng {

// SplitMix64 step. Used both as a stand-alone mixer and to seed streams.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Deterministic stream-key derivation: hash the seed with a list of indices.
// Used to give every (triplet, run) its own independent stream so that sweep
// results do not depend on worker scheduling.
inline std::uint64_t derive(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
  std::uint64_t s = seed;
  splitmix64(s);
  for (std::uint64_t v : path) {
    s ^= v + 0x9e3779b97f4a7c15ULL;
    splitmix64(s);
  }
  return s;
}

inline std::uint64_t derive(std::uint64_t seed, std::uint64_t a) { return derive(seed, {a}); }
inline std::uint64_t derive(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  return derive(seed, {a, b});
}

// xoshiro256++ (Blackman & Vigna). Bit-stable across platforms; distributions
// below are implemented by hand for the same reason (std::uniform_real_distribution
// is implementation-defined).
class Stream {
 public:
  explicit Stream(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& word : state_) word = splitmix64(sm);
  }

  std::uint64_t next() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform on [0, 1) with 53-bit resolution.
  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  bool bernoulli(double p) { return uniform01() < p; }

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return next() % n; }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  std::array<std::uint64_t, 4> state_{};
};

}  // namespace qlpd::rng

#endif  // QLPD_RNG_HPP
