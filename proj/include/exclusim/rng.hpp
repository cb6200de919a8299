#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace exclusim {

// splitmix64 mixing step, used to derive independent replica seeds from a
// master seed. Replica streams must not depend on scheduling order, so each
// replica seeds its own engine from (master, index) alone.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

inline std::uint64_t replica_seed(std::uint64_t master, std::uint64_t replica_index) {
  return splitmix64(splitmix64(master) ^ splitmix64(replica_index + 1));
}

// mt19937_64 with explicit draw routines. The std distributions are
// implementation-defined, which would break the byte-for-byte
// reproducibility contract, so all draws are spelled out here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform on [0,1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform on (0,1], safe as a log argument.
  double uniform_pos() { return 1.0 - uniform(); }

  double exponential(double rate) { return -std::log(uniform_pos()) / rate; }

  bool bernoulli(double p) { return uniform() < p; }

  // Unbiased integer in [0, n) by rejection.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  std::uint64_t raw() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace exclusim
