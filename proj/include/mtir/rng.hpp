#ifndef MTIR_RNG_HPP
#define MTIR_RNG_HPP

#include <cmath>
#include <cstdint>

namespace mtir {

// splitmix64 step; also used to derive child stream seeds.
inline uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline uint64_t mix_seed(uint64_t seed, uint64_t salt) {
  return mix64(seed ^ (0x9e3779b97f4a7c15ull * (salt + 1)));
}

// Deterministic generator with pinned output on every platform.
// std:: distributions are implementation-defined, so all draws
// (uniform, gaussian, index) are derived here from raw bits only.
class Rng {
 public:
  explicit Rng(uint64_t seed = 0) : state_(seed) {}

  uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ull;
    uint64_t x = state_;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
  }

  // uniform in [0, 1)
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // uniform integer in [0, n); n must be >= 1 and well below 2^53
  uint64_t below(uint64_t n) {
    return static_cast<uint64_t>(uniform() * double(n));
  }

  // standard normal, Box-Muller (fixed two draws per call)
  double gaussian() {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
  }

  Rng child(uint64_t salt) const { return Rng(mix_seed(state_, salt)); }

 private:
  uint64_t state_;
};

}  // namespace mtir

#endif
