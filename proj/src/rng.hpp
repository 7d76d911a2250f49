#pragma once

#include <cmath>
#include <cstdint>
#include <random>

// Deterministic stream construction: every consumer owns an mt19937_64
// seeded from (seed, stream, substream) through splitmix64, so runs and
// bootstrap replicates draw from independent streams regardless of
// evaluation order or thread count. The variate transforms below are
// hand-written because the standard library's distribution objects are
// not bit-identical across implementations.

namespace pnest {

inline uint64_t splitmix64(uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::mt19937_64 make_stream(uint64_t seed, uint64_t stream, uint64_t substream = 0) {
  uint64_t s = seed;
  uint64_t a = splitmix64(s);
  s ^= stream * 0x9e3779b97f4a7c15ULL;
  uint64_t b = splitmix64(s);
  s ^= substream * 0xc2b2ae3d27d4eb4fULL;
  uint64_t c = splitmix64(s);
  return std::mt19937_64(a ^ (b * 0x165667b19e3779f9ULL) ^ c);
}

// Uniform on (0, 1): 53-bit mantissa, offset by half an ulp so 0 and 1
// are unreachable.
inline double u01(std::mt19937_64& g) {
  return (static_cast<double>(g() >> 11) + 0.5) * 0x1.0p-53;
}

inline int draw_bernoulli(std::mt19937_64& g, double p) { return u01(g) < p ? 1 : 0; }

// Box-Muller, cosine branch only; always consumes exactly two uniforms.
inline double draw_normal(std::mt19937_64& g) {
  double u1 = u01(g);
  double u2 = u01(g);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

// Uniform integer in [0, n) via truncation; n is tiny relative to 2^53 so
// the bias is negligible and the draw stays platform-stable.
inline int draw_index(std::mt19937_64& g, int n) {
  int k = static_cast<int>(u01(g) * n);
  return k >= n ? n - 1 : k;
}

}  // namespace pnest
