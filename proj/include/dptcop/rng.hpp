#ifndef DPTCOP_RNG_HPP
#define DPTCOP_RNG_HPP

#include <array>
#include <cstdint>
#include <random>

namespace dptcop {

// SplitMix64 step; used to derive independent per-task seeds so that results
// do not depend on worker scheduling.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// seed(root, a, b) is stable in (a, b) and decorrelated across tasks.
inline std::uint64_t derive_seed(std::uint64_t root, std::uint64_t a,
                                 std::uint64_t b = 0) {
  std::uint64_t s = splitmix64(root);
  s = splitmix64(s ^ (a + 0x632be59bd9b4e019ULL));
  s = splitmix64(s ^ (b + 0x9e6c63d0876a9a47ULL));
  return s;
}

inline std::mt19937_64 make_rng(std::uint64_t seed) {
  return std::mt19937_64(seed);
}

inline double uniform01(std::mt19937_64& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

inline double standard_normal(std::mt19937_64& rng) {
  return std::normal_distribution<double>(0.0, 1.0)(rng);
}

inline double gamma_draw(std::mt19937_64& rng, double shape) {
  return std::gamma_distribution<double>(shape, 1.0)(rng);
}

// Dirichlet(a0..a3) via four Gammas normalized by their sum.
inline std::array<double, 4> dirichlet4(std::mt19937_64& rng,
                                        const std::array<double, 4>& alpha) {
  std::array<double, 4> g;
  double s = 0.0;
  for (int i = 0; i < 4; ++i) {
    g[i] = gamma_draw(rng, alpha[i]);
    s += g[i];
  }
  for (int i = 0; i < 4; ++i) g[i] /= s;
  return g;
}

}  // namespace dptcop

#endif
