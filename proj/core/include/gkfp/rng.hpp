// Counter-based deterministic generator: value i of stream (seed, stream) is
// a pure function of (seed, stream, i), so sweeps produce identical vectors
// regardless of scheduling.

#pragma once

#include "gkfp/basis.hpp"

#include <cstdint>

namespace gkfp {

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

class CounterRng {
 public:
  CounterRng(uint64_t seed, uint64_t stream) : key_(splitmix64(seed ^ (stream * 0xd1342543de82ef95ULL))) {}

  double uniform() {  // in [0,1)
    uint64_t v = splitmix64(key_ + counter_++);
    return static_cast<double>(v >> 11) * 0x1.0p-53;
  }

  double gaussian() {
    // Box-Muller; consumes two counter values.
    double u1 = uniform(), u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  Vector complex_gaussian_vector(long n) {
    Vector v(n);
    for (long i = 0; i < n; ++i) v(i) = Complex(gaussian(), gaussian());
    return v;
  }

  RealVector gaussian_vector(long n) {
    RealVector v(n);
    for (long i = 0; i < n; ++i) v(i) = gaussian();
    return v;
  }

 private:
  uint64_t key_;
  uint64_t counter_ = 0;
};

}  // namespace gkfp
