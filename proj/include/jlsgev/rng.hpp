#pragma once

#include <cstdint>
#include <random>

namespace jlsgev {

// Deterministic generator with explicit variate transforms. The std
// distribution classes are implementation-defined, which would break the
// byte-identical rerun contract, so uniform/normal are produced by hand.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  // Independent stream derived from (seed, stream) by splitmix64 mixing.
  static Rng derive(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t next_u64();
  double uniform();  // [0, 1), 53-bit resolution
  double normal();   // standard normal, Marsaglia polar with cached spare

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace jlsgev
