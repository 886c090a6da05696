#pragma once

#include <cstdint>
#include <random>

namespace sblq {

// Seeded random stream with platform-independent output.
//
// Raw bits come from std::mt19937_64, whose output sequence is fixed by the
// C++ standard. The standard distributions are implementation-defined, so
// uniform and Gaussian variates are derived here:
//   uniform01  = (bits >> 11) * 2^-53
//   normal     = Box-Muller on two uniforms, both outputs consumed in order
//   index(n)   = rejection sampling on 64-bit words
// Streams are therefore bit-identical across compilers and standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1).
  double uniform01();
  double uniform(double low, double high);
  double normal(double mean = 0.0, double sd = 1.0);
  // Uniform integer on [0, n). Requires n > 0.
  std::uint64_t index(std::uint64_t n);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// SplitMix64 finalizer; used to derive independent child seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace sblq
